// DOM wiring.  All decision logic lives in the service and the pure modules;
// this file only renders their outputs.

import { AdvisorClient, ServiceError } from "./api.js";
import { gapChart } from "./chart.js";
import { SessionLog } from "./log.js";
import { buildPanel, type PanelView } from "./recommend.js";
import { gapByBeta, parseSweepCsv } from "./sweep.js";
import type { InstanceInfo, PolicyName, RecommendResponse } from "./types.js";

const POLICIES: PolicyName[] = ["myopic", "rpr", "two_step", "optimal"];

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  text = "",
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [k, v] of Object.entries(attrs)) node.setAttribute(k, v);
  if (text) node.textContent = text;
  return node;
}

class App {
  client: AdvisorClient;
  info: InstanceInfo | null = null;
  log = new SessionLog();
  lastResponses: Partial<Record<PolicyName, RecommendResponse>> = {};

  constructor(readonly root: HTMLElement, baseUrl: string) {
    this.client = new AdvisorClient(baseUrl);
  }

  banner(message: string) {
    const box = this.root.querySelector("#banner")!;
    box.textContent = message;
    (box as HTMLElement).style.display = message ? "block" : "none";
  }

  async connect() {
    try {
      await this.client.health();
      this.info = await this.client.instance();
      this.banner("");
      this.renderForm();
    } catch (err) {
      this.banner(
        err instanceof ServiceError
          ? `service error: ${err.message}`
          : String(err),
      );
    }
  }

  currentAvailability(): boolean[] {
    return [...this.root.querySelectorAll<HTMLInputElement>(".avail")].map(
      (b) => b.checked,
    );
  }

  renderForm() {
    const info = this.info!;
    const form = this.root.querySelector("#form")!;
    form.textContent = "";
    const typeSel = el("select", { id: "ptype" });
    info.type_labels.forEach((label, i) => {
      const opt = el("option", { value: String(i + 1) }, label);
      typeSel.appendChild(opt);
    });
    form.appendChild(el("label", {}, "patient type "));
    form.appendChild(typeSel);
    const availBox = el("span", { id: "avail" });
    info.facility_labels.forEach((label, i) => {
      const lab = el("label", { class: "fac" }, ` ${label} `);
      const box = el("input", { type: "checkbox", class: "avail", "data-j": String(i + 1) });
      (box as HTMLInputElement).checked = true;
      lab.prepend(box);
      availBox.appendChild(lab);
    });
    form.appendChild(availBox);
    const go = el("button", { id: "go" }, "recommend");
    go.addEventListener("click", () => void this.recommend());
    form.appendChild(go);
  }

  async recommend() {
    const info = this.info!;
    const patient = Number(
      this.root.querySelector<HTMLSelectElement>("#ptype")!.value,
    );
    const availability = this.currentAvailability();
    const panels = this.root.querySelector("#panels")!;
    panels.textContent = "";
    this.lastResponses = {};
    const tags = await this.client.policies().catch(() => POLICIES.slice(0, 3));
    for (const policy of POLICIES) {
      if (!tags.includes(policy)) continue;
      let view: PanelView;
      try {
        const resp = await this.client.recommend({
          patient_type: patient,
          availability,
          policy,
        });
        this.lastResponses[policy] = resp;
        view = buildPanel(resp, availability, info.facility_labels);
      } catch (err) {
        view = { kind: "error", message: (err as Error).message };
        this.banner(
          err instanceof ServiceError && err.status === null
            ? `service unreachable: ${err.message}`
            : "",
        );
      }
      panels.appendChild(this.renderPanel(policy, view));
    }
    this.renderChooser(patient, availability);
  }

  renderPanel(policy: string, view: PanelView): HTMLElement {
    const box = el("div", { class: "panel" });
    box.appendChild(el("h3", {}, policy));
    if (view.kind === "error") {
      box.appendChild(el("p", { class: "error" }, view.message));
      return box;
    }
    if (view.loss) {
      box.appendChild(
        el("p", { class: "loss warn" },
           "no facility can take this patient: loss"),
      );
    } else {
      box.appendChild(
        el("p", { class: "highlight", "data-facility": String(view.action) },
           `send to ${view.facilityLabel}`),
      );
    }
    for (const bar of view.bars) {
      const row = el("div", { class: "bar-row" });
      row.appendChild(el("span", { class: "bar-label" }, bar.label));
      const bg = el("span", { class: "bar-bg" });
      const fill = el("span", {
        class: "bar-fill" + (bar.recommended ? " best" : ""),
        style: `width:${Math.round(10 + 90 * bar.width)}%`,
      });
      bg.appendChild(fill);
      row.appendChild(bg);
      row.appendChild(el("span", { class: "bar-val" }, bar.total.toFixed(3)));
      box.appendChild(row);
    }
    return box;
  }

  renderChooser(patient: number, availability: boolean[]) {
    const info = this.info!;
    const chooser = this.root.querySelector("#chooser")!;
    chooser.textContent = "";
    chooser.appendChild(el("span", {}, "record transfer to: "));
    const options = [0, ...info.facility_labels.map((_, i) => i + 1)].filter(
      (a) => a === 0 || availability[a - 1],
    );
    for (const a of options) {
      const label = a === 0 ? "loss" : info.facility_labels[a - 1]!;
      const btn = el("button", { class: "choose" }, label);
      btn.addEventListener("click", () => {
        const recs: Record<string, number> = {};
        for (const [p, r] of Object.entries(this.lastResponses)) {
          recs[p] = (r as RecommendResponse).action;
        }
        this.log.record({
          patientType: patient,
          availability,
          recommendations: recs,
          chosenAction: a,
          activePolicy: "myopic",
        });
        this.renderLog();
      });
      chooser.appendChild(btn);
    }
  }

  renderLog() {
    const box = this.root.querySelector("#log")!;
    box.textContent = `${this.log.all().length} transfers recorded`;
  }

  wireSweep() {
    const input = this.root.querySelector<HTMLInputElement>("#csv")!;
    input.addEventListener("change", () => {
      const file = input.files?.[0];
      if (!file) return;
      void file.text().then((text) => {
        const parsed = parseSweepCsv(text);
        const errBox = this.root.querySelector("#csv-errors")!;
        errBox.textContent = parsed.errors
          .map((e) => `line ${e.line}: ${e.message}`)
          .join("\n");
        const chart = gapChart(gapByBeta(parsed.rows));
        const svgBox = this.root.querySelector("#chart")!;
        if (chart.empty) {
          svgBox.textContent = parsed.rows.length === 0 ? "no data rows" : "";
          return;
        }
        const svg =
          `<svg width="${chart.width}" height="${chart.height}">` +
          chart.paths
            .map(
              (p) =>
                `<path d="${p.d}" fill="none" stroke="${p.color}" stroke-width="2"><title>${p.heuristic}</title></path>`,
            )
            .join("") +
          `</svg>`;
        svgBox.innerHTML = svg;
      });
    });
  }

  wireExport() {
    this.root.querySelector("#export")!.addEventListener("click", () => {
      const blob = new Blob([this.log.toCsv()], { type: "text/csv" });
      const a = el("a", {
        href: URL.createObjectURL(blob),
        download: "session-log.csv",
      });
      a.click();
    });
  }
}

export function start(root: HTMLElement, baseUrl: string) {
  const app = new App(root, baseUrl);
  void app.connect();
  app.wireSweep();
  app.wireExport();
  return app;
}

if (typeof document !== "undefined" && document.getElementById("app")) {
  const params = new URLSearchParams(window.location.search);
  start(
    document.getElementById("app")!,
    params.get("service") ?? "http://127.0.0.1:8000",
  );
}
