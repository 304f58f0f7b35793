// Parse and aggregate sweep CSVs written by the command-line tool.
// Parsing is strict: every malformed row is reported with its line number.

import type { SweepRow } from "./types.js";

export const SWEEP_HEADER = [
  "instance_id", "seed", "scenario", "beta", "gamma", "delta", "K",
  "g_opt", "g_myopic", "g_rpr", "gap_myopic_pct", "gap_rpr_pct",
] as const;

export interface RowError {
  line: number;
  message: string;
}

export interface ParsedSweep {
  rows: SweepRow[];
  errors: RowError[];
}

function num(field: string, value: string): number {
  const v = Number(value);
  if (value === "" || !Number.isFinite(v)) {
    throw new Error(`${field}: not a number (${JSON.stringify(value)})`);
  }
  return v;
}

function optionalNum(field: string, value: string): number | null {
  return value === "" ? null : num(field, value);
}

export function parseSweepCsv(text: string): ParsedSweep {
  const lines = text.split(/\r?\n/).filter((l) => l.length > 0);
  if (lines.length === 0) {
    return { rows: [], errors: [{ line: 0, message: "empty file" }] };
  }
  const header = (lines[0] ?? "").split(",");
  if (header.join(",") !== SWEEP_HEADER.join(",")) {
    return {
      rows: [],
      errors: [{ line: 1, message: `unexpected header: ${lines[0]}` }],
    };
  }
  const rows: SweepRow[] = [];
  const errors: RowError[] = [];
  for (let i = 1; i < lines.length; i++) {
    const parts = (lines[i] ?? "").split(",");
    if (parts.length !== SWEEP_HEADER.length) {
      errors.push({
        line: i + 1,
        message: `expected ${SWEEP_HEADER.length} fields, got ${parts.length}`,
      });
      continue;
    }
    const p = parts as string[];
    try {
      rows.push({
        instance_id: num("instance_id", p[0]!),
        seed: p[1]!,
        scenario: num("scenario", p[2]!),
        beta: num("beta", p[3]!),
        gamma: optionalNum("gamma", p[4]!),
        delta: optionalNum("delta", p[5]!),
        K: num("K", p[6]!),
        g_opt: num("g_opt", p[7]!),
        g_myopic: num("g_myopic", p[8]!),
        g_rpr: num("g_rpr", p[9]!),
        gap_myopic_pct: num("gap_myopic_pct", p[10]!),
        gap_rpr_pct: num("gap_rpr_pct", p[11]!),
      });
    } catch (err) {
      errors.push({ line: i + 1, message: (err as Error).message });
    }
  }
  return { rows, errors };
}

export interface GapSeries {
  heuristic: "myopic" | "rpr";
  // sorted by beta ascending
  points: { beta: number; meanGapPct: number; n: number }[];
}

/** Mean relative gap per beta value for each heuristic (no re-solving:
 * pure aggregation of what the CSV already carries). */
export function gapByBeta(rows: SweepRow[]): GapSeries[] {
  const buckets = new Map<number, { myo: number[]; rpr: number[] }>();
  for (const r of rows) {
    let b = buckets.get(r.beta);
    if (!b) {
      b = { myo: [], rpr: [] };
      buckets.set(r.beta, b);
    }
    b.myo.push(r.gap_myopic_pct);
    b.rpr.push(r.gap_rpr_pct);
  }
  const betas = [...buckets.keys()].sort((a, b) => a - b);
  const mean = (xs: number[]) => xs.reduce((s, x) => s + x, 0) / xs.length;
  return [
    {
      heuristic: "myopic",
      points: betas.map((beta) => {
        const b = buckets.get(beta)!;
        return { beta, meanGapPct: mean(b.myo), n: b.myo.length };
      }),
    },
    {
      heuristic: "rpr",
      points: betas.map((beta) => {
        const b = buckets.get(beta)!;
        return { beta, meanGapPct: mean(b.rpr), n: b.rpr.length };
      }),
    },
  ];
}
