// View model for the recommendation panel.
//
// The panel renders exactly what the service returned; the only client-side
// logic is a feasibility guard (a recommendation for a facility the operator
// did not mark available is rendered as an error, never as a highlight) and
// score-bar scaling.

import type { Explanation, RecommendResponse } from "./types.js";

export interface ScoreBar {
  action: number;
  label: string;
  total: number;
  // bar width in [0, 1], shortest bar = best action
  width: number;
  recommended: boolean;
}

export interface RecommendView {
  kind: "recommendation";
  policy: string;
  action: number;
  facilityLabel: string;
  loss: boolean;
  bars: ScoreBar[];
}

export interface ErrorView {
  kind: "error";
  message: string;
}

export type PanelView = RecommendView | ErrorView;

/** Availability of a real facility (1-based index) in the current form. */
export function isAvailable(availability: boolean[], action: number): boolean {
  if (action === 0) return true; // the loss sink is always available
  const bit = availability[action - 1];
  return bit === true;
}

function scoreTable(expl: Explanation, policy: string): Map<number, number> {
  const totals = new Map<number, number>();
  if (policy === "optimal" && expl.optimality) {
    for (const [a, v] of Object.entries(expl.optimality)) totals.set(Number(a), v);
  } else if (policy === "myopic") {
    for (const [a, v] of Object.entries(expl.myopic)) totals.set(Number(a), v);
  } else {
    for (const [a, sb] of Object.entries(expl.rpr)) totals.set(Number(a), sb.total);
  }
  return totals;
}

export function buildPanel(
  response: RecommendResponse,
  availability: boolean[],
  facilityLabels: string[],
): PanelView {
  if (!isAvailable(availability, response.action)) {
    return {
      kind: "error",
      message:
        `service recommended facility ${response.action} which is not ` +
        "available in the current form; refusing to display it",
    };
  }
  const totals = scoreTable(response.explanation, response.policy);
  const values = [...totals.values()];
  const lo = Math.min(...values);
  const hi = Math.max(...values);
  const span = hi - lo;
  const bars: ScoreBar[] = [...totals.entries()]
    .sort((a, b) => a[0] - b[0])
    .map(([action, total]) => ({
      action,
      label: action === 0 ? "loss" : (facilityLabels[action - 1] ?? String(action)),
      total,
      width: span > 0 ? (total - lo) / span : 0,
      recommended: action === response.action,
    }));
  return {
    kind: "recommendation",
    policy: response.policy,
    action: response.action,
    facilityLabel: response.facility,
    loss: response.loss,
    bars,
  };
}

/** Facilities the panel may highlight: the recommended action only, and only
 * when feasible.  Used by tests to assert the no-infeasible-highlight rule. */
export function highlightedFacilities(view: PanelView): number[] {
  if (view.kind !== "recommendation" || view.loss) return [];
  return [view.action];
}
