// Minimal SVG line chart: pure path-string generation so it is testable
// without a DOM.

import type { GapSeries } from "./sweep.js";

export interface ChartSpec {
  width: number;
  height: number;
  paths: { heuristic: string; d: string; color: string }[];
  xLabel: string;
  yLabel: string;
  empty: boolean;
}

const COLORS: Record<string, string> = { myopic: "#c0392b", rpr: "#2980b9" };

export function polylinePath(
  points: { x: number; y: number }[],
  width: number,
  height: number,
  pad = 30,
): string {
  if (points.length === 0) return "";
  const xs = points.map((p) => p.x);
  const ys = points.map((p) => p.y);
  const x0 = Math.min(...xs);
  const x1 = Math.max(...xs);
  const y0 = Math.min(0, ...ys);
  const y1 = Math.max(...ys);
  const sx = (x: number) =>
    x1 > x0 ? pad + ((x - x0) / (x1 - x0)) * (width - 2 * pad) : width / 2;
  const sy = (y: number) =>
    y1 > y0 ? height - pad - ((y - y0) / (y1 - y0)) * (height - 2 * pad) : height / 2;
  return points
    .map((p, i) => `${i === 0 ? "M" : "L"}${sx(p.x).toFixed(1)},${sy(p.y).toFixed(1)}`)
    .join(" ");
}

export function gapChart(series: GapSeries[], width = 560, height = 320): ChartSpec {
  const paths = series
    .filter((s) => s.points.length > 0)
    .map((s) => ({
      heuristic: s.heuristic,
      d: polylinePath(
        s.points.map((p) => ({ x: p.beta, y: p.meanGapPct })),
        width,
        height,
      ),
      color: COLORS[s.heuristic] ?? "#555",
    }));
  return {
    width,
    height,
    paths,
    xLabel: "beta",
    yLabel: "mean gap vs optimal (%)",
    empty: paths.every((p) => p.d === ""),
  };
}
