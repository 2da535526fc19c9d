/** Interpolation view: the lambda axis with step previews and a grid of
 *  sparkline small multiples, one per output dimension.
 *
 *  By default the 8 dimensions with the largest relative change along the
 *  path are shown; expanding reveals all 64. Predicted series come from the
 *  path response; snapped (real) series are joined from /api/point lookups of
 *  the snapped ids. */

import type { PathStep } from "../types.js";

export const DEFAULT_SPARKLINES = 8;

export interface Sparkline {
  outputIndex: number;
  name: string;
  /** predicted y*[j] per step, verbatim */
  values: number[];
  /** outputs of the snapped records per step, verbatim (when provided) */
  snapped?: number[];
  relativeChange: number;
}

export interface LambdaTick {
  index: number;
  lambda: number;
  snappedId: number;
}

export interface InterpolationModel {
  sparklines: Sparkline[];
  ticks: LambdaTick[];
  /** axis endpoint labels; lambda=1 is the source x0, lambda=0 the target x1 */
  leftLabel: string;
  rightLabel: string;
  vertexCount: number;
  expanded: boolean;
}

export function interpolationModel(
  path: PathStep[],
  outputNames: string[],
  snappedOutputsById?: Map<number, number[]>,
  expanded = false,
): InterpolationModel {
  if (path.length === 0) throw new Error("interpolation view needs a non-empty path");
  const nOut = path[0].predicted.length;
  const sparklines: Sparkline[] = [];
  for (let j = 0; j < nOut; j++) {
    const values = path.map((s) => s.predicted[j]);
    const lo = Math.min(...values);
    const hi = Math.max(...values);
    const scale = Math.max(Math.abs(lo), Math.abs(hi), 1e-12);
    const line: Sparkline = {
      outputIndex: j,
      name: outputNames[j] ?? `out ${j}`,
      values,
      relativeChange: (hi - lo) / scale,
    };
    if (snappedOutputsById) {
      const snapped = path.map((s) => snappedOutputsById.get(s.snapped_id)?.[j]);
      if (snapped.every((v) => v !== undefined)) {
        line.snapped = snapped as number[];
      }
    }
    sparklines.push(line);
  }
  sparklines.sort((a, b) =>
    b.relativeChange - a.relativeChange || a.outputIndex - b.outputIndex);
  const visible = expanded ? sparklines : sparklines.slice(0, DEFAULT_SPARKLINES);
  return {
    sparklines: visible,
    ticks: path.map((s, index) => ({ index, lambda: s.lambda, snappedId: s.snapped_id })),
    leftLabel: "x0 (lambda = 1)",
    rightLabel: "x1 (lambda = 0)",
    vertexCount: path.length,
    expanded,
  };
}

/** Points of one sparkline in unit coordinates (x right, y up, both 0..1). */
export function sparklinePoints(line: Sparkline): Array<[number, number]> {
  const lo = Math.min(...line.values);
  const hi = Math.max(...line.values);
  const span = hi - lo || 1;
  const n = line.values.length;
  return line.values.map((v, i) => [
    n === 1 ? 0 : i / (n - 1),
    (v - lo) / span,
  ]);
}
