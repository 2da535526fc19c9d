/** Spider (radar) chart of the 6 mixture ratios with draggable axes and an
 *  optional sensitivity overlay (sum-zero tangent, signed arrows per axis). */

export interface SpiderAxis {
  dim: number;
  label: string;
  /** ratio displayed, verbatim from the server response */
  value: number;
  angle: number;       // radians, axis direction
  x: number;           // chart-space tip of the value polygon vertex
  y: number;
  /** signed sensitivity overlay; present only while an output row is hovered */
  arrow?: { length: number; sign: 1 | -1 };
}

export interface SpiderModel {
  axes: SpiderAxis[];
  /** displayed ratio sum; the server keeps this at 1 */
  total: number;
  polygon: Array<[number, number]>;
}

export function spiderModel(
  mixture: number[],
  labels: string[],
  radius = 100,
  tangent?: number[],
): SpiderModel {
  if (mixture.length !== 6) throw new Error(`spider chart needs 6 ratios, got ${mixture.length}`);
  const maxAbs = tangent ? Math.max(...tangent.map(Math.abs), 1e-300) : 1;
  const axes: SpiderAxis[] = mixture.map((value, dim) => {
    const angle = -Math.PI / 2 + (2 * Math.PI * dim) / 6;
    const axis: SpiderAxis = {
      dim,
      label: labels[dim] ?? `dim ${dim}`,
      value,
      angle,
      x: Math.cos(angle) * value * radius,
      y: Math.sin(angle) * value * radius,
    };
    if (tangent) {
      const t = tangent[dim];
      axis.arrow = {
        length: (Math.abs(t) / maxAbs) * radius * 0.35,
        sign: t >= 0 ? 1 : -1,
      };
    }
    return axis;
  });
  return {
    axes,
    total: mixture.reduce((acc, v) => acc + v, 0),
    polygon: axes.map((a) => [a.x, a.y]),
  };
}

/** Map a pointer position on an axis back to the ratio a drag requests. */
export function dragToValue(distanceAlongAxis: number, radius = 100): number {
  return Math.min(1, Math.max(0, distanceAlongAxis / radius));
}
