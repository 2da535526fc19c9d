/** Output-manifold scatterplot: zoom/pan canvas, similarity shading, and the
 *  interpolation path drawn as a polyline over the snapped points. Rendering
 *  decimates above a visible-point budget; the data itself is never altered. */

import type { PathStep } from "../types.js";

export const LOD_BUDGET = 20000;

export interface ScatterTransform {
  scale: number;
  offsetX: number;
  offsetY: number;
}

export interface ScatterPoint {
  id: number;
  x: number;
  y: number;
  /** 0..1; higher similarity renders lighter */
  lightness: number;
}

export interface PolylineVertex {
  x: number;
  y: number;
  lambda: number;
  snappedId: number;
}

export interface ScatterModel {
  points: ScatterPoint[];
  /** indices actually drawn after level-of-detail decimation */
  drawOrder: number[];
  polyline: PolylineVertex[];
  decimated: boolean;
}

const DEFAULT_LIGHTNESS = 0.25;

/** similarity 1 -> lightest (0.9), similarity 0 -> darkest (0.15) */
export function similarityToLightness(score: number): number {
  return 0.15 + 0.75 * Math.min(1, Math.max(0, score));
}

export function scatterModel(
  ids: number[],
  xy: number[][],
  similarity?: Map<number, number>,
  path?: PathStep[] | null,
  budget = LOD_BUDGET,
): ScatterModel {
  const points: ScatterPoint[] = ids.map((id, i) => ({
    id,
    x: xy[i][0],
    y: xy[i][1],
    lightness: similarity !== undefined && similarity.has(id)
      ? similarityToLightness(similarity.get(id)!)
      : DEFAULT_LIGHTNESS,
  }));
  let drawOrder: number[];
  let decimated = false;
  if (points.length > budget) {
    // deterministic stride decimation keeps the spatial distribution intact
    decimated = true;
    const stride = points.length / budget;
    drawOrder = [];
    for (let k = 0; k < budget; k++) drawOrder.push(Math.floor(k * stride));
  } else {
    drawOrder = points.map((_, i) => i);
  }
  const polyline: PolylineVertex[] = (path ?? []).map((step) => ({
    x: step.embed_xy[0],
    y: step.embed_xy[1],
    lambda: step.lambda,
    snappedId: step.snapped_id,
  }));
  return { points, drawOrder, polyline, decimated };
}

/** Minimal 2D-context surface the renderer needs; tests pass a recorder. */
export interface Canvas2D {
  clearRect(x: number, y: number, w: number, h: number): void;
  beginPath(): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  stroke(): void;
  fillRect(x: number, y: number, w: number, h: number): void;
  fillStyle: string | CanvasGradient | CanvasPattern;
  strokeStyle: string | CanvasGradient | CanvasPattern;
  lineWidth: number;
}

export function renderScatter(
  ctx: Canvas2D,
  model: ScatterModel,
  width: number,
  height: number,
  transform: ScatterTransform,
): { drawnPoints: number; polylineVertices: number } {
  ctx.clearRect(0, 0, width, height);
  const px = (x: number) => width / 2 + (x - transform.offsetX) * transform.scale;
  const py = (y: number) => height / 2 + (y - transform.offsetY) * transform.scale;
  let drawn = 0;
  for (const i of model.drawOrder) {
    const p = model.points[i];
    const light = Math.round(p.lightness * 100);
    ctx.fillStyle = `hsl(210 60% ${light}%)`;
    ctx.fillRect(px(p.x) - 1, py(p.y) - 1, 2, 2);
    drawn += 1;
  }
  if (model.polyline.length > 0) {
    ctx.strokeStyle = "hsl(20 90% 55%)";
    ctx.lineWidth = 1.5;
    ctx.beginPath();
    ctx.moveTo(px(model.polyline[0].x), py(model.polyline[0].y));
    for (let i = 1; i < model.polyline.length; i++) {
      ctx.lineTo(px(model.polyline[i].x), py(model.polyline[i].y));
    }
    ctx.stroke();
  }
  return { drawnPoints: drawn, polylineVertices: model.polyline.length };
}

export function fitTransform(xy: number[][], width: number, height: number): ScatterTransform {
  if (xy.length === 0) return { scale: 1, offsetX: 0, offsetY: 0 };
  let minX = Infinity, maxX = -Infinity, minY = Infinity, maxY = -Infinity;
  for (const [x, y] of xy) {
    if (x < minX) minX = x;
    if (x > maxX) maxX = x;
    if (y < minY) minY = y;
    if (y > maxY) maxY = y;
  }
  const spanX = Math.max(maxX - minX, 1e-9);
  const spanY = Math.max(maxY - minY, 1e-9);
  return {
    scale: 0.9 * Math.min(width / spanX, height / spanY),
    offsetX: (minX + maxX) / 2,
    offsetY: (minY + maxY) / 2,
  };
}

/** Nearest data point to a canvas position, for hover-reveal and free picks. */
export function hitTest(
  model: ScatterModel,
  canvasX: number,
  canvasY: number,
  width: number,
  height: number,
  transform: ScatterTransform,
  tolerancePx = 6,
): number | null {
  let best: number | null = null;
  let bestD = tolerancePx * tolerancePx;
  for (const p of model.points) {
    const dx = width / 2 + (p.x - transform.offsetX) * transform.scale - canvasX;
    const dy = height / 2 + (p.y - transform.offsetY) * transform.scale - canvasY;
    const d = dx * dx + dy * dy;
    if (d < bestD || (d === bestD && best !== null && p.id < best)) {
      best = p.id;
      bestD = d;
    }
  }
  return best;
}
