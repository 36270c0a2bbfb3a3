/** Stroke model: freehand strokes decimate to at most 40 scribble points; the
 * server's rasterizer is the single source of truth for scribble geometry. */

export const POINT_BUDGET = 40;

export interface AbColor {
  a: number;
  b: number;
}

export interface Stroke {
  /** processing-resolution coordinates along the stroke */
  points: Array<{ x: number; y: number }>;
  color: AbColor;
  radius: number;
}

export interface ScribblePoint {
  x: number;
  y: number;
  a: number;
  b: number;
}

export interface ScribblePayload {
  resolution: [number, number]; // [H, W]
  radius: number;
  points: ScribblePoint[];
}

function strokeLength(stroke: Stroke): number {
  let len = 0;
  for (let i = 1; i < stroke.points.length; i++) {
    len += Math.hypot(
      stroke.points[i].x - stroke.points[i - 1].x,
      stroke.points[i].y - stroke.points[i - 1].y,
    );
  }
  return len;
}

/** Pick up to `budget` points uniformly along the stroke's length. */
export function decimateStroke(stroke: Stroke, budget: number): ScribblePoint[] {
  if (budget <= 0 || stroke.points.length === 0) return [];
  const raw = stroke.points;
  if (raw.length === 1 || budget === 1 || strokeLength(stroke) === 0) {
    const p = raw[0];
    return [{ x: p.x, y: p.y, a: stroke.color.a, b: stroke.color.b }];
  }
  const count = Math.min(budget, raw.length);
  const out: ScribblePoint[] = [];
  const seen = new Set<string>();
  for (let k = 0; k < count; k++) {
    const idx = Math.round((k * (raw.length - 1)) / (count - 1));
    const p = raw[idx];
    const key = `${p.x},${p.y}`;
    if (seen.has(key)) continue;
    seen.add(key);
    out.push({ x: p.x, y: p.y, a: stroke.color.a, b: stroke.color.b });
  }
  return out;
}

/** Decimate every stroke in order, truncating once the shared budget is spent. */
export function strokesToPoints(strokes: Stroke[], budget = POINT_BUDGET): ScribblePoint[] {
  const out: ScribblePoint[] = [];
  for (const stroke of strokes) {
    const remaining = budget - out.length;
    if (remaining <= 0) break;
    const per = Math.max(1, Math.min(remaining, Math.ceil(strokeLength(stroke) / 8) + 1));
    out.push(...decimateStroke(stroke, Math.min(per, remaining)));
  }
  return out.slice(0, budget);
}

export function serializeScribbles(
  strokes: Stroke[],
  processingHeight: number,
  processingWidth: number,
  radius = 2,
): ScribblePayload {
  return {
    resolution: [processingHeight, processingWidth],
    radius,
    points: strokesToPoints(strokes),
  };
}

/** Mirror of the server-side schema check; returns the first problem found. */
export function validatePayload(payload: ScribblePayload): string | null {
  const [h, w] = payload.resolution;
  if (!Number.isInteger(h) || !Number.isInteger(w) || h <= 0 || w <= 0) {
    return `bad resolution [${payload.resolution}]`;
  }
  if (payload.points.length > POINT_BUDGET) {
    return `${payload.points.length} points exceed the ${POINT_BUDGET}-point budget`;
  }
  for (let i = 0; i < payload.points.length; i++) {
    const p = payload.points[i];
    if (!Number.isInteger(p.x) || !Number.isInteger(p.y) || p.x < 0 || p.x >= w || p.y < 0 || p.y >= h) {
      return `point ${i}: (${p.x}, ${p.y}) outside resolution ${h}x${w}`;
    }
    if (!(p.a >= 0 && p.a <= 1 && p.b >= 0 && p.b <= 1)) {
      return `point ${i}: chrominance (${p.a}, ${p.b}) outside [0, 1]`;
    }
  }
  return null;
}
