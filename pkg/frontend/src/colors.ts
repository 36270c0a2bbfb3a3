/** Display-side CIE Lab math for the ab color wheel and previews.
 *
 * Chrominance is exchanged with the server in normalized units: a and b map
 * affinely from [-128, 127] to [0, 1]; luminance is L/100.
 */

export const NEUTRAL_AB = 128 / 255;

const WHITE = [0.95047, 1.0, 1.08883];

function labFInv(ft: number): number {
  const d = 6 / 29;
  return ft > d ? ft * ft * ft : 3 * d * d * (ft - 4 / 29);
}

function linearToSrgb(c: number): number {
  const v = Math.max(0, c);
  return v <= 0.0031308 ? v * 12.92 : 1.055 * Math.pow(v, 1 / 2.4) - 0.055;
}

/** Normalized (L, a, b) in [0,1] to sRGB in [0,1], clamped to gamut. */
export function labToRgb(lNorm: number, aNorm: number, bNorm: number): [number, number, number] {
  const L = lNorm * 100;
  const a = aNorm * 255 - 128;
  const b = bNorm * 255 - 128;
  const fy = (L + 16) / 116;
  const fx = fy + a / 500;
  const fz = fy - b / 200;
  const x = labFInv(fx) * WHITE[0];
  const y = labFInv(fy) * WHITE[1];
  const z = labFInv(fz) * WHITE[2];
  const rl = 3.2404542 * x - 1.5371385 * y - 0.4985314 * z;
  const gl = -0.969266 * x + 1.8760108 * y + 0.041556 * z;
  const bl = 0.0556434 * x - 0.2040259 * y + 1.0572252 * z;
  return [
    Math.min(1, Math.max(0, linearToSrgb(rl))),
    Math.min(1, Math.max(0, linearToSrgb(gl))),
    Math.min(1, Math.max(0, linearToSrgb(bl))),
  ];
}

/** css rgb() string for a normalized ab pair at a fixed display luminance. */
export function abToCss(aNorm: number, bNorm: number, lNorm = 0.65): string {
  const [r, g, b] = labToRgb(lNorm, aNorm, bNorm);
  return `rgb(${Math.round(r * 255)}, ${Math.round(g * 255)}, ${Math.round(b * 255)})`;
}

/** Wheel position (unit disc coords in [-1,1]) to a normalized ab pair. */
export function wheelToAb(u: number, v: number, radius = 0.45): { a: number; b: number } {
  const r = Math.hypot(u, v);
  const scale = r > 1 ? 1 / r : 1;
  return {
    a: NEUTRAL_AB + u * scale * radius,
    b: NEUTRAL_AB + v * scale * radius,
  };
}
