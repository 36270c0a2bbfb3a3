import { describe, expect, it } from "vitest";

import { labToRgb, NEUTRAL_AB, wheelToAb } from "../src/colors.js";

describe("display color math", () => {
  it("neutral ab renders as gray", () => {
    const [r, g, b] = labToRgb(0.5, NEUTRAL_AB, NEUTRAL_AB);
    expect(Math.abs(r - g)).toBeLessThan(1e-3);
    expect(Math.abs(g - b)).toBeLessThan(1e-3);
  });

  it("white point maps to white", () => {
    const [r, g, b] = labToRgb(1.0, NEUTRAL_AB, NEUTRAL_AB);
    expect(r).toBeCloseTo(1, 2);
    expect(g).toBeCloseTo(1, 2);
    expect(b).toBeCloseTo(1, 2);
  });

  it("positive a leans red, negative a leans green", () => {
    const [rPlus] = labToRgb(0.6, NEUTRAL_AB + 0.2, NEUTRAL_AB);
    const [rMinus, gMinus] = labToRgb(0.6, NEUTRAL_AB - 0.2, NEUTRAL_AB);
    expect(rPlus).toBeGreaterThan(rMinus);
    expect(gMinus).toBeGreaterThan(rMinus);
  });

  it("wheel center is neutral and outside clicks clamp to the rim", () => {
    const center = wheelToAb(0, 0);
    expect(center.a).toBeCloseTo(NEUTRAL_AB, 6);
    expect(center.b).toBeCloseTo(NEUTRAL_AB, 6);
    const rim = wheelToAb(5, 0);
    const rimExact = wheelToAb(1, 0);
    expect(rim.a).toBeCloseTo(rimExact.a, 6);
    expect(rim.a).toBeGreaterThanOrEqual(0);
    expect(rim.a).toBeLessThanOrEqual(1);
  });
});
