import { describe, expect, it } from "vitest";

import {
  BOUNDS_H,
  BOUNDS_W,
  INSET,
  LANE_HALF_WIDTH,
  centerline,
  innerEdge,
  loopPolyline,
  outerEdge,
} from "../src/trackGeometry.js";

describe("track geometry for rendering", () => {
  it("keeps every loop inside the published bounds", () => {
    for (const pts of [centerline(), innerEdge(), outerEdge()]) {
      for (const [x, y] of pts) {
        expect(x).toBeGreaterThanOrEqual(0);
        expect(x).toBeLessThanOrEqual(BOUNDS_W);
        expect(y).toBeGreaterThanOrEqual(0);
        expect(y).toBeLessThanOrEqual(BOUNDS_H);
      }
    }
  });

  it("offsets the straight sides by the lane half-width", () => {
    // Bottom-straight points sit at y = INSET -/+ LANE_HALF_WIDTH.
    const bottomOf = (pts: [number, number][]) =>
      Math.min(...pts.map(([, y]) => y));
    expect(bottomOf(centerline())).toBeCloseTo(INSET, 10);
    expect(bottomOf(outerEdge())).toBeCloseTo(INSET - LANE_HALF_WIDTH, 10);
    expect(bottomOf(innerEdge())).toBeCloseTo(INSET + LANE_HALF_WIDTH, 10);
  });

  it("produces a closed convex-ish loop with no duplicate endpoint", () => {
    const pts = loopPolyline(0);
    const [x0, y0] = pts[0];
    const [xn, yn] = pts[pts.length - 1];
    expect(Math.hypot(xn - x0, yn - y0)).toBeGreaterThan(1e-6);
    expect(pts.length).toBeGreaterThan(50);
  });
});
