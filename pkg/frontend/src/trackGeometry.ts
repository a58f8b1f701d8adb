/** Client-side copy of the default track geometry, used only for drawing.
 *
 * The server never streams geometry; the track is a fixed rounded-rectangle
 * loop (2.74 x 1.83 m bounds, 0.25 m inset, 0.20 m corner radius, 0.10 m
 * lane half-width), so the client reconstructs the same centerline and lane
 * edges from those published constants. Rendering only — the simulation's
 * geometry stays authoritative.
 */

export const BOUNDS_W = 2.74;
export const BOUNDS_H = 1.83;
export const INSET = 0.25;
export const CORNER_RADIUS = 0.2;
export const LANE_HALF_WIDTH = 0.1;

export type Point = [number, number];

/** Closed rounded-rectangle loop at ``offset`` meters outward from the
 * centerline (negative = inward), sampled as a polyline. */
export function loopPolyline(offset: number, arcSteps = 24): Point[] {
  const r = CORNER_RADIUS + offset;
  const x0 = INSET;
  const x1 = BOUNDS_W - INSET;
  const y0 = INSET;
  const y1 = BOUNDS_H - INSET;
  const lo = INSET - offset; // straight-edge coordinate on the low sides
  const hiX = BOUNDS_W - lo;
  const hiY = BOUNDS_H - lo;
  const corners: { c: Point; start: number }[] = [
    { c: [x1 - CORNER_RADIUS, y0 + CORNER_RADIUS], start: -Math.PI / 2 },
    { c: [x1 - CORNER_RADIUS, y1 - CORNER_RADIUS], start: 0 },
    { c: [x0 + CORNER_RADIUS, y1 - CORNER_RADIUS], start: Math.PI / 2 },
    { c: [x0 + CORNER_RADIUS, y0 + CORNER_RADIUS], start: Math.PI },
  ];
  const pts: Point[] = [];
  // Straights and arcs interleaved, counter-clockwise from the bottom side.
  const straights: [Point, Point][] = [
    [[x0 + CORNER_RADIUS, lo], [x1 - CORNER_RADIUS, lo]],
    [[hiX, y0 + CORNER_RADIUS], [hiX, y1 - CORNER_RADIUS]],
    [[x1 - CORNER_RADIUS, hiY], [x0 + CORNER_RADIUS, hiY]],
    [[lo, y1 - CORNER_RADIUS], [lo, y0 + CORNER_RADIUS]],
  ];
  for (let side = 0; side < 4; side++) {
    pts.push(straights[side][0], straights[side][1]);
    const { c, start } = corners[side];
    for (let i = 1; i < arcSteps; i++) {
      const a = start + ((Math.PI / 2) * i) / arcSteps;
      pts.push([c[0] + r * Math.cos(a), c[1] + r * Math.sin(a)]);
    }
  }
  return pts;
}

export function centerline(): Point[] {
  return loopPolyline(0);
}

export function outerEdge(): Point[] {
  return loopPolyline(LANE_HALF_WIDTH);
}

export function innerEdge(): Point[] {
  return loopPolyline(-LANE_HALF_WIDTH);
}
