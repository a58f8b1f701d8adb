"""Closed-loop track geometry: nearest-point queries, signed lateral offset,
arc-length progress, and lane-edge raycasts.

The track is a closed polyline centerline with a constant lane half-width.
Lane edges are the left/right offset polylines of the centerline; everything
downstream (reward distance, off-track detection, rangefinder rays) is
answered from this module.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import tempfile
from dataclasses import dataclass

import numpy as np

# Default playfield: 9 ft x 6 ft in meters.
DEFAULT_BOUNDS = (2.74, 1.83)
DEFAULT_LANE_HALF_WIDTH = 0.10
DEFAULT_CORNER_RADIUS = 0.20
DEFAULT_INSET = 0.25

TRACK_FORMAT_VERSION = 1


class TrackError(ValueError):
    """Invalid track geometry or serialization payload."""


@dataclass(frozen=True)
class TrackQuery:
    """Result of projecting a point onto the track centerline."""

    nearest_point: np.ndarray  # (2,)
    arc_position: float        # meters along centerline, [0, total_length)
    lateral_offset: float      # signed meters, left of travel direction positive
    dist_to_edge: float        # lane_half_width - |lateral_offset|; negative outside


class TrackSpec:
    """Immutable closed-polyline track with precomputed segment caches.

    ``centerline`` is an (N, 2) array of vertices; the polyline closes
    implicitly from the last vertex back to the first (no duplicated
    endpoint stored).
    """

    def __init__(self, centerline, lane_half_width, bounds):
        pts = np.asarray(centerline, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 4:
            raise TrackError("centerline must be an (N, 2) array with N >= 4")
        if not np.all(np.isfinite(pts)):
            raise TrackError("centerline contains non-finite coordinates")
        if np.allclose(pts[0], pts[-1]):
            raise TrackError("centerline must not store a duplicated closing vertex")
        if lane_half_width <= 0:
            raise TrackError("lane_half_width must be positive")
        w, h = float(bounds[0]), float(bounds[1])
        if w <= 0 or h <= 0:
            raise TrackError("bounds must be positive")
        margin = lane_half_width - 1e-12
        if (np.any(pts[:, 0] < margin) or np.any(pts[:, 0] > w - margin)
                or np.any(pts[:, 1] < margin) or np.any(pts[:, 1] > h - margin)):
            raise TrackError("centerline closer than lane_half_width to bounds")

        self.centerline = pts
        self.centerline.setflags(write=False)
        self.lane_half_width = float(lane_half_width)
        self.bounds = (w, h)

        # Segment caches: segment i runs pts[i] -> pts[(i+1) % N].
        self._a = pts
        self._b = np.roll(pts, -1, axis=0)
        self._d = self._b - self._a
        self._seg_len = np.linalg.norm(self._d, axis=1)
        if np.any(self._seg_len < 1e-12):
            raise TrackError("degenerate (zero-length) centerline segment")
        self._tangent = self._d / self._seg_len[:, None]
        self._cum_len = np.concatenate(([0.0], np.cumsum(self._seg_len)))
        self.total_length = float(self._cum_len[-1])

        self._left_edge = _offset_polyline(pts, self._tangent, +self.lane_half_width)
        self._right_edge = _offset_polyline(pts, self._tangent, -self.lane_half_width)
        # All edge segments stacked for raycasting: (2N, 2) starts and vectors.
        ea = np.vstack([self._left_edge, self._right_edge])
        eb = np.vstack([np.roll(self._left_edge, -1, axis=0),
                        np.roll(self._right_edge, -1, axis=0)])
        self._edge_a = ea
        self._edge_d = eb - ea

    def edge_polylines(self):
        """(left, right) edge vertex arrays, each (N, 2), closed implicitly."""
        return self._left_edge.copy(), self._right_edge.copy()

    def point_at(self, arc_position):
        """Centerline point at a given arc position (wraps)."""
        s = float(arc_position) % self.total_length
        i = int(np.searchsorted(self._cum_len, s, side="right")) - 1
        i = min(i, len(self._seg_len) - 1)
        t = (s - self._cum_len[i]) / self._seg_len[i]
        return self._a[i] + t * self._d[i]

    def tangent_at(self, arc_position):
        """Unit tangent (direction of travel) at a given arc position."""
        s = float(arc_position) % self.total_length
        i = int(np.searchsorted(self._cum_len, s, side="right")) - 1
        i = min(i, len(self._seg_len) - 1)
        return self._tangent[i]

    def heading_at(self, arc_position):
        t = self.tangent_at(arc_position)
        return math.atan2(t[1], t[0])

    def to_json_dict(self):
        return {
            "format_version": TRACK_FORMAT_VERSION,
            "centerline": [[float(x), float(y)] for x, y in self.centerline],
            "lane_half_width": self.lane_half_width,
            "bounds": [self.bounds[0], self.bounds[1]],
        }

    @classmethod
    def from_json_dict(cls, doc):
        try:
            return cls(doc["centerline"], doc["lane_half_width"], doc["bounds"])
        except (KeyError, TypeError) as exc:
            raise TrackError(f"malformed track document: {exc}") from exc

    def save(self, path):
        tmp_fd, tmp_path = tempfile.mkstemp(dir=os.path.dirname(os.path.abspath(path)) or ".")
        try:
            with os.fdopen(tmp_fd, "w") as fh:
                json.dump(self.to_json_dict(), fh)
            os.replace(tmp_path, path)
        except BaseException:
            if os.path.exists(tmp_path):
                os.unlink(tmp_path)
            raise

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as exc:
                raise TrackError(f"invalid track file {path}: {exc}") from exc
        return cls.from_json_dict(doc)

    def hash(self):
        """Stable hash of the geometry, used to bind datasets to a track."""
        payload = json.dumps(self.to_json_dict(), sort_keys=True).encode()
        return hashlib.sha256(payload).hexdigest()[:16]


def _offset_polyline(pts, tangents, offset):
    """Offset a closed polyline by ``offset`` along the left normal.

    Uses mitered vertex normals so the offset distance is exact at every
    vertex; with densely sampled corner arcs the chord error is negligible.
    """
    n = len(pts)
    out = np.empty_like(pts)
    for i in range(n):
        t_in = tangents[(i - 1) % n]
        t_out = tangents[i]
        n_in = np.array([-t_in[1], t_in[0]])
        n_out = np.array([-t_out[1], t_out[0]])
        m = n_in + n_out
        norm = np.linalg.norm(m)
        if norm < 1e-9:
            m_unit = n_out
        else:
            m_unit = m / norm
        scale = offset / max(float(np.dot(m_unit, n_out)), 1e-6)
        out[i] = pts[i] + m_unit * scale
    return out


def default_track():
    """Built-in rounded-rectangle loop sized for the 2.74 m x 1.83 m field.

    Four straights joined by four 90-degree arcs (radius 0.20 m), centerline
    inset 0.25 m from the bounds, traversed counter-clockwise. The arc origin
    (first vertex) is the midpoint of the bottom straight, so a vehicle at
    arc position 0 sees symmetric straight-lane geometry in every direction.
    """
    w, h = DEFAULT_BOUNDS
    inset = DEFAULT_INSET
    r = DEFAULT_CORNER_RADIUS
    x0, x1 = inset, w - inset
    y0, y1 = inset, h - inset
    arc_steps = 30

    def arc_interior(cx, cy, a0, a1):
        angles = np.linspace(a0, a1, arc_steps + 1)[1:-1]
        return [(cx + r * math.cos(a), cy + r * math.sin(a)) for a in angles]

    pts = []
    # second half of the bottom straight, then bottom-right corner
    pts += [((x0 + x1) / 2, y0), (x1 - r, y0)]
    pts += arc_interior(x1 - r, y0 + r, -math.pi / 2, 0.0)
    # right straight, top-right corner
    pts += [(x1, y0 + r), (x1, y1 - r)]
    pts += arc_interior(x1 - r, y1 - r, 0.0, math.pi / 2)
    # top straight, top-left corner
    pts += [(x1 - r, y1), (x0 + r, y1)]
    pts += arc_interior(x0 + r, y1 - r, math.pi / 2, math.pi)
    # left straight, bottom-left corner, first half of the bottom straight
    pts += [(x0, y1 - r), (x0, y0 + r)]
    pts += arc_interior(x0 + r, y0 + r, math.pi, 1.5 * math.pi)
    pts += [(x0 + r, y0)]
    return TrackSpec(np.array(pts), DEFAULT_LANE_HALF_WIDTH, DEFAULT_BOUNDS)


def query(track: TrackSpec, p) -> TrackQuery:
    """Project a point onto the centerline.

    Returns the nearest centerline point, its arc position, the signed
    lateral offset (left of travel positive), and the distance to the lane
    edge (negative outside the lane). Ties on the medial axis resolve to the
    smallest arc position.
    """
    p = np.asarray(p, dtype=np.float64)
    if not np.all(np.isfinite(p)):
        raise ValueError("query point must be finite")
    ap = p[None, :] - track._a
    t = np.einsum("ij,ij->i", ap, track._d) / (track._seg_len ** 2)
    t = np.clip(t, 0.0, 1.0)
    proj = track._a + t[:, None] * track._d
    diff = p[None, :] - proj
    d2 = np.einsum("ij,ij->i", diff, diff)
    i = int(np.argmin(d2))  # first minimum -> smallest arc position
    nearest = proj[i]
    dist = math.sqrt(d2[i])
    tan = track._tangent[i]
    cross = tan[0] * (p[1] - nearest[1]) - tan[1] * (p[0] - nearest[0])
    lateral = math.copysign(dist, cross) if dist > 0 else 0.0
    arc = (track._cum_len[i] + t[i] * track._seg_len[i]) % track.total_length
    return TrackQuery(
        nearest_point=nearest.copy(),
        arc_position=float(arc),
        lateral_offset=float(lateral),
        dist_to_edge=float(track.lane_half_width - abs(lateral)),
    )


def progress_delta(track: TrackSpec, a, b):
    """Signed shortest wrap-around arc difference b - a, in (-L/2, L/2]."""
    length = track.total_length
    d = (float(b) - float(a)) % length
    if d > length / 2:
        d -= length
    return d


def raycast_edges(track: TrackSpec, origin, direction, max_range):
    """Distance from ``origin`` along unit ``direction`` to the first lane-edge
    crossing, clamped to ``max_range``."""
    o = np.asarray(origin, dtype=np.float64)
    d = np.asarray(direction, dtype=np.float64)
    ea, ed = track._edge_a, track._edge_d
    # Solve o + t*d = ea + s*ed for each edge segment.
    denom = d[0] * ed[:, 1] - d[1] * ed[:, 0]
    ok = np.abs(denom) > 1e-14
    rel = ea - o[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (rel[:, 0] * ed[:, 1] - rel[:, 1] * ed[:, 0]) / denom
        s = (rel[:, 0] * d[1] - rel[:, 1] * d[0]) / denom
    hit = ok & (t > 1e-9) & (s >= 0.0) & (s <= 1.0)
    if not np.any(hit):
        return float(max_range)
    return float(min(np.min(t[hit]), max_range))
