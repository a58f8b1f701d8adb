"""Independent reference implementations used to check the package:
dense edge sampling for distances, ray marching for the rangefinder,
high-resolution RK4 integration for the kinematics, and central finite
differences for gradients. None of these call the code paths they verify.
"""

import math

import numpy as np

from demodrive import nn, track


def dense_default_edges(spacing=0.001):
    """Analytic lane edges of the built-in track, sampled every ``spacing``
    meters: straights at the exact offsets, corner arcs at radii r +- hw.

    Built directly from the documented geometry (2.74 x 1.83 bounds, 0.25
    inset, 0.20 corner radius, 0.10 half-width), not from TrackSpec.
    """
    w, h = 2.74, 1.83
    inset, r, hw = 0.25, 0.20, 0.10
    x0, x1 = inset, w - inset
    y0, y1 = inset, h - inset
    centers = [(x1 - r, y0 + r), (x1 - r, y1 - r), (x0 + r, y1 - r), (x0 + r, y0 + r)]
    start_angles = [-math.pi / 2, 0.0, math.pi / 2, math.pi]

    pts = []

    def straight(p, q):
        p, q = np.array(p), np.array(q)
        n = max(2, int(np.linalg.norm(q - p) / spacing))
        for t in np.linspace(0.0, 1.0, n):
            pts.append(p + t * (q - p))

    def arc(c, radius, a0):
        n = max(2, int(radius * math.pi / 2 / spacing))
        for a in np.linspace(a0, a0 + math.pi / 2, n):
            pts.append(np.array([c[0] + radius * math.cos(a),
                                 c[1] + radius * math.sin(a)]))

    for radius, d in ((r - hw, inset + hw),   # inner edge
                      (r + hw, inset - hw)):  # outer edge
        straight((x0 + r, d), (x1 - r, d))                  # bottom
        straight((w - d, y0 + r), (w - d, y1 - r))          # right
        straight((x1 - r, h - d), (x0 + r, h - d))          # top
        straight((d, y1 - r), (d, y0 + r))                  # left
        for c, a0 in zip(centers, start_angles):
            arc(c, radius, a0)
    return np.array(pts)


def min_dist_to_points(p, edge_pts):
    return float(np.min(np.linalg.norm(edge_pts - np.asarray(p)[None, :], axis=1)))


def ray_march_distance(trk, origin, heading, angle, max_range=0.5, step=1e-3,
                       tol=1e-7):
    """First lane-edge crossing along the ray: march the inside/outside sign
    from track.query at ``step`` resolution, then bisect the bracketing
    interval down to ``tol``."""
    a = heading + angle
    d = np.array([math.cos(a), math.sin(a)])
    o = np.asarray(origin, dtype=float)

    def inside(t):
        return track.query(trk, o + t * d).dist_to_edge >= 0.0

    prev = inside(0.0)
    lo = 0.0
    t = step
    while t <= max_range + step / 2:
        t = min(t, max_range)
        if inside(t) != prev:
            hi = t
            while hi - lo > tol:
                mid = (lo + hi) / 2
                if inside(mid) == prev:
                    lo = mid
                else:
                    hi = mid
            return (lo + hi) / 2
        lo = t
        if t >= max_range:
            break
        t += step
    return max_range


def rk4_unicycle(x0, y0, h0, v, w, duration, dt=1e-4):
    """4th-order integration of x' = v cos h, y' = v sin h, h' = w."""
    def deriv(state):
        x, y, h = state
        return np.array([v * math.cos(h), v * math.sin(h), w])

    state = np.array([x0, y0, h0], dtype=float)
    steps = int(round(duration / dt))
    for _ in range(steps):
        k1 = deriv(state)
        k2 = deriv(state + dt / 2 * k1)
        k3 = deriv(state + dt / 2 * k2)
        k4 = deriv(state + dt * k3)
        state = state + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return state


def finite_diff_param_grads(spec, params, x, output_grad, h=1e-6):
    """Central finite differences of sum(forward(x) * output_grad) with
    respect to every parameter, in the same structure as nn.backward."""
    def loss(p):
        y, _ = nn.forward(spec, p, x)
        return float(np.sum(y * output_grad))

    grads = nn.NetworkParams([np.zeros_like(w) for w in params.weights],
                             [np.zeros_like(b) for b in params.biases])
    for arrays, out in ((params.weights, grads.weights),
                        (params.biases, grads.biases)):
        for arr, g in zip(arrays, out):
            it = np.nditer(arr, flags=["multi_index"])
            for _ in it:
                idx = it.multi_index
                orig = arr[idx]
                arr[idx] = orig + h
                up = loss(params)
                arr[idx] = orig - h
                down = loss(params)
                arr[idx] = orig
                g[idx] = (up - down) / (2 * h)
    return grads


def max_relative_grad_error(analytic, numeric):
    worst = 0.0
    for a, n in zip(analytic.flat(), numeric.flat()):
        denom = np.maximum(np.abs(n), 1e-6)
        worst = max(worst, float(np.max(np.abs(a - n) / denom)))
    return worst
