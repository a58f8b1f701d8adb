import numpy as np
import pytest

from demodrive import demos, track


@pytest.fixture(scope="session")
def default_track():
    return track.default_track()


@pytest.fixture(scope="session")
def expert_demos(default_track):
    """The standard 331-sample scripted-expert dataset."""
    return demos.record_expert(default_track, 331, seed=1)


def lane_points(trk, n, rng, lateral_scale=0.9):
    """Random points inside the lane: random arc position plus a lateral
    offset along the local left normal."""
    pts = np.empty((n, 2))
    for i in range(n):
        s = rng.uniform(0.0, trk.total_length)
        u = rng.uniform(-lateral_scale, lateral_scale) * trk.lane_half_width
        p = trk.point_at(s)
        t = trk.tangent_at(s)
        pts[i] = p + u * np.array([-t[1], t[0]])
    return pts
