import math

import numpy as np
import pytest

from demodrive import reward


P = reward.RewardParams()


def oracle_reward(d, v, p=P):
    """Direct transcription of the definition, kept separate on purpose."""
    r_d = min(1.0, max(0.0, d) / p.d_i)
    r_s = min(1.0, max(0.0, v) / p.v_i)
    if r_d < p.cutoff or r_s < p.cutoff:
        return 0.0
    return p.w_d * r_d + p.w_s * r_s


def test_ideal_conditions():
    assert reward.compute_reward(0.10, 0.10) == pytest.approx(1.0)
    assert reward.compute_reward(0.25, 0.18) == pytest.approx(1.0)  # saturated


def test_half_components():
    assert reward.compute_reward(0.05, 0.10) == pytest.approx(0.75)
    assert reward.compute_reward(0.10, 0.05) == pytest.approx(0.75)
    assert reward.compute_reward(0.05, 0.05) == pytest.approx(0.5)


def test_cutoff_zeroes_reward():
    assert reward.compute_reward(0.009, 0.10) == 0.0   # R_d < 0.1
    assert reward.compute_reward(0.10, 0.009) == 0.0   # R_s < 0.1
    assert reward.compute_reward(0.10, 0.0) == 0.0
    assert reward.compute_reward(-0.02, 0.10) == 0.0   # off the edge
    # Just above the cutoff the reward is paid.
    assert reward.compute_reward(0.011, 0.10) == pytest.approx(0.555, abs=1e-9)


def test_matches_oracle_on_grid():
    for d in np.linspace(-0.05, 0.3, 71):
        for v in np.linspace(0.0, 0.25, 51):
            assert reward.compute_reward(d, v) == pytest.approx(
                oracle_reward(d, v), abs=1e-12)


def test_range_and_monotonicity():
    rng = np.random.default_rng(2)
    for _ in range(500):
        d, v = rng.uniform(-0.1, 0.3), rng.uniform(0.0, 0.3)
        r = reward.compute_reward(d, v)
        assert 0.0 <= r <= 1.0
        # Increasing either input never decreases the reward.
        assert reward.compute_reward(d + 0.01, v) >= r
        assert reward.compute_reward(d, v + 0.01) >= r


def test_event_threshold():
    assert reward.is_reward_event(0.9)
    assert reward.is_reward_event(1.0)
    assert not reward.is_reward_event(0.899999)
    assert reward.count_events([1.0, 0.95, 0.5, 0.0, 0.91]) == 3


def test_invalid_params_rejected():
    with pytest.raises(ValueError):
        reward.RewardParams(w_d=0.6, w_s=0.6)
    with pytest.raises(ValueError):
        reward.RewardParams(d_i=0.0)
    with pytest.raises(ValueError):
        reward.RewardParams(cutoff=1.5)
    with pytest.raises(ValueError):
        reward.RewardParams(event_threshold=0.05)


def test_non_finite_inputs_rejected():
    with pytest.raises(ValueError):
        reward.compute_reward(math.nan, 0.1)
    with pytest.raises(ValueError):
        reward.compute_reward(0.1, math.inf)


def test_params_json_round_trip():
    p = reward.RewardParams(d_i=0.12, v_i=0.08, w_d=0.4, w_s=0.6)
    assert reward.RewardParams.from_json_dict(p.to_json_dict()) == p
