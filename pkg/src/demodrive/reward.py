"""Reward function: weighted edge-distance and speed terms with a hard
low-component cutoff, plus reward-event counting.

R_d = min(1, D/D_i), R_s = min(1, V/V_i); reward is 0 if either normalized
component falls below the cutoff, otherwise W_d*R_d + W_s*R_s. A step is a
"reward event" when the reward reaches the event threshold (near 1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class RewardParams:
    d_i: float = 0.10           # ideal distance to edge, meters
    v_i: float = 0.10           # ideal speed, m/s
    w_d: float = 0.5
    w_s: float = 0.5
    cutoff: float = 0.1         # on the normalized components
    event_threshold: float = 0.9

    def __post_init__(self):
        if not math.isclose(self.w_d + self.w_s, 1.0, abs_tol=1e-12):
            raise ValueError("w_d + w_s must equal 1")
        if min(self.d_i, self.v_i, self.w_d, self.w_s) <= 0:
            raise ValueError("d_i, v_i and weights must be positive")
        if not 0 < self.cutoff < 1:
            raise ValueError("cutoff must be in (0, 1)")
        if not self.cutoff < self.event_threshold <= 1.0:
            raise ValueError("event_threshold must be in (cutoff, 1]")

    def to_json_dict(self):
        return {"d_i": self.d_i, "v_i": self.v_i, "w_d": self.w_d,
                "w_s": self.w_s, "cutoff": self.cutoff,
                "event_threshold": self.event_threshold}

    @classmethod
    def from_json_dict(cls, doc):
        return cls(**doc)


def compute_reward(dist_to_edge, speed, params: RewardParams = RewardParams()):
    """Reward in [0, 1] from distance-to-edge (m) and speed (m/s).

    Negative distances (off the edge) clamp to 0, which trips the cutoff.
    """
    if not (math.isfinite(dist_to_edge) and math.isfinite(speed)):
        raise ValueError("dist_to_edge and speed must be finite")
    r_d = min(1.0, max(0.0, dist_to_edge) / params.d_i)
    r_s = min(1.0, max(0.0, speed) / params.v_i)
    if r_d < params.cutoff or r_s < params.cutoff:
        return 0.0
    return params.w_d * r_d + params.w_s * r_s


def is_reward_event(reward, params: RewardParams = RewardParams()):
    """True when the reward is close enough to 1 to count as an event."""
    return reward >= params.event_threshold


def count_events(rewards, params: RewardParams = RewardParams()):
    return sum(1 for r in rewards if is_reward_event(r, params))
