"""Policy deployment: gain/bias action conditioning and the timed drive loop
with off-track interventions.

An intervention re-centers the vehicle on the nearest centerline point with
tangent heading and zero speed and charges a fixed time penalty against the
evaluation clock without consuming simulation steps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from . import track as track_mod
from .imitation import Policy, predict
from .sim import Action, DriveEnv, StepResult

INTERVENTION_PENALTY_S = 6.0


@dataclass(frozen=True)
class DriveGains:
    speed_gain: float = 1.0
    steering_gain: float = 1.0
    steering_bias: float = 0.0          # rad/s additive
    steering_smoothing_alpha: float = 0.3  # 1.0 = no smoothing

    def __post_init__(self):
        if self.speed_gain < 0 or self.steering_gain < 0:
            raise ValueError("gains must be >= 0")
        if not 0.0 <= self.steering_smoothing_alpha <= 1.0:
            raise ValueError("steering_smoothing_alpha must be in [0, 1]")

    def to_json_dict(self):
        return {"speed_gain": self.speed_gain,
                "steering_gain": self.steering_gain,
                "steering_bias": self.steering_bias,
                "steering_smoothing_alpha": self.steering_smoothing_alpha}

    @classmethod
    def from_json_dict(cls, doc):
        return cls(**doc)


def condition(raw: Action, gains: DriveGains, prev_steer=0.0) -> Action:
    """Apply gain/bias conditioning and exponential steering smoothing."""
    speed = raw.speed_cmd * gains.speed_gain
    target = raw.steer_cmd * gains.steering_gain + gains.steering_bias
    alpha = gains.steering_smoothing_alpha
    steer = (1.0 - alpha) * prev_steer + alpha * target
    return Action(speed, steer).clamped()


@dataclass
class Intervention:
    time: float       # evaluation-clock seconds when it happened
    step_index: int   # index into DriveTrace.steps of the off-track step


@dataclass
class DriveTrace:
    steps: list              # StepResult per simulated step
    interventions: list      # Intervention records
    testing_time: float      # evaluation-clock seconds consumed
    dt: float

    def rewards(self):
        return [s.reward for s in self.steps]


def drive(env: DriveEnv, policy, gains: DriveGains = DriveGains(),
          duration=600.0, intervene=True, spawn=0.0) -> DriveTrace:
    """Run predict -> condition -> step until ``duration`` simulated seconds
    of evaluation clock elapse.

    ``policy`` is either a Policy (noiseless network inference) or any object
    with an ``act(pose) -> Action`` method (e.g. the scripted expert). With
    ``intervene`` off, the trace ends at the first off-track event.
    """
    if duration <= 0:
        raise ValueError("duration must be positive")
    dt = env.config.dt
    max_steps = int(math.ceil(duration / dt)) + 1
    obs = env.reset(spawn=spawn, max_steps=max_steps)
    steps = []
    interventions = []
    clock = 0.0
    prev_steer = 0.0
    while clock + dt <= duration + 1e-9:
        if isinstance(policy, Policy):
            raw = predict(policy, obs.vector())
        else:
            raw = policy.act(env.pose)
        action = condition(raw, gains, prev_steer)
        prev_steer = action.steer_cmd
        result = env.step(action)
        steps.append(result)
        clock += dt
        obs = result.obs
        if result.off_track:
            if not intervene:
                break
            clock += INTERVENTION_PENALTY_S
            interventions.append(Intervention(time=clock, step_index=len(steps) - 1))
            q = env.query()
            obs = env.place(q.arc_position, speed=0.0)
            prev_steer = 0.0
    return DriveTrace(steps=steps, interventions=interventions,
                      testing_time=clock, dt=dt)
