"""Deterministic fixed-timestep differential-drive simulation.

The vehicle is a unicycle: commanded forward speed and turn rate, integrated
with first-order (Euler) steps. Perception is a 9-ray rangefinder against the
lane edges plus normalized speed; the episode ends when the vehicle runs
completely off the track or the step budget is spent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import track as track_mod
from .reward import RewardParams, compute_reward, is_reward_event

V_MAX = 0.20        # m/s
OMEGA_MAX = 2.0     # rad/s
N_RAYS = 9
RAY_MAX_RANGE = 0.5  # meters
# -90 deg .. +90 deg in 22.5 deg steps, relative to heading.
RAY_ANGLES = np.deg2rad(np.linspace(-90.0, 90.0, N_RAYS))
OBS_DIM = N_RAYS + 1


def normalize_heading(h):
    """Wrap to (-pi, pi]."""
    h = math.remainder(h, 2.0 * math.pi)
    if h <= -math.pi:
        h += 2.0 * math.pi
    return h


@dataclass(frozen=True)
class Pose:
    x: float
    y: float
    heading: float  # radians, (-pi, pi]

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.x, self.y, self.heading)):
            raise ValueError("pose components must be finite")

    def position(self):
        return np.array([self.x, self.y])


@dataclass(frozen=True)
class Action:
    speed_cmd: float  # m/s, clamped to [0, V_MAX]
    steer_cmd: float  # rad/s, clamped to [-OMEGA_MAX, OMEGA_MAX]

    def clamped(self):
        return Action(
            speed_cmd=min(max(self.speed_cmd, 0.0), V_MAX),
            steer_cmd=min(max(self.steer_cmd, -OMEGA_MAX), OMEGA_MAX),
        )


@dataclass(frozen=True)
class Observation:
    rays: np.ndarray      # (9,) normalized distances in [0, 1]
    speed_norm: float     # V / V_i, clamped to [0, 2]

    def vector(self):
        return np.concatenate([self.rays, [self.speed_norm]])


@dataclass(frozen=True)
class StepResult:
    obs: Observation
    reward: float
    reward_event: bool
    off_track: bool
    done: bool
    pose: Pose
    speed: float
    dist_to_edge: float
    progress: float  # signed arc delta this step, meters


@dataclass(frozen=True)
class SimConfig:
    dt: float = 0.05
    max_episode_steps: int = 1200
    rng_seed: int = 0
    vehicle_half_size: float = 0.05

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.max_episode_steps <= 0:
            raise ValueError("max_episode_steps must be positive")

    def to_json_dict(self):
        return {"dt": self.dt, "max_episode_steps": self.max_episode_steps,
                "rng_seed": self.rng_seed,
                "vehicle_half_size": self.vehicle_half_size}

    @classmethod
    def from_json_dict(cls, doc):
        return cls(**doc)


def raycast(trk: track_mod.TrackSpec, pose: Pose, angle):
    """Normalized distance in [0, 1] to the first lane-edge hit along
    heading + angle, max range 0.5 m."""
    a = pose.heading + angle
    direction = (math.cos(a), math.sin(a))
    dist = track_mod.raycast_edges(trk, (pose.x, pose.y), direction, RAY_MAX_RANGE)
    return dist / RAY_MAX_RANGE


class EpisodeTerminated(RuntimeError):
    """Raised when stepping an episode that already ended."""


class DriveEnv:
    """Episodic environment over a track: reset/step with Observation I/O.

    A single instance is single-owner; run independent instances (distinct
    seeds) for parallel workers.
    """

    def __init__(self, trk: track_mod.TrackSpec, config: SimConfig = SimConfig(),
                 reward_params: RewardParams = RewardParams()):
        self.track = trk
        self.config = config
        self.reward_params = reward_params
        self.rng = np.random.default_rng(config.rng_seed)
        self._pose = None
        self._speed = 0.0
        self._arc = 0.0
        self._steps = 0
        self._max_steps = config.max_episode_steps
        self._done = True

    @property
    def pose(self) -> Pose:
        return self._pose

    @property
    def speed(self):
        return self._speed

    @property
    def arc_position(self):
        return self._arc

    @property
    def done(self):
        return self._done

    @property
    def steps(self):
        return self._steps

    def _observe(self) -> Observation:
        rays = np.array([raycast(self.track, self._pose, a) for a in RAY_ANGLES])
        speed_norm = min(max(self._speed / self.reward_params.v_i, 0.0), 2.0)
        return Observation(rays=rays, speed_norm=speed_norm)

    def reset(self, spawn=None, max_steps=None) -> Observation:
        """Place the vehicle on the centerline at arc position ``spawn``
        (default 0), heading along the local tangent, speed zero."""
        if spawn is None:
            spawn = 0.0
        if not 0.0 <= spawn < self.track.total_length:
            raise ValueError(
                f"spawn arc position {spawn} outside [0, {self.track.total_length})")
        self.rng = np.random.default_rng(self.config.rng_seed)
        p = self.track.point_at(spawn)
        self._pose = Pose(float(p[0]), float(p[1]),
                          normalize_heading(self.track.heading_at(spawn)))
        self._speed = 0.0
        self._arc = float(spawn)
        self._steps = 0
        self._max_steps = max_steps if max_steps is not None else self.config.max_episode_steps
        self._done = False
        return self._observe()

    def place_pose(self, pose: Pose, speed=0.0) -> Observation:
        """Teleport to an exact pose mid-episode (demo replay). Clears the
        done flag but keeps the step counter running."""
        self._pose = Pose(pose.x, pose.y, normalize_heading(pose.heading))
        self._speed = float(speed)
        self._arc = track_mod.query(self.track, (pose.x, pose.y)).arc_position
        self._done = False
        return self._observe()

    def place(self, arc_position, speed=0.0) -> Observation:
        """Teleport onto the centerline mid-episode (intervention re-center).

        Clears the done flag but keeps the step counter running.
        """
        arc = float(arc_position) % self.track.total_length
        p = self.track.point_at(arc)
        self._pose = Pose(float(p[0]), float(p[1]),
                          normalize_heading(self.track.heading_at(arc)))
        self._speed = float(speed)
        self._arc = arc
        self._done = False
        return self._observe()

    def step(self, action: Action) -> StepResult:
        if self._done:
            raise EpisodeTerminated("step() called on a terminated episode; reset first")
        act = action.clamped()
        v, w = act.speed_cmd, act.steer_cmd
        dt = self.config.dt
        x = self._pose.x + v * math.cos(self._pose.heading) * dt
        y = self._pose.y + v * math.sin(self._pose.heading) * dt
        h = normalize_heading(self._pose.heading + w * dt)
        self._pose = Pose(x, y, h)
        self._speed = v
        self._steps += 1

        q = track_mod.query(self.track, (x, y))
        progress = track_mod.progress_delta(self.track, self._arc, q.arc_position)
        self._arc = q.arc_position

        off_track = q.dist_to_edge < -self.config.vehicle_half_size
        r = compute_reward(q.dist_to_edge, v, self.reward_params)
        obs = self._observe()
        done = off_track or self._steps >= self._max_steps
        self._done = done
        return StepResult(
            obs=obs,
            reward=r,
            reward_event=is_reward_event(r, self.reward_params),
            off_track=off_track,
            done=done,
            pose=self._pose,
            speed=v,
            dist_to_edge=q.dist_to_edge,
            progress=progress,
        )

    def query(self) -> track_mod.TrackQuery:
        return track_mod.query(self.track, (self._pose.x, self._pose.y))
