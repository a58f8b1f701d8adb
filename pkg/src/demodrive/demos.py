"""Demonstration datasets: recording, JSONL persistence, train/test splits,
and a scripted pure-pursuit expert usable in place of a human driver.

Rewards are computed once at record time and frozen into the file, so later
reward-parameter changes never silently relabel data (use the CLI ``relabel``
subcommand for an explicit relabel).
"""

from __future__ import annotations

import datetime
import json
import math
import os
import tempfile
from dataclasses import dataclass, field

import numpy as np

from . import track as track_mod
from .reward import RewardParams
from .sim import (Action, DriveEnv, OBS_DIM, OMEGA_MAX, Pose, SimConfig, V_MAX)

DEMO_FORMAT_VERSION = 1


class DatasetError(ValueError):
    """Dataset-level problem: track mismatch, empty/too-small set."""


class DemoParseError(DatasetError):
    """Malformed line in a demo file; carries the 1-based line number."""

    def __init__(self, line_number, message):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


class DemoValidationError(DatasetError):
    """A loaded sample violates its invariants."""


@dataclass(frozen=True)
class DemoSample:
    t: float                 # seconds since session start
    obs: np.ndarray          # flattened observation, (10,)
    action: Action
    reward: float
    pose: Pose

    def validate(self):
        obs = np.asarray(self.obs, dtype=np.float64)
        if obs.shape != (OBS_DIM,):
            raise DemoValidationError(f"obs must have shape ({OBS_DIM},), got {obs.shape}")
        if not np.all(np.isfinite(obs)):
            raise DemoValidationError("obs contains non-finite values")
        if np.any(obs[:-1] < 0) or np.any(obs[:-1] > 1):
            raise DemoValidationError("ray values must lie in [0, 1]")
        if not 0.0 <= obs[-1] <= 2.0:
            raise DemoValidationError("speed_norm must lie in [0, 2]")
        if not 0.0 <= self.reward <= 1.0:
            raise DemoValidationError(f"reward {self.reward} outside [0, 1]")
        if not 0.0 <= self.action.speed_cmd <= V_MAX:
            raise DemoValidationError(f"speed_cmd {self.action.speed_cmd} outside [0, {V_MAX}]")
        if abs(self.action.steer_cmd) > OMEGA_MAX:
            raise DemoValidationError(f"steer_cmd {self.action.steer_cmd} outside clamp range")

    def to_json_dict(self):
        return {
            "t": self.t,
            "obs": [float(v) for v in self.obs],
            "action": [self.action.speed_cmd, self.action.steer_cmd],
            "reward": self.reward,
            "pose": [self.pose.x, self.pose.y, self.pose.heading],
        }

    @classmethod
    def from_json_dict(cls, doc):
        action = Action(float(doc["action"][0]), float(doc["action"][1]))
        pose = Pose(*[float(v) for v in doc["pose"]])
        return cls(t=float(doc["t"]), obs=np.array(doc["obs"], dtype=np.float64),
                   action=action, reward=float(doc["reward"]), pose=pose)


class DemoSet:
    """Ordered demonstration samples plus session metadata."""

    def __init__(self, meta, samples=None):
        self.meta = dict(meta)
        self.samples = list(samples or [])

    def __len__(self):
        return len(self.samples)

    @property
    def track_hash(self):
        return self.meta.get("track_hash")

    def append(self, sample: DemoSample, track_hash=None):
        if track_hash is not None and track_hash != self.track_hash:
            raise DatasetError(
                f"sample track hash {track_hash} != set track hash {self.track_hash}")
        sample.validate()
        self.samples.append(sample)

    def rewards(self):
        return [s.reward for s in self.samples]

    def obs_matrix(self):
        return np.array([s.obs for s in self.samples])

    def action_matrix(self):
        return np.array([[s.action.speed_cmd, s.action.steer_cmd]
                         for s in self.samples])


def new_meta(trk: track_mod.TrackSpec, recorder, config_snapshot=None):
    return {
        "track_hash": trk.hash(),
        "recorder": recorder,
        "created_at": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "config": config_snapshot or {},
    }


def split(demo_set: DemoSet, train_fraction=0.9, seed=0):
    """Seeded shuffle split into (train, test); test size rounds to the
    nearest integer of the test fraction."""
    n = len(demo_set)
    if n < 10:
        raise DatasetError(f"need >= 10 samples to split, got {n}")
    if not 0.0 < train_fraction < 1.0:
        raise DatasetError("train_fraction must be in (0, 1)")
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    n_test = int(round((1.0 - train_fraction) * n))
    n_test = min(max(n_test, 1), n - 1)
    test_idx = set(order[:n_test].tolist())
    train = DemoSet(demo_set.meta, [s for i, s in enumerate(demo_set.samples)
                                    if i not in test_idx])
    test = DemoSet(demo_set.meta, [s for i, s in enumerate(demo_set.samples)
                                   if i in test_idx])
    return train, test


def save(demo_set: DemoSet, path):
    """Write as JSONL: header line with meta, then one sample per line."""
    tmp_fd, tmp_path = tempfile.mkstemp(dir=os.path.dirname(os.path.abspath(path)) or ".")
    try:
        with os.fdopen(tmp_fd, "w") as fh:
            fh.write(json.dumps({"format_version": DEMO_FORMAT_VERSION,
                                 "meta": demo_set.meta}) + "\n")
            for s in demo_set.samples:
                fh.write(json.dumps(s.to_json_dict()) + "\n")
        os.replace(tmp_path, path)
    except BaseException:
        if os.path.exists(tmp_path):
            os.unlink(tmp_path)
        raise


def load(path, expected_track_hash=None) -> DemoSet:
    """Read and fully validate a demo file; raises DemoParseError with the
    offending line number on malformed lines."""
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise DemoParseError(1, "empty file")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise DemoParseError(1, f"bad header: {exc}") from None
    if header.get("format_version") != DEMO_FORMAT_VERSION:
        raise DemoParseError(1, f"unsupported format_version {header.get('format_version')!r}")
    meta = header.get("meta", {})
    demo_set = DemoSet(meta)
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            sample = DemoSample.from_json_dict(json.loads(line))
        except (json.JSONDecodeError, KeyError, TypeError, IndexError, ValueError) as exc:
            raise DemoParseError(lineno, str(exc)) from None
        try:
            sample.validate()
        except DemoValidationError as exc:
            raise DemoValidationError(f"line {lineno}: {exc}") from None
        demo_set.samples.append(sample)
    if expected_track_hash is not None and meta.get("track_hash") != expected_track_hash:
        raise DatasetError(
            f"demo set recorded on track {meta.get('track_hash')}, "
            f"current track is {expected_track_hash}")
    return demo_set


class PurePursuitExpert:
    """Scripted expert: steers toward a lookahead point on the centerline at a
    fixed cruise speed. Deterministic, so CI never needs a human driver."""

    def __init__(self, trk: track_mod.TrackSpec, lookahead=0.15, speed=0.10):
        self.track = trk
        self.lookahead = lookahead
        self.speed = speed

    def target_point(self, pose: Pose):
        """Lookahead point on the centerline (the recording UI's green dot)."""
        q = track_mod.query(self.track, (pose.x, pose.y))
        return self.track.point_at(q.arc_position + self.lookahead)

    def act(self, pose: Pose) -> Action:
        target = self.target_point(pose)
        dx = target[0] - pose.x
        dy = target[1] - pose.y
        dist = math.hypot(dx, dy)
        if dist < 1e-9:
            return Action(self.speed, 0.0)
        alpha = math.atan2(dy, dx) - pose.heading
        curvature = 2.0 * math.sin(alpha) / dist
        omega = self.speed * curvature
        return Action(self.speed, omega).clamped()


def record_expert(trk: track_mod.TrackSpec, n_samples,
                  sim_config: SimConfig = SimConfig(),
                  reward_params: RewardParams = RewardParams(),
                  seed=0, spawn=0.0, lookahead=0.15) -> DemoSet:
    """Drive the scripted expert for ``n_samples`` ticks and record one
    DemoSample per tick (observation seen, action taken, resulting reward)."""
    if n_samples < 1:
        raise DatasetError("n_samples must be >= 1")
    expert = PurePursuitExpert(trk, lookahead=lookahead, speed=reward_params.v_i)
    env = DriveEnv(trk, SimConfig(dt=sim_config.dt,
                                  max_episode_steps=n_samples + 1,
                                  rng_seed=seed,
                                  vehicle_half_size=sim_config.vehicle_half_size),
                   reward_params)
    meta = new_meta(trk, "scripted", {
        "sim": sim_config.to_json_dict(),
        "reward": reward_params.to_json_dict(),
        "expert": {"kind": "pure_pursuit", "lookahead": lookahead,
                   "speed": reward_params.v_i, "spawn": spawn, "seed": seed},
    })
    demo_set = DemoSet(meta)
    obs = env.reset(spawn=spawn)
    for i in range(n_samples):
        pose = env.pose
        action = expert.act(pose)
        result = env.step(action)
        demo_set.append(DemoSample(t=i * sim_config.dt, obs=obs.vector(),
                                   action=action, reward=result.reward, pose=pose))
        obs = result.obs
    return demo_set
