"""DDPG agent with an eviction-protected demonstration region in the replay
buffer and optional behavior-cloned actor initialization.

The combined method seeds the buffer with expert transitions and starts from
the BC actor; with both switches off the exact same code path is plain DDPG,
which is the pure-RL baseline.
"""

from __future__ import annotations

import csv
import math
import os
import tempfile
from dataclasses import dataclass, field

import numpy as np

from . import nn
from .demos import DatasetError, DemoSet
from .imitation import (BcConfig, Policy, actor_spec, denormalize_action,
                        normalize_actions, train_bc)
from .reward import RewardParams, count_events
from .sim import Action, DriveEnv, OBS_DIM

CRITIC_HIDDEN = (64, 64)


@dataclass(frozen=True)
class Transition:
    obs: np.ndarray        # (10,)
    action: np.ndarray     # (2,) normalized to [-1, 1]
    reward: float
    next_obs: np.ndarray
    done: bool
    is_demo: bool


@dataclass(frozen=True)
class DdpgConfig:
    gamma: float = 0.99
    tau: float = 0.005
    actor_lr: float = 1e-4
    critic_lr: float = 1e-3
    batch_size: int = 64
    warmup_steps: int = 1000
    noise_sigma: float = 0.2
    noise_sigma_final: float = 0.05
    noise_decay_steps: int = 100_000
    buffer_capacity: int = 100_000
    demo_seed: bool = True
    bc_pretrain: bool = True
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError("gamma must be in [0, 1)")
        if not 0.0 < self.tau <= 1.0:
            raise ValueError("tau must be in (0, 1]")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")

    def to_json_dict(self):
        return {k: getattr(self, k) for k in (
            "gamma", "tau", "actor_lr", "critic_lr", "batch_size",
            "warmup_steps", "noise_sigma", "noise_sigma_final",
            "noise_decay_steps", "buffer_capacity", "demo_seed",
            "bc_pretrain", "seed")}

    @classmethod
    def from_json_dict(cls, doc):
        return cls(**doc)

    def noise_at(self, step):
        frac = min(step / self.noise_decay_steps, 1.0)
        return self.noise_sigma + (self.noise_sigma_final - self.noise_sigma) * frac


class ReplayBuffer:
    """Uniform-sampling transition store with a protected demo region.

    Demo transitions live in a separate block that is never evicted;
    non-demo transitions go through a FIFO ring of ``capacity`` slots.
    """

    def __init__(self, capacity=100_000, seed=0):
        self.capacity = capacity
        self.rng = np.random.default_rng(seed)
        shape = lambda d: (capacity, d)
        self._obs = np.zeros(shape(OBS_DIM))
        self._act = np.zeros(shape(2))
        self._rew = np.zeros(capacity)
        self._next = np.zeros(shape(OBS_DIM))
        self._done = np.zeros(capacity)
        self._ptr = 0
        self._ring_size = 0
        self._demo_obs = []
        self._demo_act = []
        self._demo_rew = []
        self._demo_next = []
        self._demo_done = []
        self._demo_frozen = None

    @property
    def demo_count(self):
        return len(self._demo_rew)

    def __len__(self):
        return self._ring_size + self.demo_count

    def add(self, obs, action, reward, next_obs, done, is_demo=False):
        if is_demo:
            self._demo_obs.append(np.asarray(obs, dtype=np.float64))
            self._demo_act.append(np.asarray(action, dtype=np.float64))
            self._demo_rew.append(float(reward))
            self._demo_next.append(np.asarray(next_obs, dtype=np.float64))
            self._demo_done.append(float(done))
            self._demo_frozen = None
            return
        i = self._ptr
        self._obs[i] = obs
        self._act[i] = action
        self._rew[i] = reward
        self._next[i] = next_obs
        self._done[i] = float(done)
        self._ptr = (self._ptr + 1) % self.capacity
        self._ring_size = min(self._ring_size + 1, self.capacity)

    def _demo_arrays(self):
        if self._demo_frozen is None:
            self._demo_frozen = (
                np.array(self._demo_obs).reshape(-1, OBS_DIM),
                np.array(self._demo_act).reshape(-1, 2),
                np.array(self._demo_rew),
                np.array(self._demo_next).reshape(-1, OBS_DIM),
                np.array(self._demo_done),
            )
        return self._demo_frozen

    def sample(self, batch_size):
        """Uniform batch over demo + ring entries."""
        n = len(self)
        if n < batch_size:
            raise ValueError(f"buffer holds {n} < batch_size {batch_size}")
        idx = self.rng.integers(0, n, size=batch_size)
        nd = self.demo_count
        d_obs, d_act, d_rew, d_next, d_done = (self._demo_arrays() if nd
                                               else (None,) * 5)
        obs = np.empty((batch_size, OBS_DIM))
        act = np.empty((batch_size, 2))
        rew = np.empty(batch_size)
        nxt = np.empty((batch_size, OBS_DIM))
        done = np.empty(batch_size)
        demo_mask = idx < nd
        if np.any(demo_mask):
            di = idx[demo_mask]
            obs[demo_mask] = d_obs[di]
            act[demo_mask] = d_act[di]
            rew[demo_mask] = d_rew[di]
            nxt[demo_mask] = d_next[di]
            done[demo_mask] = d_done[di]
        ring_mask = ~demo_mask
        if np.any(ring_mask):
            ri = idx[ring_mask] - nd
            obs[ring_mask] = self._obs[ri]
            act[ring_mask] = self._act[ri]
            rew[ring_mask] = self._rew[ri]
            nxt[ring_mask] = self._next[ri]
            done[ring_mask] = self._done[ri]
        return {"obs": obs, "action": act, "reward": rew,
                "next_obs": nxt, "done": done}


def seed_buffer(buffer: ReplayBuffer, demos: DemoSet, env: DriveEnv):
    """Insert one protected transition per demo sample; next observations are
    synthesized by replaying the recorded action one step from the recorded
    pose under the deterministic dynamics. Returns the insert count."""
    if len(demos) == 0:
        raise DatasetError("cannot seed from an empty DemoSet")
    for s in demos.samples:
        env.place_pose(s.pose, speed=s.obs[-1] * env.reward_params.v_i)
        result = env.step(s.action)
        a_norm = normalize_actions(np.array([s.action.speed_cmd, s.action.steer_cmd]))
        buffer.add(s.obs, a_norm, s.reward, result.obs.vector(),
                   result.off_track, is_demo=True)
    env._done = True  # leave the env requiring a reset
    return len(demos.samples)


def critic_spec() -> nn.MlpSpec:
    return nn.MlpSpec((OBS_DIM + 2,) + CRITIC_HIDDEN + (1,),
                      output_activation="identity")


class DdpgAgent:
    """Actor/critic with target networks and Gaussian exploration noise."""

    def __init__(self, config: DdpgConfig = DdpgConfig()):
        self.config = config
        self.actor_spec = actor_spec()
        self.critic_spec = critic_spec()
        self.actor = nn.init_params(self.actor_spec, config.seed)
        self.critic = nn.init_params(self.critic_spec, config.seed + 10_000)
        self.actor_target = self.actor.copy()
        self.critic_target = self.critic.copy()
        self.actor_adam = nn.AdamState(self.actor, config.actor_lr)
        self.critic_adam = nn.AdamState(self.critic, config.critic_lr)
        self.noise_rng = np.random.default_rng(config.seed + 20_000)

    def set_actor(self, params: nn.NetworkParams):
        self.actor = params.copy()
        self.actor_target = params.copy()
        self.actor_adam = nn.AdamState(self.actor, self.config.actor_lr)

    def policy(self) -> Policy:
        return Policy(self.actor_spec, self.actor.copy())

    def act(self, obs_vec, sigma=0.0):
        """Action plus clamped Gaussian noise; returns (Action, normalized)."""
        y, _ = nn.forward(self.actor_spec, self.actor, obs_vec)
        if sigma > 0.0:
            y = y + self.noise_rng.normal(0.0, sigma, size=2)
        y = np.clip(y, -1.0, 1.0)
        return denormalize_action(y), y

    def _soft_update(self, target: nn.NetworkParams, online: nn.NetworkParams):
        tau = self.config.tau
        for t, o in zip(target.flat(), online.flat()):
            t *= (1.0 - tau)
            t += tau * o

    def critic_target_values(self, batch):
        """Bootstrapped regression target y = r + gamma * (1 - done) * Q'."""
        a2, _ = nn.forward(self.actor_spec, self.actor_target, batch["next_obs"])
        q2, _ = nn.forward(self.critic_spec, self.critic_target,
                           np.hstack([batch["next_obs"], a2]))
        return batch["reward"] + self.config.gamma * (1.0 - batch["done"]) * q2[:, 0]

    def actor_gradients(self, s):
        """Gradients that ascend mean Q(s, mu(s)) through the current critic
        (returned negated for a descent optimizer), plus the objective."""
        b = len(s)
        mu, actor_tape = nn.forward(self.actor_spec, self.actor, s)
        q_mu, critic_tape = nn.forward(self.critic_spec, self.critic,
                                       np.hstack([s, mu]))
        actor_obj = float(np.mean(q_mu))
        ones = np.full((b, 1), 1.0 / b)
        _, input_grad = nn.backward(self.critic_spec, self.critic,
                                    critic_tape, ones)
        dq_da = input_grad[:, OBS_DIM:]
        actor_grads, _ = nn.backward(self.actor_spec, self.actor,
                                     actor_tape, -dq_da)
        return actor_grads, actor_obj

    def update(self, buffer: ReplayBuffer):
        """One critic + actor gradient step on a uniform batch, then soft
        target updates. Returns (critic_loss, actor_objective)."""
        cfg = self.config
        batch = buffer.sample(cfg.batch_size)
        s, a, r = batch["obs"], batch["action"], batch["reward"]
        b = len(r)

        # Critic regression toward the bootstrapped target.
        y = self.critic_target_values(batch)
        q, tape = nn.forward(self.critic_spec, self.critic, np.hstack([s, a]))
        td = q[:, 0] - y
        critic_loss = float(np.mean(td ** 2))
        if not math.isfinite(critic_loss):
            raise nn.TrainingError("non-finite critic loss")
        grad_out = (2.0 * td / b)[:, None]
        grads, _ = nn.backward(self.critic_spec, self.critic, tape, grad_out)
        nn.adam_step(self.critic, grads, self.critic_adam)

        # Actor ascends Q(s, mu(s)) through the (frozen this step) critic.
        actor_grads, actor_obj = self.actor_gradients(s)
        nn.adam_step(self.actor, actor_grads, self.actor_adam)

        self._soft_update(self.actor_target, self.actor)
        self._soft_update(self.critic_target, self.critic)
        return critic_loss, actor_obj


TRAINING_LOG_COLUMNS = ["step", "cum_reward_events", "cum_reward_events_rl",
                        "episodes", "laps", "mean_return", "critic_loss",
                        "actor_obj"]


class TrainingLog:
    """Per-checkpoint training statistics (every ``interval`` env steps)."""

    def __init__(self, interval=1000):
        self.interval = interval
        self.rows = []

    def record(self, **row):
        self.rows.append({k: row[k] for k in TRAINING_LOG_COLUMNS})

    def save_csv(self, path):
        tmp_fd, tmp_path = tempfile.mkstemp(
            dir=os.path.dirname(os.path.abspath(path)) or ".")
        try:
            with os.fdopen(tmp_fd, "w", newline="") as fh:
                writer = csv.DictWriter(fh, fieldnames=TRAINING_LOG_COLUMNS)
                writer.writeheader()
                for row in self.rows:
                    writer.writerow({k: repr(v) if isinstance(v, float) else v
                                     for k, v in row.items()})
            os.replace(tmp_path, path)
        except BaseException:
            if os.path.exists(tmp_path):
                os.unlink(tmp_path)
            raise

    def series(self, column):
        return [r[column] for r in self.rows]


def _snapshot_score(env: DriveEnv, spec, params, duration_s=60.0):
    """Deterministic noiseless rollout score for a parameter snapshot:
    (net arc progress, total reward), stopping at the first off-track."""
    n_steps = int(round(duration_s / env.config.dt))
    obs = env.reset(max_steps=n_steps + 1)
    progress = 0.0
    total_reward = 0.0
    for _ in range(n_steps):
        y, _ = nn.forward(spec, params, obs.vector())
        result = env.step(denormalize_action(np.clip(y, -1.0, 1.0)))
        progress += result.progress
        total_reward += result.reward
        obs = result.obs
        if result.done:
            break
    return (progress, total_reward)


def train(env: DriveEnv, config: DdpgConfig = DdpgConfig(), demos: DemoSet = None,
          budget=50_000, bc_config: BcConfig = None, log_interval=1000,
          snapshot_eval=True):
    """Run the DDPG training loop for ``budget`` env steps.

    With ``demos`` given, ``config.bc_pretrain`` initializes the actor via
    behavior cloning and ``config.demo_seed`` pre-fills the replay buffer with
    protected expert transitions; with both off (or no demos) this is plain
    DDPG. Returns (agent, TrainingLog).

    With ``snapshot_eval`` (default), actor snapshots are scored with a short
    deterministic rollout at every log checkpoint and the best-scoring
    snapshot (including the initial actor) is installed as the returned
    actor, mirroring deployment practice of shipping the best model seen.
    """
    agent = DdpgAgent(config)
    eval_env = DriveEnv(env.track,
                        type(env.config)(dt=env.config.dt,
                                         max_episode_steps=env.config.max_episode_steps,
                                         rng_seed=config.seed + 40_000,
                                         vehicle_half_size=env.config.vehicle_half_size),
                        env.reward_params)
    buffer = ReplayBuffer(config.buffer_capacity, seed=config.seed + 30_000)
    log = TrainingLog(log_interval)

    demo_event_offset = 0
    if demos is not None and config.bc_pretrain:
        bc = bc_config or BcConfig(seed=config.seed)
        policy, _ = train_bc(demos, bc)
        agent.set_actor(policy.params)
    if demos is not None and config.demo_seed:
        seed_buffer(buffer, demos, env)
        demo_event_offset = count_events(demos.rewards(), env.reward_params)

    best_params = agent.actor.copy()
    best_score = (_snapshot_score(eval_env, agent.actor_spec, best_params)
                  if snapshot_eval else None)

    track_len = env.track.total_length
    obs_vec = env.reset().vector()
    events_rl = 0
    episodes = 0
    laps = 0
    lap_progress = 0.0
    episode_return = 0.0
    recent_returns = []
    critic_loss = 0.0
    actor_obj = 0.0

    for step in range(1, budget + 1):
        sigma = config.noise_at(step)
        action, a_norm = agent.act(obs_vec, sigma)
        result = env.step(action)
        next_vec = result.obs.vector()
        buffer.add(obs_vec, a_norm, result.reward, next_vec, result.off_track)
        obs_vec = next_vec

        events_rl += int(result.reward_event)
        episode_return += result.reward
        lap_progress += result.progress
        while lap_progress >= track_len:
            laps += 1
            lap_progress -= track_len

        if result.done:
            episodes += 1
            recent_returns.append(episode_return)
            if len(recent_returns) > 10:
                recent_returns.pop(0)
            episode_return = 0.0
            lap_progress = 0.0
            obs_vec = env.reset().vector()

        if step > config.warmup_steps and len(buffer) >= config.batch_size:
            critic_loss, actor_obj = agent.update(buffer)

        if step % log_interval == 0 or step == budget:
            mean_return = (sum(recent_returns) / len(recent_returns)
                           if recent_returns else 0.0)
            log.record(step=step,
                       cum_reward_events=demo_event_offset + events_rl,
                       cum_reward_events_rl=events_rl,
                       episodes=episodes, laps=laps,
                       mean_return=mean_return,
                       critic_loss=critic_loss, actor_obj=actor_obj)
            if snapshot_eval:
                score = _snapshot_score(eval_env, agent.actor_spec, agent.actor)
                if score > best_score:
                    best_score = score
                    best_params = agent.actor.copy()

    if snapshot_eval:
        agent.set_actor(best_params)
    return agent, log
