"""Autonomy metric, drive-trace summaries, and the three-way method
comparison (pure IL / pure RL / combined).

The autonomy value is the percentage of evaluation time not lost to
off-track interventions at a fixed per-intervention time penalty. Learning
efficiency is compared on an environment-step axis using cumulative
reward-event counts; the combined method's count includes its seeded
demonstration events (reported alongside an RL-earned-only column).
"""

from __future__ import annotations

import csv
import json
import os
import tempfile
from dataclasses import dataclass, field, asdict

from . import track as track_mod
from .demos import DemoSet
from .deploy import INTERVENTION_PENALTY_S, DriveGains, DriveTrace, drive
from .imitation import BcConfig, train_bc
from .reward import RewardParams, count_events
from .rl import DdpgConfig, TrainingLog, train
from .sim import DriveEnv, SimConfig

METHODS = ("pure_il", "pure_rl", "combined")


def autonomy(interventions, testing_time, penalty=INTERVENTION_PENALTY_S):
    """Percent of testing time driven autonomously, clamped at 0."""
    if testing_time <= 0:
        raise ValueError("testing_time must be positive")
    if interventions < 0:
        raise ValueError("interventions must be >= 0")
    return max(0.0, 100.0 - interventions * penalty * 100.0 / testing_time)


@dataclass
class EvalReport:
    autonomy_value: float
    interventions: int
    testing_time: float
    reward_events: int
    mean_reward: float
    laps_completed: int
    config: dict = field(default_factory=dict)

    def to_json_dict(self):
        return asdict(self)


def summarize(trace: DriveTrace, params: RewardParams,
              trk: track_mod.TrackSpec, config=None) -> EvalReport:
    """Summarize a drive trace into an EvalReport.

    Laps count only intervention-free full loops: the progress accumulator
    resets at every intervention, so a policy carried around the track by
    repeated re-centering earns no laps.
    """
    if not trace.steps:
        raise ValueError("empty drive trace")
    rewards = trace.rewards()
    events = count_events(rewards, params)
    reset_at = {iv.step_index for iv in trace.interventions}
    laps = 0
    progress = 0.0
    for i, step in enumerate(trace.steps):
        progress += step.progress
        while progress >= trk.total_length:
            laps += 1
            progress -= trk.total_length
        if i in reset_at:
            progress = 0.0
    return EvalReport(
        autonomy_value=autonomy(len(trace.interventions), trace.testing_time),
        interventions=len(trace.interventions),
        testing_time=trace.testing_time,
        reward_events=events,
        mean_reward=sum(rewards) / len(rewards),
        laps_completed=laps,
        config=config or {},
    )


@dataclass
class ComparisonTable:
    budget: int
    seeds: list
    checkpoints: list                 # shared step axis
    series: dict                      # method -> seed -> list of row dicts
    reports: dict                     # method -> seed -> EvalReport
    track_hash: str
    reward_params: RewardParams

    def series_values(self, method, seed, column="cum_reward_events"):
        return [row[column] for row in self.series[method][seed]]


def _atomic_write(path, write_fn):
    tmp_fd, tmp_path = tempfile.mkstemp(dir=os.path.dirname(os.path.abspath(path)) or ".")
    try:
        with os.fdopen(tmp_fd, "w", newline="") as fh:
            write_fn(fh)
        os.replace(tmp_path, path)
    except BaseException:
        if os.path.exists(tmp_path):
            os.unlink(tmp_path)
        raise


def compare(trk: track_mod.TrackSpec, demos: DemoSet, budget, seeds,
            methods=METHODS, sim_config: SimConfig = SimConfig(),
            reward_params: RewardParams = RewardParams(),
            ddpg_config: DdpgConfig = DdpgConfig(),
            bc_config: BcConfig = BcConfig(),
            eval_duration=600.0, eval_gains: DriveGains = DriveGains(),
            out_dir=None, log_interval=1000) -> ComparisonTable:
    """Train and evaluate each method per seed under one shared budget, track,
    and reward configuration.

    pure_il consumes no RL steps: its checkpoint series is the flat
    demonstration event count. Optionally writes comparison.csv,
    reports.json, and figure4.csv into ``out_dir``.
    """
    if budget <= 0:
        raise ValueError("budget must be positive")
    if not seeds:
        raise ValueError("need at least one seed")
    unknown = set(methods) - set(METHODS)
    if unknown:
        raise ValueError(f"unknown methods: {sorted(unknown)}")

    checkpoints = list(range(log_interval, budget + 1, log_interval))
    if not checkpoints or checkpoints[-1] != budget:
        checkpoints.append(budget)
    demo_events = count_events(demos.rewards(), reward_params)
    track_hash = trk.hash()
    if demos.track_hash != track_hash:
        raise ValueError("demo set was recorded on a different track")

    series = {m: {} for m in methods}
    reports = {m: {} for m in methods}
    logs = {m: {} for m in methods}

    for seed in seeds:
        for method in methods:
            env = DriveEnv(trk, SimConfig(dt=sim_config.dt,
                                          max_episode_steps=sim_config.max_episode_steps,
                                          rng_seed=seed,
                                          vehicle_half_size=sim_config.vehicle_half_size),
                           reward_params)
            cfg_dict = {"method": method, "seed": seed, "budget": budget,
                        "track_hash": track_hash,
                        "reward": reward_params.to_json_dict()}
            if method == "pure_il":
                policy, _ = train_bc(demos, BcConfig(
                    epochs=bc_config.epochs, batch_size=bc_config.batch_size,
                    learning_rate=bc_config.learning_rate, seed=seed,
                    train_fraction=bc_config.train_fraction,
                    hidden_sizes=bc_config.hidden_sizes))
                rows = [{"step": s, "cum_reward_events": demo_events,
                         "cum_reward_events_rl": 0, "laps": 0}
                        for s in checkpoints]
            else:
                cfg = DdpgConfig(**{**ddpg_config.to_json_dict(),
                                    "seed": seed,
                                    "demo_seed": method == "combined",
                                    "bc_pretrain": method == "combined"})
                agent, log = train(env, cfg,
                                   demos=demos if method == "combined" else None,
                                   budget=budget, log_interval=log_interval)
                policy = agent.policy()
                logs[method][seed] = log
                rows = [{"step": r["step"],
                         "cum_reward_events": r["cum_reward_events"],
                         "cum_reward_events_rl": r["cum_reward_events_rl"],
                         "laps": r["laps"]} for r in log.rows]
            series[method][seed] = rows

            eval_env = DriveEnv(trk, SimConfig(dt=sim_config.dt,
                                               max_episode_steps=sim_config.max_episode_steps,
                                               rng_seed=seed + 500_000,
                                               vehicle_half_size=sim_config.vehicle_half_size),
                                reward_params)
            trace = drive(eval_env, policy, eval_gains, duration=eval_duration)
            reports[method][seed] = summarize(trace, reward_params, trk, cfg_dict)

    table = ComparisonTable(budget=budget, seeds=list(seeds),
                            checkpoints=checkpoints, series=series,
                            reports=reports, track_hash=track_hash,
                            reward_params=reward_params)
    if out_dir is not None:
        write_outputs(table, out_dir)
    return table


def write_outputs(table: ComparisonTable, out_dir):
    os.makedirs(out_dir, exist_ok=True)

    def write_comparison(fh):
        writer = csv.writer(fh)
        writer.writerow(["method", "seed", "step", "cum_reward_events",
                         "cum_reward_events_rl", "laps"])
        for method, per_seed in table.series.items():
            for seed, rows in per_seed.items():
                for row in rows:
                    writer.writerow([method, seed, row["step"],
                                     row["cum_reward_events"],
                                     row["cum_reward_events_rl"], row["laps"]])
    _atomic_write(os.path.join(out_dir, "comparison.csv"), write_comparison)

    def write_reports(fh):
        doc = {m: {str(s): r.to_json_dict() for s, r in per_seed.items()}
               for m, per_seed in table.reports.items()}
        json.dump({"budget": table.budget, "seeds": table.seeds,
                   "track_hash": table.track_hash,
                   "reward_params": table.reward_params.to_json_dict(),
                   "reports": doc}, fh, indent=2)
    _atomic_write(os.path.join(out_dir, "reports.json"), write_reports)

    def write_figure(fh):
        writer = csv.writer(fh)
        writer.writerow(["method", "seed", "step", "cum_reward_events"])
        for method, per_seed in table.series.items():
            for seed, rows in per_seed.items():
                for row in rows:
                    writer.writerow([method, seed, row["step"],
                                     row["cum_reward_events"]])
    _atomic_write(os.path.join(out_dir, "figure4.csv"), write_figure)
