"""Command-line entry point: record -> train-il -> train-rl -> eval -> compare.

Configuration comes from an optional JSON file (``--config`` or the
DEMODRIVE_CONFIG environment variable) mirroring GlobalConfig; individual
flags override the file. All file outputs are written atomically.
"""

from __future__ import annotations

import argparse
import asyncio
import csv
import dataclasses
import json
import os
import sys
import tempfile

import numpy as np

from . import demos as demos_mod
from . import evaluate as evaluate_mod
from . import rl as rl_mod
from . import teleop as teleop_mod
from . import track as track_mod
from .deploy import DriveGains, drive
from .imitation import BcConfig, Policy, train_bc
from .reward import RewardParams
from .sim import DriveEnv, SimConfig

CONFIG_ENV_VAR = "DEMODRIVE_CONFIG"
CONFIG_SECTIONS = {"track", "sim", "reward", "bc", "ddpg", "gains", "out_dir"}


class CliError(Exception):
    """Validation failure surfaced as a one-line diagnostic, exit code 1."""


@dataclasses.dataclass
class GlobalConfig:
    track: str = "default"
    sim: SimConfig = dataclasses.field(default_factory=SimConfig)
    reward: RewardParams = dataclasses.field(default_factory=RewardParams)
    bc: BcConfig = dataclasses.field(default_factory=BcConfig)
    ddpg: rl_mod.DdpgConfig = dataclasses.field(default_factory=rl_mod.DdpgConfig)
    gains: DriveGains = dataclasses.field(default_factory=DriveGains)
    out_dir: str = "./results"

    @classmethod
    def from_json_dict(cls, doc):
        unknown = set(doc) - CONFIG_SECTIONS
        if unknown:
            raise CliError(f"unknown config keys: {sorted(unknown)}")
        kwargs = {}
        if "track" in doc:
            kwargs["track"] = doc["track"]
        if "out_dir" in doc:
            kwargs["out_dir"] = doc["out_dir"]
        try:
            for key, factory in (("sim", SimConfig), ("reward", RewardParams),
                                 ("bc", BcConfig), ("ddpg", rl_mod.DdpgConfig),
                                 ("gains", DriveGains)):
                if key in doc:
                    kwargs[key] = factory.from_json_dict(doc[key])
        except (TypeError, ValueError) as exc:
            raise CliError(f"invalid config: {exc}") from exc
        return cls(**kwargs)


def load_config(path):
    if path is None:
        path = os.environ.get(CONFIG_ENV_VAR)
    if path is None:
        return GlobalConfig()
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise CliError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise CliError(f"config {path} is not valid JSON: {exc}") from exc
    return GlobalConfig.from_json_dict(doc)


def resolve_track(name_or_path):
    if name_or_path in (None, "default"):
        return track_mod.default_track()
    try:
        return track_mod.TrackSpec.load(name_or_path)
    except (OSError, track_mod.TrackError) as exc:
        raise CliError(f"cannot load track {name_or_path}: {exc}") from exc


def apply_reward_overrides(params: RewardParams, args) -> RewardParams:
    doc = params.to_json_dict()
    for flag, key in (("di", "d_i"), ("vi", "v_i"), ("wd", "w_d"),
                      ("ws", "w_s"), ("event_threshold", "event_threshold")):
        value = getattr(args, flag, None)
        if value is not None:
            doc[key] = value
    try:
        return RewardParams.from_json_dict(doc)
    except ValueError as exc:
        raise CliError(f"invalid reward parameters: {exc}") from exc


def atomic_write_text(path, text):
    tmp_fd, tmp_path = tempfile.mkstemp(dir=os.path.dirname(os.path.abspath(path)) or ".")
    try:
        with os.fdopen(tmp_fd, "w") as fh:
            fh.write(text)
        os.replace(tmp_path, path)
    except BaseException:
        if os.path.exists(tmp_path):
            os.unlink(tmp_path)
        raise


def parse_gains(text, base: DriveGains) -> DriveGains:
    try:
        speed_gain, steering_gain, steering_bias = (float(v) for v in text.split(","))
        return DriveGains(speed_gain, steering_gain, steering_bias,
                          base.steering_smoothing_alpha)
    except ValueError as exc:
        raise CliError(f"--gains expects 'speed,steer,bias', got {text!r}") from exc


def build_parser():
    parser = argparse.ArgumentParser(
        prog="demodrive",
        description="2D driving simulator and IL/RL training lab")
    parser.add_argument("--config", help="global JSON config file "
                        f"(or ${CONFIG_ENV_VAR})")
    parser.add_argument("--track", help="track JSON file or 'default'")
    parser.add_argument("--seed", type=int, help="override RNG seed")
    parser.add_argument("--out-dir", help="output directory (default ./results)")
    for flag, help_text in (("--di", "ideal distance to edge (m)"),
                            ("--vi", "ideal speed (m/s)"),
                            ("--wd", "distance reward weight"),
                            ("--ws", "speed reward weight"),
                            ("--event-threshold", "reward-event threshold")):
        parser.add_argument(flag, type=float, help=help_text)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("record", help="serve the live teleop recorder")
    p.add_argument("--port", type=int, default=teleop_mod.DEFAULT_PORT)
    p.add_argument("--out", default="session.demos.jsonl")

    p = sub.add_parser("expert-record",
                       help="record a scripted-expert demo set (no human needed)")
    p.add_argument("--samples", type=int, default=331)
    p.add_argument("--out", required=True)
    p.add_argument("--spawn", type=float, default=0.0)
    p.add_argument("--lookahead", type=float, default=0.15)

    p = sub.add_parser("train-il", help="behavior-clone a policy from demos")
    p.add_argument("--demos", required=True)
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--out", required=True)
    p.add_argument("--report", help="per-epoch MSE CSV")

    p = sub.add_parser("train-rl", help="train DDPG (optionally demo-bootstrapped)")
    p.add_argument("--budget", type=int, required=True)
    p.add_argument("--demos")
    p.add_argument("--bc-pretrain", action=argparse.BooleanOptionalAction,
                   default=True)
    p.add_argument("--demo-seed", action=argparse.BooleanOptionalAction,
                   default=True)
    p.add_argument("--out", required=True)
    p.add_argument("--log", help="training checkpoint CSV")

    p = sub.add_parser("eval", help="drive a trained policy and report metrics")
    p.add_argument("--policy", required=True)
    p.add_argument("--duration", type=float, default=600.0)
    p.add_argument("--gains", help="speed_gain,steering_gain,steering_bias")
    p.add_argument("--trace", help="per-step trace JSONL")
    p.add_argument("--report", help="metrics report JSON")

    p = sub.add_parser("compare",
                       help="train and evaluate pure IL / pure RL / combined")
    p.add_argument("--budget", type=int, default=50_000)
    p.add_argument("--seeds", default="1,2,3")
    p.add_argument("--demos", required=True)
    p.add_argument("--eval-duration", type=float, default=600.0)

    p = sub.add_parser("relabel",
                       help="recompute frozen demo rewards with current params")
    p.add_argument("--demos", required=True)
    p.add_argument("--out", required=True)
    return parser


def _load_demos(path, expected_track_hash=None):
    try:
        return demos_mod.load(path, expected_track_hash)
    except OSError as exc:
        raise CliError(f"cannot read demos {path}: {exc}") from exc
    except demos_mod.DatasetError as exc:
        raise CliError(f"invalid demo file {path}: {exc}") from exc


def cmd_record(args, cfg, trk):
    async def run():
        await teleop_mod.serve(trk, cfg.sim, cfg.reward, port=args.port,
                               out_path=args.out)
    try:
        asyncio.run(run())
    except KeyboardInterrupt:
        pass
    return 0


def cmd_expert_record(args, cfg, trk):
    seed = args.seed if args.seed is not None else cfg.sim.rng_seed
    demo_set = demos_mod.record_expert(trk, args.samples, cfg.sim, cfg.reward,
                                       seed=seed, spawn=args.spawn,
                                       lookahead=args.lookahead)
    demos_mod.save(demo_set, args.out)
    print(f"wrote {len(demo_set)} samples to {args.out}")
    return 0


def cmd_train_il(args, cfg, trk):
    demo_set = _load_demos(args.demos, trk.hash())
    bc_doc = cfg.bc.to_json_dict()
    if args.epochs is not None:
        bc_doc["epochs"] = args.epochs
    if args.batch is not None:
        bc_doc["batch_size"] = args.batch
    if args.lr is not None:
        bc_doc["learning_rate"] = args.lr
    if args.seed is not None:
        bc_doc["seed"] = args.seed
    policy, report = train_bc(demo_set, BcConfig.from_json_dict(bc_doc))
    policy.save(args.out)
    if args.report:
        lines = ["epoch,train_mse,test_mse"]
        lines += [f"{r['epoch']},{r['train_mse']!r},{r['test_mse']!r}"
                  for r in report]
        atomic_write_text(args.report, "\n".join(lines) + "\n")
    print(f"trained {len(report)} epochs; best test MSE "
          f"{min(r['test_mse'] for r in report):.6f}; model -> {args.out}")
    return 0


def cmd_train_rl(args, cfg, trk):
    seed = args.seed if args.seed is not None else cfg.ddpg.seed
    ddpg_doc = cfg.ddpg.to_json_dict()
    ddpg_doc.update(seed=seed, bc_pretrain=args.bc_pretrain,
                    demo_seed=args.demo_seed)
    config = rl_mod.DdpgConfig.from_json_dict(ddpg_doc)
    demo_set = _load_demos(args.demos, trk.hash()) if args.demos else None
    env = DriveEnv(trk, SimConfig(dt=cfg.sim.dt,
                                  max_episode_steps=cfg.sim.max_episode_steps,
                                  rng_seed=seed,
                                  vehicle_half_size=cfg.sim.vehicle_half_size),
                   cfg.reward)
    agent, log = rl_mod.train(env, config, demos=demo_set, budget=args.budget)
    agent.policy().save(args.out)
    if args.log:
        log.save_csv(args.log)
    last = log.rows[-1] if log.rows else {}
    print(f"trained {args.budget} steps; reward events "
          f"{last.get('cum_reward_events', 0)}; actor -> {args.out}")
    return 0


def cmd_eval(args, cfg, trk):
    try:
        policy = Policy.load(args.policy)
    except OSError as exc:
        raise CliError(f"cannot read policy {args.policy}: {exc}") from exc
    gains = parse_gains(args.gains, cfg.gains) if args.gains else cfg.gains
    seed = args.seed if args.seed is not None else cfg.sim.rng_seed
    env = DriveEnv(trk, SimConfig(dt=cfg.sim.dt,
                                  max_episode_steps=cfg.sim.max_episode_steps,
                                  rng_seed=seed,
                                  vehicle_half_size=cfg.sim.vehicle_half_size),
                   cfg.reward)
    trace = drive(env, policy, gains, duration=args.duration)
    report = evaluate_mod.summarize(trace, cfg.reward, trk,
                                    {"policy": args.policy, "seed": seed,
                                     "gains": gains.to_json_dict()})
    if args.trace:
        lines = []
        t = 0.0
        for s in trace.steps:
            t += trace.dt
            lines.append(json.dumps({
                "t": t, "pose": [s.pose.x, s.pose.y, s.pose.heading],
                "speed": s.speed, "reward": s.reward,
                "dist_to_edge": s.dist_to_edge, "off_track": s.off_track}))
        for iv in trace.interventions:
            lines.append(json.dumps({"intervention": True, "t": iv.time,
                                     "step_index": iv.step_index}))
        atomic_write_text(args.trace, "\n".join(lines) + "\n")
    if args.report:
        atomic_write_text(args.report,
                          json.dumps(report.to_json_dict(), indent=2) + "\n")
    print(f"autonomy {report.autonomy_value:.1f}% | "
          f"{report.interventions} interventions | "
          f"{report.laps_completed} laps | "
          f"{report.reward_events} reward events")
    return 0


def cmd_compare(args, cfg, trk):
    try:
        seeds = [int(s) for s in args.seeds.split(",") if s.strip()]
    except ValueError as exc:
        raise CliError(f"--seeds expects comma-separated integers: {exc}") from exc
    if not seeds:
        raise CliError("--seeds must name at least one seed")
    demo_set = _load_demos(args.demos, trk.hash())
    out_dir = args.out_dir if args.out_dir else cfg.out_dir
    table = evaluate_mod.compare(trk, demo_set, args.budget, seeds,
                                 sim_config=cfg.sim, reward_params=cfg.reward,
                                 ddpg_config=cfg.ddpg, bc_config=cfg.bc,
                                 eval_duration=args.eval_duration,
                                 eval_gains=cfg.gains, out_dir=out_dir)
    for method in table.series:
        for seed in seeds:
            report = table.reports[method][seed]
            print(f"{method} seed {seed}: autonomy {report.autonomy_value:.1f}% "
                  f"laps {report.laps_completed} "
                  f"events {table.series[method][seed][-1]['cum_reward_events']}")
    print(f"outputs -> {out_dir}")
    return 0


def cmd_relabel(args, cfg, trk):
    demo_set = _load_demos(args.demos)
    relabeled = demos_mod.DemoSet(dict(demo_set.meta))
    relabeled.meta["relabeled_with"] = cfg.reward.to_json_dict()
    # Replay each action one step from its recorded pose so the new label is
    # computed exactly the way the original recorder computed it.
    env = DriveEnv(trk, cfg.sim, cfg.reward)
    env.reset()
    for s in demo_set.samples:
        env.place_pose(s.pose, speed=s.obs[-1] * cfg.reward.v_i)
        result = env.step(s.action)
        relabeled.append(demos_mod.DemoSample(t=s.t, obs=s.obs, action=s.action,
                                              reward=result.reward, pose=s.pose))
    demos_mod.save(relabeled, args.out)
    print(f"relabeled {len(relabeled)} samples -> {args.out}")
    return 0


COMMANDS = {
    "record": cmd_record,
    "expert-record": cmd_expert_record,
    "train-il": cmd_train_il,
    "train-rl": cmd_train_rl,
    "eval": cmd_eval,
    "compare": cmd_compare,
    "relabel": cmd_relabel,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
        cfg.reward = apply_reward_overrides(cfg.reward, args)
        trk = resolve_track(args.track if args.track else cfg.track)
        return COMMANDS[args.command](args, cfg, trk)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (demos_mod.DatasetError, track_mod.TrackError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
