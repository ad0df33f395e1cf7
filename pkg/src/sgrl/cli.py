"""Command-line interface.

Subcommands: train a policy, collect factual states, explain a single
state, run the full evaluation, or run the built-in selftest. All
randomness flows from --seed.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .baseline import BaselineConfig
from .envs import load_trajectories, make_env
from .harness import (
    METHODS,
    ExperimentConfig,
    collect_factuals,
    explain_one,
    run_experiment,
    save_factuals,
)
from .optimizer import MooConfig
from .policy import TrainingConfig, load_qtable, save_qtable, train
from .seeding import stable_seed
from .selftest import run_selftest


def _add_env_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--env", default="gridworld", help="gridworld or frozen_lake")
    parser.add_argument("--env-config", help="JSON file with environment overrides")


def _build_env(args):
    return make_env(args.env, args.env_config)


def _cmd_train(args) -> int:
    env = _build_env(args)
    config = TrainingConfig(
        steps=args.steps,
        learning_rate=args.learning_rate,
        discount=args.discount,
        epsilon_start=args.epsilon_start,
        epsilon_end=args.epsilon_end,
        seed=args.seed,
    )
    q = train(env, config)
    save_qtable(args.out, q, env)
    print(f"trained {len(q)} states over {config.steps} steps -> {args.out}")
    return 0


def _cmd_collect(args) -> int:
    env = _build_env(args)
    q = load_qtable(args.policy, env)
    records = collect_factuals(
        q, env, args.per_action, args.k, stable_seed(args.seed, "collect"), args.epsilon
    )
    save_factuals(args.out, env, records)
    print(f"collected {len(records)} factual records -> {args.out}")
    return 0


def _cmd_explain(args) -> int:
    env = _build_env(args)
    q = load_qtable(args.policy, env)
    trajectories = load_trajectories(args.trajectory, env)
    if not trajectories:
        print("no trajectories in file", file=sys.stderr)
        return 1
    if not 0 <= args.trajectory_id < len(trajectories):
        print(f"trajectory id {args.trajectory_id} out of range", file=sys.stderr)
        return 1
    text, payload = explain_one(
        q,
        env,
        trajectories[args.trajectory_id],
        args.index,
        args.method,
        horizon=args.k,
        moo=MooConfig(generations=args.generations, population=args.population),
        su_samples=args.su_samples,
        su_report_samples=args.su_report_samples,
        seed=args.seed,
    )
    print(text)
    if args.json:
        Path(args.json).write_text(json.dumps(payload, indent=2, sort_keys=True), encoding="utf-8")
        print(f"wrote {args.json}")
    return 0


def _cmd_evaluate(args) -> int:
    overrides = None
    if args.env_config:
        with open(args.env_config, "r", encoding="utf-8") as fh:
            overrides = json.load(fh)
    config = ExperimentConfig(
        env_name=args.env,
        env_overrides=overrides,
        training=TrainingConfig(steps=args.training_steps, seed=args.training_seed),
        policy_path=args.policy,
        per_action=args.per_action,
        methods=tuple(args.methods.split(",")) if args.methods else METHODS,
        horizon=args.k,
        moo=MooConfig(generations=args.generations, population=args.population),
        baseline=BaselineConfig(),
        su_samples=args.su_samples,
        su_report_samples=args.su_report_samples,
        seed=args.seed,
        output_dir=args.out_dir,
    )
    table = run_experiment(config)
    for m in table.methods:
        pieces = [f"{m.method}: generated {m.generated}/{m.records} ({m.generated_pct:.2f}%)"]
        if m.validity is not None:
            pieces.append(f"validity={m.validity:.2f}")
        print("  ".join(pieces))
    print(f"reports in {args.out_dir}")
    return 0


def _cmd_selftest(args) -> int:
    results = run_selftest(args.seed)
    failed = 0
    for name, ok, detail in results:
        print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
        failed += 0 if ok else 1
    return 1 if failed else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sgrl",
        description="Semifactual explanations for reinforcement learning policies",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a tabular Q-learning policy")
    _add_env_args(p)
    p.add_argument("--steps", type=int, default=300_000)
    p.add_argument("--learning-rate", type=float, default=0.1)
    p.add_argument("--discount", type=float, default=0.95)
    p.add_argument("--epsilon-start", type=float, default=1.0)
    p.add_argument("--epsilon-end", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output Q-table file")
    p.set_defaults(fn=_cmd_train)

    p = sub.add_parser("collect", help="collect factual states to explain")
    _add_env_args(p)
    p.add_argument("--policy", required=True, help="Q-table file from `train`")
    p.add_argument("--per-action", type=int, default=10)
    p.add_argument("--k", type=int, default=3, help="search horizon")
    p.add_argument("--epsilon", type=float, default=0.1, help="collection exploration")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_collect)

    p = sub.add_parser("explain", help="explain one recorded state")
    _add_env_args(p)
    p.add_argument("--policy", required=True)
    p.add_argument("--trajectory", required=True, help="file from `collect`")
    p.add_argument("--trajectory-id", type=int, default=0)
    p.add_argument("--index", type=int, required=True)
    p.add_argument("--method", default="advance", choices=METHODS)
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--generations", type=int, default=25)
    p.add_argument("--population", type=int, default=24)
    p.add_argument("--su-samples", type=int, default=30)
    p.add_argument("--su-report-samples", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--json", help="also write the explanation set as JSON")
    p.set_defaults(fn=_cmd_explain)

    p = sub.add_parser("evaluate", help="full experiment with CSV/Markdown reports")
    _add_env_args(p)
    p.add_argument("--policy", help="optional pre-trained Q-table (skips training)")
    p.add_argument("--training-steps", type=int, default=300_000)
    p.add_argument("--training-seed", type=int, default=0)
    p.add_argument("--per-action", type=int, default=10)
    p.add_argument("--methods", help="comma-separated subset of " + ",".join(METHODS))
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--generations", type=int, default=25)
    p.add_argument("--population", type=int, default=24)
    p.add_argument("--su-samples", type=int, default=30)
    p.add_argument("--su-report-samples", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(fn=_cmd_evaluate)

    p = sub.add_parser("selftest", help="run the built-in oracle checks")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=_cmd_selftest)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
