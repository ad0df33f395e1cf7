"""End-to-end experiment driver.

Trains (or loads) a policy, harvests factual states along its own
rollouts, runs the explanation methods over every factual, and
aggregates per-method means into a metrics table plus a per-record log.
Every stage derives its randomness from the experiment seed, so a rerun
with the same configuration emits byte-identical summary CSVs.
"""
from __future__ import annotations

import csv
import json
import logging
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

from .baseline import BaselineConfig, score_baseline, sgen_explain
from .envs import make_env
from .envs.base import Environment, Trajectory, TrajectoryStep
from .generators import (
    Direction,
    ExplanationRequest,
    advance_explain,
    explanation_set_to_jsonable,
    rewind_explain,
)
from .optimizer import MooConfig
from .policy import QFunction, TrainingConfig, greedy_action, load_qtable, train
from .properties import diversity
from .seeding import draw_step_seed, rng_from, stable_seed

log = logging.getLogger(__name__)

METHODS = ("advance", "rewind", "sgen1", "sgen3", "sgen5")
_SGEN_COUNTS = {"sgen1": 1, "sgen3": 3, "sgen5": 5}

# Metric rows of the summary report, in emission order.
METRIC_FIELDS = (
    "generated_pct",
    "validity",
    "temporal_distance",
    "fidelity",
    "stochastic_uncertainty",
    "exceptionality",
    "gain",
    "diversity",
    "path_not_found",
    "records",
    "generated",
)


@dataclass(frozen=True)
class FactualRecord:
    record_id: int
    trajectory_id: int
    trajectory: Trajectory
    index: int
    state: object
    withheld_action: int


@dataclass(frozen=True)
class MethodMetrics:
    """Aggregated means over records where generation succeeded."""

    method: str
    records: int
    generated: int
    generated_pct: float
    validity: float | None = None
    temporal_distance: float | None = None
    fidelity: float | None = None
    stochastic_uncertainty: float | None = None
    exceptionality: float | None = None
    gain: float | None = None
    diversity: float | None = None
    path_not_found: int = 0
    wall_time: float = field(default=0.0, compare=False)

    def metric(self, name: str):
        return getattr(self, name)


@dataclass(frozen=True)
class MetricsTable:
    environment: str
    methods: tuple[MethodMetrics, ...]

    def by_method(self, name: str) -> MethodMetrics:
        for m in self.methods:
            if m.method == name:
                return m
        raise KeyError(name)


@dataclass(frozen=True)
class ExperimentConfig:
    env_name: str = "gridworld"
    env_overrides: dict | None = None
    training: TrainingConfig = field(default_factory=TrainingConfig)
    policy_path: str | None = None  # load instead of training
    per_action: int = 10
    methods: tuple[str, ...] = METHODS
    horizon: int = 3
    moo: MooConfig = field(default_factory=MooConfig)
    baseline: BaselineConfig = field(default_factory=BaselineConfig)
    su_samples: int = 30
    su_report_samples: int = 200
    collect_epsilon: float = 0.1
    seed: int = 0
    output_dir: str | None = None

    def __post_init__(self):
        if self.per_action < 1:
            raise ValueError("per_action must be at least 1")
        if not self.methods:
            raise ValueError("select at least one method")
        unknown = set(self.methods) - set(METHODS)
        if unknown:
            raise ValueError(f"unknown methods {sorted(unknown)}; valid: {METHODS}")


def run_episode(
    q: QFunction, env: Environment, rng, epsilon: float = 0.0
) -> Trajectory:
    """One recorded epsilon-greedy episode, capped at the episode limit."""
    initial = env.initial_state()
    state = initial
    steps = []
    for _ in range(env.max_episode_steps):
        if epsilon > 0.0 and rng.random() < epsilon:
            action = int(rng.integers(env.n_actions))
        else:
            action = greedy_action(q, state)
        seed = draw_step_seed(rng)
        tr = env.step(state, action, seed)
        steps.append(TrajectoryStep(state, action, tr.reward, seed, tr.next_state))
        state = tr.next_state
        if tr.terminal:
            break
    return Trajectory(env.name, initial, tuple(steps))


def collect_factuals(
    q: QFunction,
    env: Environment,
    per_action: int,
    horizon: int,
    seed: int,
    epsilon: float = 0.1,
    max_episodes: int = 2000,
) -> list[FactualRecord]:
    """Harvest factual states along the policy's own rollouts.

    For every action, collects ``per_action`` distinct (trajectory,
    index) pairs whose state does not choose that action greedily; each
    record keeps enough recorded history for the backward method
    (``index >= horizon``). Rollouts are epsilon-greedy to diversify the
    visited states. A shortfall after ``max_episodes`` episodes is
    logged, not fatal.
    """
    if per_action < 1:
        raise ValueError("per_action must be at least 1")
    rng = rng_from(seed)
    needed = {a: per_action for a in range(env.n_actions)}
    records: list[FactualRecord] = []
    record_id = 0
    for episode in range(max_episodes):
        if all(v == 0 for v in needed.values()):
            break
        trajectory = run_episode(q, env, rng, epsilon)
        for n in range(horizon, len(trajectory)):
            s_n = trajectory.state_at(n)
            policy_action = greedy_action(q, s_n)
            eligible = [a for a in range(env.n_actions) if a != policy_action and needed[a] > 0]
            if not eligible:
                continue
            withheld = min(eligible, key=lambda a: (-needed[a], a))
            needed[withheld] -= 1
            records.append(FactualRecord(record_id, episode, trajectory, n, s_n, withheld))
            record_id += 1
    shortfall = {a: v for a, v in needed.items() if v > 0}
    if shortfall:
        log.warning("factual collection shortfall: %s", shortfall)
    return records


def save_factuals(path, env: Environment, records: list[FactualRecord]) -> None:
    """Trajectories plus factual records in one line-delimited file."""
    with open(path, "w", encoding="utf-8") as fh:
        seen: set[int] = set()
        for rec in records:
            if rec.trajectory_id not in seen:
                seen.add(rec.trajectory_id)
                header = {
                    "kind": "trajectory",
                    "id": rec.trajectory_id,
                    "env": rec.trajectory.env_name,
                    "initial_state": env.state_to_jsonable(rec.trajectory.initial_state),
                }
                fh.write(json.dumps(header, sort_keys=True) + "\n")
                for i, step in enumerate(rec.trajectory.steps):
                    row = {
                        "kind": "step",
                        "trajectory_id": rec.trajectory_id,
                        "step_index": i,
                        "state": env.state_to_jsonable(step.state),
                        "action": step.action,
                        "reward": step.reward,
                        "step_seed": step.step_seed,
                        "next_state": env.state_to_jsonable(step.next_state),
                    }
                    fh.write(json.dumps(row, sort_keys=True) + "\n")
        for rec in records:
            row = {
                "kind": "record",
                "record_id": rec.record_id,
                "trajectory_id": rec.trajectory_id,
                "index": rec.index,
                "withheld_action": rec.withheld_action,
            }
            fh.write(json.dumps(row, sort_keys=True) + "\n")


def load_factuals(path, env: Environment) -> list[FactualRecord]:
    from .envs.base import load_trajectories

    trajectories = {i: t for i, t in enumerate(load_trajectories(path, env))}
    # load_trajectories returns them ordered by id, but ids may be sparse;
    # rebuild the id map from the raw file for safety.
    id_order: list[int] = []
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            row = json.loads(line)
            if row.get("kind") == "trajectory":
                id_order.append(row["id"])
            elif row.get("kind") == "record":
                rows.append(row)
    by_id = {tid: trajectories[pos] for pos, tid in enumerate(sorted(id_order))}
    records = []
    for row in sorted(rows, key=lambda r: r["record_id"]):
        traj = by_id[row["trajectory_id"]]
        records.append(
            FactualRecord(
                record_id=int(row["record_id"]),
                trajectory_id=int(row["trajectory_id"]),
                trajectory=traj,
                index=int(row["index"]),
                state=traj.state_at(int(row["index"])),
                withheld_action=int(row["withheld_action"]),
            )
        )
    return records


@dataclass(frozen=True)
class RecordOutcome:
    """Per-(record, method) log row; failures carry an error message."""

    record_id: int
    method: str
    success: bool
    n_candidates: int
    validity: float | None
    temporal_distance: float | None
    stochastic_uncertainty: float | None
    fidelity: float | None
    exceptionality: float | None
    gain: float | None
    diversity: float | None
    path_not_found: int
    wall_time: float
    error: str | None = None


def _mean(values) -> float | None:
    values = list(values)
    return sum(values) / len(values) if values else None


def _outcome_from_scores(
    env: Environment,
    record: FactualRecord,
    method: str,
    states,
    score_list,
    gains,
    path_not_found: int,
    wall_time: float,
) -> RecordOutcome:
    if not states:
        return RecordOutcome(
            record.record_id, method, False, 0,
            None, None, None, None, None, None, None,
            path_not_found, wall_time,
        )
    factual_features = env.encode_features(record.state)
    vectors = [env.encode_features(s) for s in states]
    spread = diversity(factual_features, vectors).pairwise
    return RecordOutcome(
        record_id=record.record_id,
        method=method,
        success=True,
        n_candidates=len(states),
        validity=_mean(s.validity for s in score_list),
        temporal_distance=_mean(s.temporal_distance for s in score_list),
        stochastic_uncertainty=_mean(s.stochastic_uncertainty for s in score_list),
        fidelity=_mean(s.fidelity for s in score_list),
        exceptionality=_mean(s.exceptionality for s in score_list),
        gain=_mean(gains),
        diversity=spread,
        path_not_found=path_not_found,
        wall_time=wall_time,
    )


def _run_method_on_record(
    q: QFunction,
    env: Environment,
    config: ExperimentConfig,
    method: str,
    record: FactualRecord,
) -> RecordOutcome:
    seed = stable_seed(config.seed, "method", method, record.record_id)
    start = time.perf_counter()
    if method in ("advance", "rewind"):
        direction = Direction.ADVANCE if method == "advance" else Direction.REWIND
        request = ExplanationRequest(
            index=record.index,
            direction=direction,
            horizon=config.horizon,
            moo=config.moo,
            su_samples=config.su_samples,
            su_report_samples=config.su_report_samples,
            seed=seed,
        )
        runner = advance_explain if method == "advance" else rewind_explain
        result = runner(q, env, record.trajectory, request)
        wall = time.perf_counter() - start
        return _outcome_from_scores(
            env,
            record,
            method,
            [c.state for c in result.candidates],
            [c.scores for c in result.candidates],
            [c.feature_gain for c in result.candidates],
            0,
            wall,
        )
    # baseline family
    baseline_cfg = replace(
        config.baseline, diversity_count=_SGEN_COUNTS[method], seed=stable_seed(seed, "sgen")
    )
    result = sgen_explain(q, env, record.state, baseline_cfg)
    scored = score_baseline(
        q,
        env,
        record.state,
        result,
        config.horizon,
        baseline_cfg,
        config.su_report_samples,
        stable_seed(seed, "scoring"),
    )
    wall = time.perf_counter() - start
    return _outcome_from_scores(
        env,
        record,
        method,
        list(result.states),
        [s.scores for s in scored],
        list(result.gains),
        sum(1 for s in scored if not s.path_found),
        wall,
    )


def _aggregate(method: str, outcomes: list[RecordOutcome]) -> MethodMetrics:
    generated = [o for o in outcomes if o.success]
    return MethodMetrics(
        method=method,
        records=len(outcomes),
        generated=len(generated),
        generated_pct=100.0 * len(generated) / len(outcomes) if outcomes else 0.0,
        validity=_mean(o.validity for o in generated),
        temporal_distance=_mean(o.temporal_distance for o in generated),
        fidelity=_mean(o.fidelity for o in generated),
        stochastic_uncertainty=_mean(o.stochastic_uncertainty for o in generated),
        exceptionality=_mean(o.exceptionality for o in generated),
        gain=_mean(o.gain for o in generated),
        diversity=_mean(o.diversity for o in generated),
        path_not_found=sum(o.path_not_found for o in outcomes),
        wall_time=sum(o.wall_time for o in outcomes),
    )


def run_experiment(config: ExperimentConfig) -> MetricsTable:
    """Run every configured method over every collected factual state.

    Per-record failures are logged and counted against the generation
    percentage; they never abort the run. When ``config.output_dir`` is
    set, writes ``summary.csv``, ``summary.md``, and ``records.jsonl``.
    """
    env = make_env(config.env_name, config.env_overrides)
    if config.policy_path:
        q = load_qtable(config.policy_path, env)
    else:
        q = train(env, config.training)
    records = collect_factuals(
        q,
        env,
        config.per_action,
        config.horizon,
        stable_seed(config.seed, "collect"),
        config.collect_epsilon,
    )
    all_outcomes: list[RecordOutcome] = []
    per_method: list[MethodMetrics] = []
    for method in config.methods:
        outcomes = []
        for record in records:
            try:
                outcome = _run_method_on_record(q, env, config, method, record)
            except Exception as exc:  # per-record failures are data, not crashes
                log.warning("record %d method %s failed: %s", record.record_id, method, exc)
                outcome = RecordOutcome(
                    record.record_id, method, False, 0,
                    None, None, None, None, None, None, None,
                    0, 0.0, error=str(exc),
                )
            outcomes.append(outcome)
        all_outcomes.extend(outcomes)
        per_method.append(_aggregate(method, outcomes))
    table = MetricsTable(env.name, tuple(per_method))
    if config.output_dir:
        out = Path(config.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        emit_report(table, "csv", out / "summary.csv")
        emit_report(table, "markdown", out / "summary.md")
        write_record_log(out / "records.jsonl", all_outcomes)
    return table


def write_record_log(path, outcomes: list[RecordOutcome]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for o in outcomes:
            row = {
                "record_id": o.record_id,
                "method": o.method,
                "success": o.success,
                "n_candidates": o.n_candidates,
                "validity": o.validity,
                "temporal_distance": o.temporal_distance,
                "stochastic_uncertainty": o.stochastic_uncertainty,
                "fidelity": o.fidelity,
                "exceptionality": o.exceptionality,
                "gain": o.gain,
                "diversity": o.diversity,
                "path_not_found": o.path_not_found,
                "wall_time": o.wall_time,
                "error": o.error,
            }
            fh.write(json.dumps(row, sort_keys=True) + "\n")


def read_record_log(path) -> list[RecordOutcome]:
    outcomes = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            row = json.loads(line)
            outcomes.append(
                RecordOutcome(
                    record_id=row["record_id"],
                    method=row["method"],
                    success=row["success"],
                    n_candidates=row["n_candidates"],
                    validity=row["validity"],
                    temporal_distance=row["temporal_distance"],
                    stochastic_uncertainty=row["stochastic_uncertainty"],
                    fidelity=row["fidelity"],
                    exceptionality=row["exceptionality"],
                    gain=row["gain"],
                    diversity=row["diversity"],
                    path_not_found=row["path_not_found"],
                    wall_time=row["wall_time"],
                    error=row.get("error"),
                )
            )
    return outcomes


def _format_value(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)  # shortest exact round-trip
    return str(value)


def emit_report(table: MetricsTable, fmt: str, path) -> Path:
    """Write the metrics table; returns the output path.

    CSV is long-form (one row per metric per method) and round-trips
    losslessly through :func:`read_report_csv`. Markdown mirrors the
    metrics-as-rows layout with one header row and one row per metric.
    Wall time is intentionally left out: it is the one nondeterministic
    quantity, and summary files must be identical across equal-seed
    runs (it still appears in the per-record log).
    """
    path = Path(path)
    if fmt == "csv":
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["environment", "method", "metric", "value"])
            for m in table.methods:
                for name in METRIC_FIELDS:
                    writer.writerow([table.environment, m.method, name, _format_value(m.metric(name))])
    elif fmt == "markdown":
        with open(path, "w", encoding="utf-8") as fh:
            header = ["Metric"] + [m.method for m in table.methods]
            fh.write("| " + " | ".join(header) + " |\n")
            fh.write("|" + "---|" * len(header) + "\n")
            for name in METRIC_FIELDS:
                cells = [name]
                for m in table.methods:
                    value = m.metric(name)
                    if value is None:
                        cells.append("-")
                    elif isinstance(value, float):
                        cells.append(f"{value:.4f}")
                    else:
                        cells.append(str(value))
                fh.write("| " + " | ".join(cells) + " |\n")
    else:
        raise ValueError(f"unknown report format {fmt!r}")
    return path


def read_report_csv(path) -> MetricsTable:
    """Inverse of ``emit_report(..., 'csv', ...)``."""
    rows: dict[str, dict[str, str]] = {}
    environment = ""
    order: list[str] = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != ["environment", "method", "metric", "value"]:
            raise ValueError(f"unexpected CSV header {header}")
        for environment, method, metric, value in reader:
            if method not in rows:
                rows[method] = {}
                order.append(method)
            rows[method][metric] = value
    methods = []
    for method in order:
        data = rows[method]

        def fval(name: str):
            raw = data.get(name, "")
            return None if raw == "" else float(raw)

        methods.append(
            MethodMetrics(
                method=method,
                records=int(data["records"]),
                generated=int(data["generated"]),
                generated_pct=float(data["generated_pct"]),
                validity=fval("validity"),
                temporal_distance=fval("temporal_distance"),
                fidelity=fval("fidelity"),
                stochastic_uncertainty=fval("stochastic_uncertainty"),
                exceptionality=fval("exceptionality"),
                gain=fval("gain"),
                diversity=fval("diversity"),
                path_not_found=int(data["path_not_found"]),
            )
        )
    return MetricsTable(environment, tuple(methods))


def explain_one(
    q: QFunction,
    env: Environment,
    trajectory: Trajectory,
    index: int,
    method: str,
    horizon: int = 3,
    moo: MooConfig | None = None,
    baseline: BaselineConfig | None = None,
    su_samples: int = 30,
    su_report_samples: int = 200,
    seed: int = 0,
) -> tuple[str, dict]:
    """One-off explanation for a recorded state; returns (text, payload)."""
    factual = trajectory.state_at(index)
    lines = [
        f"factual state (index {index}):",
        env.render(factual),
        f"chosen action: {env.action_names[greedy_action(q, factual)]}",
        "",
    ]
    if method in ("advance", "rewind"):
        direction = Direction.ADVANCE if method == "advance" else Direction.REWIND
        request = ExplanationRequest(
            index=index,
            direction=direction,
            horizon=horizon,
            moo=moo or MooConfig(),
            su_samples=su_samples,
            su_report_samples=su_report_samples,
            seed=seed,
        )
        runner = advance_explain if method == "advance" else rewind_explain
        result = runner(q, env, trajectory, request)
        payload = explanation_set_to_jsonable(env, result)
        lines.append(f"{len(result.candidates)} semifactual(s) on the Pareto front:")
        for i, cand in enumerate(payload["candidates"]):
            s = cand["scores"]
            lines.append(
                f"[{i}] actions={'-'.join(cand['action_names'])} gain={cand['feature_gain']:.3f} "
                f"validity={s['validity']} td={s['temporal_distance']:.4f} "
                f"su={s['stochastic_uncertainty']:.4f} fidelity={s['fidelity']:.4f} "
                f"exceptionality={s['exceptionality']:.4f}"
            )
            state = env.state_from_jsonable(cand["state"])
            lines.append(env.render(state))
    elif method in _SGEN_COUNTS:
        cfg = replace(
            baseline or BaselineConfig(),
            diversity_count=_SGEN_COUNTS[method],
            seed=stable_seed(seed, "sgen"),
        )
        result = sgen_explain(q, env, factual, cfg)
        scored = score_baseline(
            q, env, factual, result, horizon, cfg, su_report_samples, stable_seed(seed, "scoring")
        )
        payload = {
            "factual_state": env.state_to_jsonable(factual),
            "chosen_action": result.chosen_action,
            "chosen_action_name": env.action_names[result.chosen_action],
            "candidates": [
                {
                    "state": env.state_to_jsonable(st.state),
                    "actions": list(st.rollout.actions) if st.rollout else None,
                    "path_found": st.path_found,
                    "feature_gain": result.gains[i],
                    "scores": {
                        "validity": st.scores.validity,
                        "temporal_distance": st.scores.temporal_distance,
                        "stochastic_uncertainty": st.scores.stochastic_uncertainty,
                        "fidelity": st.scores.fidelity,
                        "exceptionality": st.scores.exceptionality,
                    },
                }
                for i, st in enumerate(scored)
            ],
        }
        lines.append(f"{len(scored)} baseline semifactual(s):")
        for i, st in enumerate(scored):
            flag = "" if st.path_found else " [PATH_NOT_FOUND]"
            s = st.scores
            lines.append(
                f"[{i}] gain={result.gains[i]:.3f} validity={s.validity} "
                f"td={s.temporal_distance:.4f} su={s.stochastic_uncertainty:.4f} "
                f"fidelity={s.fidelity:.4f} exceptionality={s.exceptionality:.4f}{flag}"
            )
            lines.append(env.render(st.state))
    else:
        raise ValueError(f"unknown method {method!r}; valid: {METHODS}")
    return "\n".join(lines), payload
