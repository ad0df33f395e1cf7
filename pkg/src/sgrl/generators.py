"""Forward and backward semifactual search over action sequences.

Both directions evolve fixed-length action sequences with the
multi-objective optimizer. Executing a sequence yields up to one
candidate state per prefix length; candidates that change the policy's
chosen action, equal the factual state in feature space, or terminate
the episode are discarded. A sequence's fitness is the mean objective
vector of its surviving candidates, and the final explanation set is
the Pareto front over every candidate encountered during the search.

The forward search (``advance``) runs sequences from the factual state
under per-step seeds derived from the request seed. The backward search
(``rewind``) replays the recorded trajectory to the state ``horizon``
steps earlier and runs alternatives from there under the trajectory's
own recorded step seeds, so environment-driven events repeat when
timesteps align.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .envs.base import Environment, Trajectory, replay
from .optimizer import DiscreteSequenceProblem, Genome, Individual, MooConfig, evolve
from .policy import QFunction, greedy_action
from .properties import (
    PropertyScores,
    Rollout,
    execute_actions,
    exceptionality,
    fidelity,
    gain,
    stochastic_uncertainty,
    temporal_distance,
    validity,
)
from .seeding import rng_from, stable_seed


class Direction(Enum):
    ADVANCE = "advance"
    REWIND = "rewind"


@dataclass(frozen=True)
class ExplanationRequest:
    """What to explain and how hard to search.

    ``seed`` drives everything: the optimizer stream, the forward
    rollout seeds, and the uncertainty estimates. ``moo.seed`` is
    superseded so one value controls the whole request.
    """

    index: int
    direction: Direction
    horizon: int = 3
    moo: MooConfig = field(default_factory=MooConfig)
    su_samples: int = 30
    su_report_samples: int = 200
    seed: int = 0

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("horizon must be at least 1")
        if self.index < 0:
            raise ValueError("index must be non-negative")
        if self.su_samples < 1 or self.su_report_samples < 1:
            raise ValueError("uncertainty sample counts must be at least 1")


@dataclass(frozen=True)
class SemifactualCandidate:
    state: object
    rollout: Rollout
    scores: PropertyScores
    origin: Direction
    feature_gain: float


@dataclass(frozen=True)
class GenerationStats:
    evaluations: int
    archive_size: int
    wall_time: float


@dataclass(frozen=True)
class ExplanationSet:
    factual_state: object
    chosen_action: int
    candidates: tuple[SemifactualCandidate, ...]
    stats: GenerationStats
    # Every distinct valid candidate seen during the search, with its
    # search-grade scores; the returned front is nondominated within it.
    archive: tuple[SemifactualCandidate, ...]

    @property
    def succeeded(self) -> bool:
        return len(self.candidates) > 0


class _SemifactualSearch(DiscreteSequenceProblem):
    """Optimizer problem that harvests candidates as a side effect."""

    def __init__(self, q, env, factual, start, horizon, seed_vec, su_samples, seed, origin):
        super().__init__(genome_length=horizon, n_choices=env.n_actions)
        self.q = q
        self.env = env
        self.factual = factual
        self.start = start
        self.horizon = horizon
        self.seed_vec = seed_vec
        self.su_samples = su_samples
        self.seed = seed
        self.origin = origin
        self.chosen = greedy_action(q, factual)
        self.factual_features = env.encode_features(factual)
        self.candidates: dict = {}
        self._su_cache: dict[tuple[int, ...], float] = {}

    def initial_population(self, size: int, rng) -> list[Genome]:
        # One genome follows the policy's own greedy path to anchor
        # fidelity; the rest are uniform random.
        random_part = super().initial_population(size - 1, rng) if size > 1 else []
        return [self._greedy_genome()] + random_part

    def _greedy_genome(self) -> Genome:
        actions = []
        state = self.start
        for i in range(self.horizon):
            a = greedy_action(self.q, state)
            actions.append(a)
            if not self.env.is_terminal(state):
                state = self.env.step(state, a, self.seed_vec[i]).next_state
        return tuple(actions)

    def _uncertainty(self, actions: tuple[int, ...]) -> float:
        su = self._su_cache.get(actions)
        if su is None:
            su = stochastic_uncertainty(
                self.q,
                self.env,
                self.factual,
                actions,
                self.start,
                self.su_samples,
                stable_seed(self.seed, "uncertainty", actions),
            )
            self._su_cache[actions] = su
        return su

    def _keep(self, candidate: SemifactualCandidate) -> None:
        # Deduplicate by state, keeping the lexicographically smallest
        # objective vector: order-independent, and a dominating vector
        # is always lexicographically smaller than the one it dominates.
        existing = self.candidates.get(candidate.state)
        if existing is None or candidate.scores.objectives() < existing.scores.objectives():
            self.candidates[candidate.state] = candidate

    def evaluate(self, genome: Genome) -> Individual:
        rollout = execute_actions(self.env, self.start, genome, self.seed_vec)
        objective_rows = []
        for length in range(1, len(rollout) + 1):
            sub = rollout.prefix(length)
            state = sub.end_state
            if self.env.is_terminal(state):
                break
            if greedy_action(self.q, state) != self.chosen:
                continue
            feature_gain = gain(self.factual_features, self.env.encode_features(state))
            if feature_gain == 0.0:
                continue
            scores = PropertyScores(
                validity=1,
                temporal_distance=temporal_distance(sub, self.horizon),
                stochastic_uncertainty=self._uncertainty(sub.actions),
                fidelity=fidelity(self.q, sub),
                exceptionality=exceptionality(sub),
            )
            self._keep(SemifactualCandidate(state, sub, scores, self.origin, feature_gain))
            objective_rows.append(scores.objectives())
        if not objective_rows:
            return Individual(genome, None, feasible=False, violation=1.0)
        mean = tuple(float(v) for v in np.mean(objective_rows, axis=0))
        return Individual(genome, mean)


def _candidate_front(candidates: list[SemifactualCandidate]) -> list[SemifactualCandidate]:
    def dominated(a: SemifactualCandidate) -> bool:
        ao = a.scores.objectives()
        for b in candidates:
            bo = b.scores.objectives()
            if bo != ao and all(y <= x for x, y in zip(ao, bo)):
                return True
        return False

    return [c for c in candidates if not dominated(c)]


def _sorted_candidates(env: Environment, candidates) -> list[SemifactualCandidate]:
    return sorted(candidates, key=lambda c: (c.scores.objectives(), env.state_key(c.state)))


def _run_search(q, env, factual, start, request: ExplanationRequest, seed_vec) -> ExplanationSet:
    t0 = time.perf_counter()
    search = _SemifactualSearch(
        q,
        env,
        factual,
        start,
        request.horizon,
        seed_vec,
        request.su_samples,
        request.seed,
        request.direction,
    )
    moo = replace(request.moo, seed=stable_seed(request.seed, "search"))
    result = evolve(search, moo)
    archive = _sorted_candidates(env, search.candidates.values())
    front = _candidate_front(archive)
    reported = []
    for cand in front:
        su = stochastic_uncertainty(
            q,
            env,
            factual,
            cand.rollout.actions,
            start,
            request.su_report_samples,
            stable_seed(request.seed, "uncertainty_report", cand.rollout.actions),
        )
        reported.append(
            replace(cand, scores=replace(cand.scores, stochastic_uncertainty=su))
        )
    stats = GenerationStats(
        evaluations=result.evaluations,
        archive_size=len(archive),
        wall_time=time.perf_counter() - t0,
    )
    return ExplanationSet(
        factual_state=factual,
        chosen_action=search.chosen,
        candidates=tuple(_sorted_candidates(env, reported)),
        stats=stats,
        archive=tuple(archive),
    )


def advance_explain(
    q: QFunction, env: Environment, trajectory: Trajectory, request: ExplanationRequest
) -> ExplanationSet:
    """Search future action sequences from the factual state."""
    if request.direction is not Direction.ADVANCE:
        raise ValueError("request direction must be ADVANCE")
    factual = trajectory.state_at(request.index)
    if env.is_terminal(factual):
        raise ValueError("cannot explain a terminal factual state")
    seed_vec = [
        stable_seed(request.seed, "rollout", request.index, i) for i in range(request.horizon)
    ]
    return _run_search(q, env, factual, factual, request, seed_vec)


def rewind_explain(
    q: QFunction, env: Environment, trajectory: Trajectory, request: ExplanationRequest
) -> ExplanationSet:
    """Search alternative action sequences from ``horizon`` steps back.

    The factual trajectory is replayed exactly to the earlier state, and
    alternative sequences execute under the recorded per-step seeds, so
    stochastic events beyond the agent's control recur at matching
    timesteps.
    """
    if request.direction is not Direction.REWIND:
        raise ValueError("request direction must be REWIND")
    if request.index > len(trajectory):
        raise IndexError(f"index {request.index} outside trajectory of length {len(trajectory)}")
    if request.index < request.horizon:
        raise ValueError(
            f"rewind needs {request.horizon} recorded steps before index {request.index}"
        )
    factual = trajectory.state_at(request.index)
    if env.is_terminal(factual):
        raise ValueError("cannot explain a terminal factual state")
    start_index = request.index - request.horizon
    start = replay(env, trajectory, start_index)
    seed_vec = [
        trajectory.steps[start_index + i].step_seed for i in range(request.horizon)
    ]
    return _run_search(q, env, factual, start, request, seed_vec)


def explain(
    q: QFunction, env: Environment, trajectory: Trajectory, request: ExplanationRequest
) -> ExplanationSet:
    if request.direction is Direction.ADVANCE:
        return advance_explain(q, env, trajectory, request)
    return rewind_explain(q, env, trajectory, request)


def score_candidate(
    q: QFunction,
    env: Environment,
    factual,
    rollout: Rollout,
    horizon: int,
    su_samples: int,
    seed: int,
) -> PropertyScores:
    """Score an arbitrary rollout on the five properties.

    Temporal distance is capped at 1.0 so paths longer than the search
    horizon (permitted when scoring baseline states) never look better
    than the declared worst case.
    """
    return PropertyScores(
        validity=validity(q, factual, rollout.end_state),
        temporal_distance=min(1.0, temporal_distance(rollout, horizon)),
        stochastic_uncertainty=stochastic_uncertainty(
            q, env, factual, rollout.actions, rollout.start_state, su_samples, seed
        ),
        fidelity=fidelity(q, rollout),
        exceptionality=exceptionality(rollout),
    )


def select_presentation(explanation_set: ExplanationSet, seed: int) -> SemifactualCandidate:
    """Uniformly random member, e.g. for showing a single explanation."""
    if not explanation_set.candidates:
        raise ValueError("cannot select from an empty explanation set")
    rng = rng_from(seed)
    return explanation_set.candidates[int(rng.integers(len(explanation_set.candidates)))]


def explanation_set_to_jsonable(env: Environment, explanation_set: ExplanationSet) -> dict:
    def cand_payload(c: SemifactualCandidate) -> dict:
        return {
            "state": env.state_to_jsonable(c.state),
            "actions": list(c.rollout.actions),
            "action_names": [env.action_names[a] for a in c.rollout.actions],
            "origin": c.origin.value,
            "feature_gain": c.feature_gain,
            "scores": {
                "validity": c.scores.validity,
                "temporal_distance": c.scores.temporal_distance,
                "stochastic_uncertainty": c.scores.stochastic_uncertainty,
                "fidelity": c.scores.fidelity,
                "exceptionality": c.scores.exceptionality,
            },
        }

    return {
        "factual_state": env.state_to_jsonable(explanation_set.factual_state),
        "chosen_action": explanation_set.chosen_action,
        "chosen_action_name": env.action_names[explanation_set.chosen_action],
        "candidates": [cand_payload(c) for c in explanation_set.candidates],
        "stats": {
            "evaluations": explanation_set.stats.evaluations,
            "archive_size": explanation_set.stats.archive_size,
            "wall_time": explanation_set.stats.wall_time,
        },
    }
