"""Scoring of candidate explanation states.

A candidate is judged by five quantities. Validity is a hard constraint
(the policy must pick the same action in the candidate state as in the
state being explained); the remaining four are objectives, all
minimized:

* temporal distance: action-path length, normalized by the horizon;
* stochastic uncertainty: estimated probability that re-running the
  candidate's actions under fresh environment randomness still
  preserves the chosen action (low means the outcome nearly flips);
* fidelity: one minus the probability the policy itself would walk the
  candidate's action path (low means policy-consistent);
* exceptionality: mean realized transition probability along the path
  (low means a surprising path).

Feature gain and set diversity are post-hoc report metrics, not search
objectives.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import NamedTuple, Sequence

import numpy as np

from .envs.base import Environment
from .policy import QFunction, action_distribution, greedy_action
from .seeding import draw_step_seed, rng_from


@dataclass(frozen=True, slots=True)
class RolloutStep:
    state: object
    action: int
    step_seed: int
    realized_prob: float
    next_state: object


@dataclass(frozen=True)
class Rollout:
    """Executed action path: chained steps from a start state."""

    start_state: object
    steps: tuple[RolloutStep, ...]

    def __len__(self) -> int:
        return len(self.steps)

    @property
    def end_state(self):
        return self.steps[-1].next_state if self.steps else self.start_state

    @property
    def actions(self) -> tuple[int, ...]:
        return tuple(step.action for step in self.steps)

    def prefix(self, length: int) -> "Rollout":
        return Rollout(self.start_state, self.steps[:length])


def execute_actions(env: Environment, start, actions: Sequence[int], step_seeds: Sequence[int]) -> Rollout:
    """Run ``actions`` from ``start`` under the given per-step seeds.

    Execution truncates when a transition terminates the episode, so the
    returned rollout may be shorter than the action sequence.
    """
    if len(step_seeds) < len(actions):
        raise ValueError("need one step seed per action")
    steps = []
    state = start
    for action, seed in zip(actions, step_seeds):
        if env.is_terminal(state):
            break
        tr = env.step(state, action, seed)
        steps.append(RolloutStep(state, action, seed, tr.prob, tr.next_state))
        state = tr.next_state
    return Rollout(start, tuple(steps))


@dataclass(frozen=True)
class PropertyScores:
    validity: int
    temporal_distance: float
    stochastic_uncertainty: float
    fidelity: float
    exceptionality: float

    def objectives(self) -> tuple[float, float, float, float]:
        """Objective vector in canonical order; every entry is minimized."""
        return (
            self.temporal_distance,
            self.stochastic_uncertainty,
            self.fidelity,
            self.exceptionality,
        )


def validity(q: QFunction, s, s_prime) -> int:
    """1 iff the policy picks the same action in both states."""
    return int(greedy_action(q, s) == greedy_action(q, s_prime))


def temporal_distance(rollout: Rollout, horizon: int) -> float:
    if len(rollout) == 0:
        raise ValueError("temporal distance of an empty rollout is undefined")
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    return len(rollout) / horizon


def stochastic_uncertainty(
    q: QFunction,
    env: Environment,
    s,
    actions: Sequence[int],
    start,
    samples: int,
    seed: int,
) -> float:
    """Monte Carlo outcome-preservation probability.

    Executes ``actions`` from ``start`` under ``samples`` freshly seeded
    stochastic configurations and returns the fraction whose end state
    still maps to the same greedy action as ``s``.
    """
    if samples < 1:
        raise ValueError("samples must be at least 1")
    target = greedy_action(q, s)
    rng = rng_from(seed)
    n_actions = len(actions)
    preserved = 0
    for _ in range(samples):
        seeds = [draw_step_seed(rng) for _ in range(n_actions)]
        rollout = execute_actions(env, start, actions, seeds)
        if greedy_action(q, rollout.end_state) == target:
            preserved += 1
    return preserved / samples


def fidelity(q: QFunction, rollout: Rollout, per_step: bool = True) -> float:
    """One minus the policy's probability of walking the rollout.

    With ``per_step`` (the default) each action's softmax probability is
    taken at the state actually visited; the literal variant evaluates
    every action at the rollout's start state for comparison.
    """
    if len(rollout) == 0:
        raise ValueError("fidelity of an empty rollout is undefined")
    prob = 1.0
    for step in rollout.steps:
        ref = step.state if per_step else rollout.start_state
        prob *= float(action_distribution(q, ref)[step.action])
    return 1.0 - prob


def exceptionality(rollout: Rollout) -> float:
    """Mean realized transition probability along the rollout."""
    if len(rollout) == 0:
        raise ValueError("exceptionality of an empty rollout is undefined")
    return sum(step.realized_prob for step in rollout.steps) / len(rollout)


def gain(x, x_prime) -> float:
    """Euclidean distance between two feature vectors."""
    a = np.asarray(x, dtype=float)
    b = np.asarray(x_prime, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"feature length mismatch: {a.shape} vs {b.shape}")
    return float(np.linalg.norm(a - b))


class DiversityScores(NamedTuple):
    from_factual: float  # mean distance from the factual state's features
    pairwise: float      # mean distance over unordered pairs within the set


def diversity(x, others: Sequence) -> DiversityScores:
    """Spread of a set of explanation feature vectors.

    ``from_factual`` averages distances to ``x``; ``pairwise`` is what
    the report tables show and is 0 for singleton sets.
    """
    vectors = [np.asarray(v, dtype=float) for v in others]
    if not vectors:
        raise ValueError("diversity of an empty set is undefined")
    from_factual = float(np.mean([gain(x, v) for v in vectors]))
    if len(vectors) < 2:
        return DiversityScores(from_factual, 0.0)
    pair_dists = [gain(a, b) for a, b in combinations(vectors, 2)]
    return DiversityScores(from_factual, float(np.mean(pair_dists)))
