"""Built-in oracle checks runnable from the command line.

Each check recomputes an expected result by an independent route (closed
forms, brute-force enumeration, exact replay) and compares it with the
library's answer. Meant as a quick smoke test of an installation; the
full test suite lives in the repository's tests directory.
"""
from __future__ import annotations

import math

import numpy as np

from .envs import make_env
from .harness import run_episode
from .envs.base import replay
from .optimizer import Individual, dominates, nondominated_sort
from .policy import QTable, action_distribution, train, TrainingConfig
from .seeding import rng_from, stable_seed


def _check_softmax() -> tuple[bool, str]:
    q = QTable(2, {"s": np.array([1.0, 0.0])})
    dist = action_distribution(q, "s")
    expected = (math.e / (math.e + 1.0), 1.0 / (math.e + 1.0))
    ok = abs(dist[0] - expected[0]) < 1e-12 and abs(dist[1] - expected[1]) < 1e-12
    return ok, f"softmax([1,0]) = {dist.tolist()}"


def _brute_force_fronts(pop) -> list[set[int]]:
    remaining = set(range(len(pop)))
    fronts = []
    while remaining:
        front = {
            p for p in remaining
            if not any(dominates(pop[q], pop[p]) for q in remaining if q != p)
        }
        fronts.append(front)
        remaining -= front
    return fronts


def _check_sort(seed: int) -> tuple[bool, str]:
    rng = rng_from(stable_seed(seed, "selftest-sort"))
    for trial in range(10):
        n = int(rng.integers(2, 30))
        pop = []
        for i in range(n):
            if rng.random() < 0.2:
                pop.append(Individual((i,), None, feasible=False, violation=float(rng.integers(1, 4))))
            else:
                pop.append(Individual((i,), tuple(float(v) for v in rng.integers(0, 4, size=3))))
        got = [set(front) for front in nondominated_sort(pop)]
        want = _brute_force_fronts(pop)
        if got != want:
            return False, f"trial {trial}: fronts {got} != brute force {want}"
    return True, "10 random populations match the brute-force partition"


def _check_replay(seed: int) -> tuple[bool, str]:
    env = make_env("gridworld")
    config = TrainingConfig(steps=2000, seed=stable_seed(seed, "selftest-train"))
    q = train(env, config)
    trajectory = run_episode(q, env, rng_from(stable_seed(seed, "selftest-episode")), epsilon=0.3)
    for i in range(len(trajectory) + 1):
        if replay(env, trajectory, i) != trajectory.state_at(i):
            return False, f"replay mismatch at step {i}"
    return True, f"replayed a {len(trajectory)}-step trajectory exactly"


def _check_probabilities(seed: int) -> tuple[bool, str]:
    rng = rng_from(stable_seed(seed, "selftest-prob"))
    for name in ("gridworld", "frozen_lake"):
        env = make_env(name)
        state = env.initial_state()
        for _ in range(200):
            action = int(rng.integers(env.n_actions))
            total = sum(o.prob for o in env.outcomes(state, action).values())
            if abs(total - 1.0) > 1e-12:
                return False, f"{name}: probabilities sum to {total}"
            tr = env.step(state, action, int(rng.integers(1 << 63)))
            if abs(env.transition_prob(state, action, tr.next_state) - tr.prob) > 1e-15:
                return False, f"{name}: realized prob disagrees with the distribution"
            state = env.initial_state() if tr.terminal else tr.next_state
    return True, "transition distributions normalize and match realized steps"


def run_selftest(seed: int = 0) -> list[tuple[str, bool, str]]:
    checks = [
        ("softmax closed form", lambda: _check_softmax()),
        ("nondominated sort vs brute force", lambda: _check_sort(seed)),
        ("trajectory replay determinism", lambda: _check_replay(seed)),
        ("transition probability normalization", lambda: _check_probabilities(seed)),
    ]
    results = []
    for name, fn in checks:
        try:
            ok, detail = fn()
        except Exception as exc:
            ok, detail = False, f"raised {exc!r}"
        results.append((name, ok, detail))
    return results
