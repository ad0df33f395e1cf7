"""State-space baseline: search valid states directly, not action paths.

Mirrors the supervised-learning style of semifactual generation: a
genetic search over integer feature vectors (projected onto valid
environment states) maximizes a blend of gain (feature distance from
the factual state) and robustness (the fraction of unit-perturbation
neighbors sharing the same greedy action), then picks a diverse subset
by greedy max-min selection with local swap refinement.

Because these states come without an action path, scoring them on the
path-based properties first runs a seeded evolutionary search for an
action sequence that reaches the state exactly; states with no found
path get worst-case scores and a PATH_NOT_FOUND flag.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .envs.base import Environment
from .generators import score_candidate
from .policy import QFunction, greedy_action
from .properties import PropertyScores, Rollout, execute_actions, gain
from .seeding import rng_from, stable_seed

PATH_NOT_FOUND = "PATH_NOT_FOUND"


@dataclass(frozen=True)
class BaselineConfig:
    diversity_count: int = 1          # how many states to return
    neighborhood_radius: int = 2      # feature mutation bound per coordinate
    robustness_samples: int = 16      # neighbor evaluations per state (exact if fewer exist)
    search_budget: int = 600          # candidate-state evaluations
    path_budget: int = 600            # action-sequence evaluations per returned state
    population: int = 24
    seed: int = 0

    def __post_init__(self):
        if self.diversity_count < 1:
            raise ValueError("diversity_count must be at least 1")
        if self.search_budget < 1 or self.path_budget < 1:
            raise ValueError("budgets must be at least 1")
        if self.neighborhood_radius < 1:
            raise ValueError("neighborhood_radius must be at least 1")
        if self.population < 2:
            raise ValueError("population must be at least 2")


@dataclass(frozen=True)
class BaselineResult:
    factual_state: object
    chosen_action: int
    states: tuple
    gains: tuple[float, ...]
    robustness: tuple[float, ...]

    @property
    def succeeded(self) -> bool:
        return len(self.states) > 0


@dataclass(frozen=True)
class ScoredBaselineState:
    state: object
    scores: PropertyScores
    rollout: Rollout | None
    path_found: bool

    @property
    def flag(self) -> str | None:
        return None if self.path_found else PATH_NOT_FOUND


def robustness(q: QFunction, env: Environment, state, max_samples: int, seed: int) -> float:
    """Fraction of valid unit-perturbation neighbors keeping the greedy action."""
    base_action = greedy_action(q, state)
    vec = [int(v) for v in env.encode_features(state)]
    bounds = env.feature_bounds()
    neighbors = []
    for i in env.mutable_features():
        for delta in (-1, 1):
            moved = list(vec)
            moved[i] += delta
            lo, hi = bounds[i]
            if not lo <= moved[i] <= hi:
                continue
            neighbor = env.decode_features(moved)
            if neighbor is not None and neighbor != state:
                neighbors.append(neighbor)
    if not neighbors:
        return 0.0
    if len(neighbors) > max_samples:
        rng = rng_from(seed)
        idx = rng.choice(len(neighbors), size=max_samples, replace=False)
        neighbors = [neighbors[i] for i in sorted(int(i) for i in idx)]
    same = sum(1 for nb in neighbors if greedy_action(q, nb) == base_action)
    return same / len(neighbors)


def _random_valid_vector(env: Environment, rng, max_tries: int = 200):
    bounds = env.feature_bounds()
    for _ in range(max_tries):
        vec = tuple(int(rng.integers(lo, hi + 1)) for lo, hi in bounds)
        if env.decode_features(vec) is not None:
            return vec
    raise RuntimeError("could not sample a valid state vector")


def _mutate_vector(env: Environment, vec, radius: int, rng):
    bounds = env.feature_bounds()
    mutable = env.mutable_features()
    rate = 1.0 / len(mutable)
    out = list(vec)
    for i in mutable:
        if rng.random() < rate:
            lo, hi = bounds[i]
            out[i] = int(np.clip(out[i] + rng.integers(-radius, radius + 1), lo, hi))
    return tuple(out)


def _min_pairwise(features: dict, selected: list) -> float:
    return min(
        gain(features[a], features[b]) for a, b in combinations(selected, 2)
    )


def _select_diverse(pool: list, features: dict, count: int) -> list:
    """Greedy max-min selection refined by improving swaps.

    ``pool`` is ordered best-fitness-first; the refinement guarantees no
    single swap with a rejected candidate can raise the minimum pairwise
    distance of the selected set. Terminates because each swap strictly
    increases that minimum over a finite pool.
    """
    if count >= len(pool):
        return list(pool)
    selected = [pool[0]]
    remaining = [s for s in pool[1:]]
    while len(selected) < count and remaining:
        best = max(
            remaining,
            key=lambda c: (min(gain(features[c], features[s]) for s in selected), -pool.index(c)),
        )
        selected.append(best)
        remaining.remove(best)
    if len(selected) < 2:
        return selected
    improved = True
    while improved:
        improved = False
        current = _min_pairwise(features, selected)
        for i in range(len(selected)):
            for cand in list(remaining):
                trial = selected[:i] + [cand] + selected[i + 1 :]
                if _min_pairwise(features, trial) > current:
                    remaining.append(selected[i])
                    remaining.remove(cand)
                    selected = trial
                    improved = True
                    break
            if improved:
                break
    return selected


def sgen_explain(q: QFunction, env: Environment, s, config: BaselineConfig) -> BaselineResult:
    """Search for up to ``diversity_count`` distant valid states."""
    if env.is_terminal(s):
        raise ValueError("cannot explain a terminal factual state")
    chosen = greedy_action(q, s)
    x = env.encode_features(s)
    bounds = env.feature_bounds()
    diameter = float(np.linalg.norm([hi - lo for lo, hi in bounds])) or 1.0
    rng = rng_from(config.seed)

    pool: dict = {}       # state -> (gain, robustness)
    fitness: dict = {}    # vector -> scalar fitness
    evaluations = 0

    def evaluate(vec) -> float:
        nonlocal evaluations
        cached = fitness.get(vec)
        if cached is not None:
            return cached
        evaluations += 1
        state = env.decode_features(vec)
        score = -1.0
        if state is not None and greedy_action(q, state) == chosen:
            g = gain(x, env.encode_features(state))
            r = robustness(
                q, env, state, config.robustness_samples, stable_seed(config.seed, "robust", vec)
            )
            score = g / diameter + r
            if g > 0.0:
                pool[state] = (g, r)
        fitness[vec] = score
        return score

    population = [_random_valid_vector(env, rng) for _ in range(config.population)]
    for vec in population:
        evaluate(vec)
    # Generation bound keeps the loop finite even when every child is a
    # cache hit (cached evaluations do not consume budget).
    max_generations = -(-config.search_budget // config.population)
    for _ in range(max_generations):
        if evaluations >= config.search_budget:
            break
        scores = [fitness[v] for v in population]
        children = []
        for _ in range(len(population)):
            i = int(rng.integers(len(population)))
            j = int(rng.integers(len(population)))
            parent_a = population[i if scores[i] >= scores[j] else j]
            i = int(rng.integers(len(population)))
            j = int(rng.integers(len(population)))
            parent_b = population[i if scores[i] >= scores[j] else j]
            point = int(rng.integers(1, len(parent_a))) if len(parent_a) > 1 else 1
            child = parent_a[:point] + parent_b[point:]
            child = _mutate_vector(env, child, config.neighborhood_radius, rng)
            children.append(child)
            evaluate(child)
        population = children

    if not pool:
        return BaselineResult(s, chosen, (), (), ())

    ordered = sorted(
        pool, key=lambda st: (-(pool[st][0] / diameter + pool[st][1]), env.state_key(st))
    )
    features = {st: env.encode_features(st) for st in ordered}
    picked = _select_diverse(ordered, features, config.diversity_count)
    return BaselineResult(
        factual_state=s,
        chosen_action=chosen,
        states=tuple(picked),
        gains=tuple(pool[st][0] for st in picked),
        robustness=tuple(pool[st][1] for st in picked),
    )


def find_action_path(
    q: QFunction,
    env: Environment,
    s,
    target,
    horizon: int,
    budget: int,
    seed: int,
) -> Rollout | None:
    """Evolve an action sequence from ``s`` that lands exactly on ``target``.

    Per-step seeds are fixed by ``seed``, so the returned rollout is
    replayable. Returns the shortest exact match found within the
    budget, or None; paths of length zero are never returned.
    """
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    if target == s:
        return None
    seed_vec = [stable_seed(seed, "step", i) for i in range(horizon)]
    target_features = env.encode_features(target)
    rng = rng_from(seed)
    best: tuple[int, Rollout] | None = None
    cache: dict[tuple[int, ...], float] = {}
    evaluations = 0

    def evaluate(genome) -> float:
        nonlocal best, evaluations
        cached = cache.get(genome)
        if cached is not None:
            return cached
        evaluations += 1
        rollout = execute_actions(env, s, genome, seed_vec)
        fit = float("inf")
        for length in range(1, len(rollout) + 1):
            sub = rollout.prefix(length)
            state = sub.end_state
            dist = gain(env.encode_features(state), target_features)
            fit = min(fit, dist + 0.001 * length)
            if state == target and (best is None or length < best[0]):
                best = (length, sub)
        cache[genome] = fit
        return fit

    def greedy_genome():
        actions = []
        state = s
        for i in range(horizon):
            a = greedy_action(q, state)
            actions.append(a)
            if not env.is_terminal(state):
                state = env.step(state, a, seed_vec[i]).next_state
        return tuple(actions)

    pop_size = 24
    population = [greedy_genome()] + [
        tuple(int(g) for g in rng.integers(env.n_actions, size=horizon))
        for _ in range(pop_size - 1)
    ]
    for genome in population:
        evaluate(genome)
    max_generations = -(-budget // pop_size)
    for _ in range(max_generations):
        if evaluations >= budget or (best is not None and best[0] == 1):
            break
        scores = [cache[g] for g in population]
        children = []
        for _ in range(pop_size):
            i = int(rng.integers(pop_size))
            j = int(rng.integers(pop_size))
            pa = population[i if scores[i] <= scores[j] else j]
            i = int(rng.integers(pop_size))
            j = int(rng.integers(pop_size))
            pb = population[i if scores[i] <= scores[j] else j]
            point = int(rng.integers(1, horizon)) if horizon > 1 else 1
            child = pa[:point] + pb[point:]
            child = tuple(
                int(rng.integers(env.n_actions)) if rng.random() < 1.0 / horizon else g
                for g in child
            )
            children.append(child)
            evaluate(child)
        population = children
    return best[1] if best is not None else None


def score_baseline(
    q: QFunction,
    env: Environment,
    s,
    result: BaselineResult,
    horizon: int,
    config: BaselineConfig,
    su_samples: int,
    seed: int,
) -> list[ScoredBaselineState]:
    """Score baseline states on the path-based properties.

    States with a found path are scored exactly like search-generated
    candidates (path search uses twice the horizon, since reachability
    was never a constraint for the baseline); states without one get
    worst-case scores and the PATH_NOT_FOUND flag.
    """
    scored = []
    for i, state in enumerate(result.states):
        rollout = find_action_path(
            q, env, s, state, 2 * horizon, config.path_budget, stable_seed(seed, "path", i)
        )
        if rollout is not None:
            scores = score_candidate(
                q, env, s, rollout, horizon, su_samples, stable_seed(seed, "score", i)
            )
            scored.append(ScoredBaselineState(state, scores, rollout, True))
        else:
            scores = PropertyScores(1, 1.0, 1.0, 1.0, 1.0)
            scored.append(ScoredBaselineState(state, scores, None, False))
    return scored
