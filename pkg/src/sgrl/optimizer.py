"""Elitist multi-objective genetic search over fixed-length genomes.

A faithful NSGA-II generational loop with constrained dominance:
feasible individuals always beat infeasible ones, infeasible ones are
ordered by violation magnitude, and feasible ones by componentwise
objective dominance (minimization). Besides the live population the
search keeps an append-only archive of every feasible individual it
ever evaluated, so the final answer can be the Pareto front over
everything seen rather than just the survivors.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol, Sequence

import numpy as np

from .seeding import rng_from

Genome = tuple[int, ...]


@dataclass(frozen=True, slots=True)
class Individual:
    genome: Genome
    objectives: tuple[float, ...] | None
    feasible: bool = True
    violation: float = 0.0

    def __post_init__(self):
        if self.feasible and self.objectives is None:
            raise ValueError("feasible individuals need an objective vector")
        if not self.feasible and self.violation <= 0.0:
            raise ValueError("infeasible individuals need a positive violation")


@dataclass(frozen=True)
class MooConfig:
    generations: int = 25
    population: int = 24
    mutation_rate: float | None = None  # default: 1 / genome length
    crossover_rate: float = 0.9
    tournament_size: int = 2
    seed: int = 0

    def __post_init__(self):
        if self.generations < 0:
            raise ValueError("generations must be non-negative")
        if self.population < 2 or self.population % 2 != 0:
            raise ValueError("population must be even and at least 2")
        if self.mutation_rate is not None and not 0.0 <= self.mutation_rate <= 1.0:
            raise ValueError("mutation_rate must lie in [0, 1]")
        if not 0.0 <= self.crossover_rate <= 1.0:
            raise ValueError("crossover_rate must lie in [0, 1]")
        if self.tournament_size < 1:
            raise ValueError("tournament_size must be at least 1")


def dominates(a: Individual, b: Individual) -> bool:
    """Constrained dominance for minimization."""
    if a.feasible and not b.feasible:
        return True
    if not a.feasible:
        if b.feasible:
            return False
        return a.violation < b.violation
    if not b.feasible:
        return True
    better = False
    for x, y in zip(a.objectives, b.objectives):
        if x > y:
            return False
        if x < y:
            better = True
    return better


def nondominated_sort(pop: Sequence[Individual]) -> list[list[int]]:
    """Partition population indices into fronts F0, F1, ...

    F0 holds individuals dominated by nobody; each later front is the
    nondominated set once earlier fronts are removed.
    """
    n = len(pop)
    if n == 0:
        raise ValueError("cannot sort an empty population")
    dominated_by: list[list[int]] = [[] for _ in range(n)]
    counts = [0] * n
    fronts: list[list[int]] = [[]]
    for p in range(n):
        for q in range(n):
            if p == q:
                continue
            if dominates(pop[p], pop[q]):
                dominated_by[p].append(q)
            elif dominates(pop[q], pop[p]):
                counts[p] += 1
        if counts[p] == 0:
            fronts[0].append(p)
    i = 0
    while fronts[i]:
        nxt = []
        for p in fronts[i]:
            for q in dominated_by[p]:
                counts[q] -= 1
                if counts[q] == 0:
                    nxt.append(q)
        i += 1
        fronts.append(sorted(nxt))
    fronts.pop()
    return fronts


def crowding_distance(front: Sequence[Individual]) -> np.ndarray:
    """Per-individual crowding distance, aligned with the input order.

    Boundary individuals of each objective get infinite distance, so
    fronts of size one or two are all-infinite. Fronts without objective
    vectors (infeasible peers) are treated as uniformly crowded.
    """
    n = len(front)
    dist = np.full(n, np.inf)
    if n <= 2 or any(ind.objectives is None for ind in front):
        return dist
    dist = np.zeros(n)
    n_obj = len(front[0].objectives)
    for m in range(n_obj):
        order = sorted(range(n), key=lambda i: front[i].objectives[m])
        dist[order[0]] = dist[order[-1]] = np.inf
        lo = front[order[0]].objectives[m]
        hi = front[order[-1]].objectives[m]
        if hi == lo:
            continue
        for j in range(1, n - 1):
            gap = front[order[j + 1]].objectives[m] - front[order[j - 1]].objectives[m]
            dist[order[j]] += gap / (hi - lo)
    return dist


def pareto_front(individuals: Sequence[Individual]) -> list[Individual]:
    """Feasible members not dominated by any other member."""
    feasible = [ind for ind in individuals if ind.feasible]
    return [a for a in feasible if not any(dominates(b, a) for b in feasible)]


def one_point_crossover(a: Genome, b: Genome, rng) -> tuple[Genome, Genome]:
    if len(a) != len(b):
        raise ValueError("parents must have equal length")
    rng = np.random.default_rng(rng)
    if len(a) < 2:
        return tuple(a), tuple(b)
    point = int(rng.integers(1, len(a)))
    return a[:point] + b[point:], b[:point] + a[point:]


def mutate_genome(genome: Genome, n_values: int, rate: float, rng) -> Genome:
    """Resample each gene uniformly over [0, n_values) with probability ``rate``."""
    rng = np.random.default_rng(rng)
    return tuple(
        int(rng.integers(n_values)) if rng.random() < rate else g for g in genome
    )


class Problem(Protocol):
    genome_length: int
    n_choices: int

    def initial_population(self, size: int, rng) -> list[Genome]: ...

    def evaluate(self, genome: Genome) -> Individual: ...

    def crossover(self, a: Genome, b: Genome, rng) -> tuple[Genome, Genome]: ...

    def mutate(self, genome: Genome, rate: float, rng) -> Genome: ...


class DiscreteSequenceProblem:
    """Base class for search over fixed-length discrete action sequences."""

    def __init__(self, genome_length: int, n_choices: int):
        if genome_length < 1 or n_choices < 1:
            raise ValueError("genome_length and n_choices must be positive")
        self.genome_length = genome_length
        self.n_choices = n_choices

    def initial_population(self, size: int, rng) -> list[Genome]:
        rng = np.random.default_rng(rng)
        return [
            tuple(int(g) for g in rng.integers(self.n_choices, size=self.genome_length))
            for _ in range(size)
        ]

    def evaluate(self, genome: Genome) -> Individual:
        raise NotImplementedError

    def crossover(self, a: Genome, b: Genome, rng) -> tuple[Genome, Genome]:
        return one_point_crossover(a, b, rng)

    def mutate(self, genome: Genome, rate: float, rng) -> Genome:
        return mutate_genome(genome, self.n_choices, rate, rng)


@dataclass
class EvolveResult:
    population: list[Individual]
    archive: list[Individual]  # every distinct feasible genome ever evaluated
    evaluations: int


def _rank_and_crowd(pop: Sequence[Individual]) -> tuple[np.ndarray, np.ndarray]:
    ranks = np.zeros(len(pop), dtype=int)
    crowd = np.zeros(len(pop))
    for rank, front in enumerate(nondominated_sort(pop)):
        cd = crowding_distance([pop[i] for i in front])
        for j, i in enumerate(front):
            ranks[i] = rank
            crowd[i] = cd[j]
    return ranks, crowd


def _tournament(rng, ranks, crowd, size: int) -> int:
    best = int(rng.integers(len(ranks)))
    for _ in range(size - 1):
        challenger = int(rng.integers(len(ranks)))
        if ranks[challenger] < ranks[best] or (
            ranks[challenger] == ranks[best] and crowd[challenger] > crowd[best]
        ):
            best = challenger
    return best


def evolve(problem: Problem, config: MooConfig) -> EvolveResult:
    """Run the elitist generational loop for ``config.generations``.

    Deterministic given ``config.seed``. Each generation builds N
    children by tournament selection, crossover, and mutation; parents
    and children are merged, front-sorted, and the next population is
    filled front by front with the last partial front ordered by
    descending crowding distance. Genome evaluations are memoized, which
    is safe because evaluation is a pure function of the genome.
    """
    rng = rng_from(config.seed)
    n = config.population
    rate = config.mutation_rate if config.mutation_rate is not None else 1.0 / problem.genome_length

    cache: dict[Genome, Individual] = {}
    archive: dict[Genome, Individual] = {}

    def evaluated(genome: Genome) -> Individual:
        ind = cache.get(genome)
        if ind is None:
            ind = problem.evaluate(genome)
            cache[genome] = ind
            if ind.feasible:
                archive[genome] = ind
        return ind

    pop = [evaluated(g) for g in problem.initial_population(n, rng)]
    for _ in range(config.generations):
        ranks, crowd = _rank_and_crowd(pop)
        children: list[Individual] = []
        while len(children) < n:
            p1 = pop[_tournament(rng, ranks, crowd, config.tournament_size)]
            p2 = pop[_tournament(rng, ranks, crowd, config.tournament_size)]
            if rng.random() < config.crossover_rate:
                c1, c2 = problem.crossover(p1.genome, p2.genome, rng)
            else:
                c1, c2 = p1.genome, p2.genome
            for child in (c1, c2):
                if len(children) < n:
                    children.append(evaluated(problem.mutate(child, rate, rng)))
        merged = pop + children
        fronts = nondominated_sort(merged)
        next_idx: list[int] = []
        for front in fronts:
            if len(next_idx) + len(front) <= n:
                next_idx.extend(front)
            else:
                need = n - len(next_idx)
                cd = crowding_distance([merged[i] for i in front])
                order = sorted(range(len(front)), key=lambda j: (-cd[j], front[j]))
                next_idx.extend(front[j] for j in order[:need])
            if len(next_idx) == n:
                break
        pop = [merged[i] for i in next_idx]
    return EvolveResult(pop, list(archive.values()), len(cache))
