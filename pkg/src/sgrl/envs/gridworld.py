"""Stochastic 5x5 gridworld: reach a firing line and shoot the dragon.

The agent moves on a grid holding a dragon and four obstacles (two
trees, two walls) that block both movement and the line of fire. CHOP
removes an adjacent obstacle (walls cost more than trees), SHOOT ends
the episode when the dragon is in the same row or column with no
standing obstacle strictly between. Removed obstacles spontaneously
come back: each step, at most one removed obstacle regrows, drawn in a
fixed cell order so transition probabilities stay exact.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from enum import IntEnum

import numpy as np

from ..seeding import StepDraws
from .base import MOVE_DELTAS, Environment, Outcome, Transition

TREE = "tree"
WALL = "wall"


class GridAction(IntEnum):
    UP = 0
    DOWN = 1
    LEFT = 2
    RIGHT = 3
    CHOP = 4
    SHOOT = 5


@dataclass(frozen=True, slots=True)
class GridworldState:
    agent: tuple[int, int]
    dragon: tuple[int, int]
    obstacles: tuple[int, ...]  # 1 = standing, 0 = removed; aligned with layout cells
    done: bool = False


@dataclass(frozen=True)
class GridworldConfig:
    """Layout constants and reward scheme.

    Regrowth probabilities of zero give the fully deterministic variant
    used by the exhaustive search oracles.
    """

    size: int = 5
    agent_start: tuple[int, int] = (0, 0)
    dragon: tuple[int, int] = (4, 4)
    trees: tuple[tuple[int, int], ...] = ((1, 4), (4, 1))
    walls: tuple[tuple[int, int], ...] = ((3, 4), (4, 3))
    tree_regrow_prob: float = 0.05
    wall_rebuild_prob: float = 0.02
    move_reward: float = -1.0
    chop_tree_reward: float = -2.0
    chop_wall_reward: float = -5.0
    ineffective_reward: float = -3.0
    shoot_reward: float = 50.0
    max_episode_steps: int = 50

    def __post_init__(self):
        object.__setattr__(self, "trees", tuple(tuple(c) for c in self.trees))
        object.__setattr__(self, "walls", tuple(tuple(c) for c in self.walls))
        object.__setattr__(self, "agent_start", tuple(self.agent_start))
        object.__setattr__(self, "dragon", tuple(self.dragon))
        cells = set(self.trees) | set(self.walls)
        if len(cells) != len(self.trees) + len(self.walls):
            raise ValueError("tree and wall cells must be distinct")
        for cell in cells | {self.agent_start, self.dragon}:
            if not (0 <= cell[0] < self.size and 0 <= cell[1] < self.size):
                raise ValueError(f"cell {cell} outside the {self.size}x{self.size} grid")
        if self.agent_start in cells or self.dragon in cells:
            raise ValueError("agent start and dragon must not sit on obstacle cells")
        if not (0.0 <= self.tree_regrow_prob <= 1.0 and 0.0 <= self.wall_rebuild_prob <= 1.0):
            raise ValueError("regrowth probabilities must lie in [0, 1]")


class Gridworld(Environment):
    name = "gridworld"
    n_actions = 6
    action_names = tuple(a.name for a in GridAction)

    def __init__(self, config: GridworldConfig | None = None):
        self.config = config or GridworldConfig()
        self.max_episode_steps = self.config.max_episode_steps
        # Canonical obstacle order: sorted cells, kind looked up per cell.
        kinds = {c: TREE for c in self.config.trees}
        kinds.update({c: WALL for c in self.config.walls})
        self.obstacle_cells: tuple[tuple[int, int], ...] = tuple(sorted(kinds))
        self.obstacle_kinds: tuple[str, ...] = tuple(kinds[c] for c in self.obstacle_cells)
        self._cell_index = {c: i for i, c in enumerate(self.obstacle_cells)}
        self._regrow_probs = tuple(
            self.config.tree_regrow_prob if k == TREE else self.config.wall_rebuild_prob
            for k in self.obstacle_kinds
        )

    # -- dynamics -------------------------------------------------------

    def initial_state(self) -> GridworldState:
        return GridworldState(
            agent=self.config.agent_start,
            dragon=self.config.dragon,
            obstacles=(1,) * len(self.obstacle_cells),
            done=False,
        )

    def is_terminal(self, state: GridworldState) -> bool:
        return state.done

    def _blocked(self, state: GridworldState, cell: tuple[int, int]) -> bool:
        size = self.config.size
        if not (0 <= cell[0] < size and 0 <= cell[1] < size):
            return True
        if cell == state.dragon:
            return True
        idx = self._cell_index.get(cell)
        return idx is not None and state.obstacles[idx] == 1

    def _chop_target(self, state: GridworldState) -> int | None:
        """Index of the obstacle CHOP removes: first standing neighbor
        in UP, DOWN, LEFT, RIGHT scan order."""
        r, c = state.agent
        for a in (0, 1, 2, 3):
            dr, dc = MOVE_DELTAS[a]
            idx = self._cell_index.get((r + dr, c + dc))
            if idx is not None and state.obstacles[idx] == 1:
                return idx
        return None

    def shoot_effective(self, state: GridworldState) -> bool:
        """True iff agent and dragon share a row or column with no
        standing obstacle strictly between them."""
        (ar, ac), (dr, dc) = state.agent, state.dragon
        if ar == dr:
            lo, hi = sorted((ac, dc))
            between = ((ar, c) for c in range(lo + 1, hi))
        elif ac == dc:
            lo, hi = sorted((ar, dr))
            between = ((r, ac) for r in range(lo + 1, hi))
        else:
            return False
        for cell in between:
            idx = self._cell_index.get(cell)
            if idx is not None and state.obstacles[idx] == 1:
                return False
        return True

    def _apply_action(self, state: GridworldState, action: int):
        """Deterministic part of a step: (agent, obstacles, reward, done)."""
        cfg = self.config
        agent, obstacles = state.agent, state.obstacles
        if action < 4:
            target = (agent[0] + MOVE_DELTAS[action][0], agent[1] + MOVE_DELTAS[action][1])
            if not self._blocked(state, target):
                agent = target
            return agent, obstacles, cfg.move_reward, False
        if action == GridAction.CHOP:
            idx = self._chop_target(state)
            if idx is None:
                return agent, obstacles, cfg.ineffective_reward, False
            removed = list(obstacles)
            removed[idx] = 0
            reward = cfg.chop_tree_reward if self.obstacle_kinds[idx] == TREE else cfg.chop_wall_reward
            return agent, tuple(removed), reward, False
        # SHOOT
        if self.shoot_effective(state):
            return agent, obstacles, cfg.shoot_reward, True
        return agent, obstacles, cfg.ineffective_reward, False

    def _regrow_candidates(self, pre: GridworldState, agent: tuple[int, int]) -> list[int]:
        # Only obstacles already removed before the step may regrow, and
        # never underneath the agent's post-move position.
        return [
            i
            for i, cell in enumerate(self.obstacle_cells)
            if pre.obstacles[i] == 0 and cell != agent and self._regrow_probs[i] > 0.0
        ]

    def step(self, state: GridworldState, action: int, step_seed: int) -> Transition:
        self._check_steppable(state, action)
        agent, obstacles, reward, done = self._apply_action(state, action)
        if done:
            next_state = GridworldState(agent, state.dragon, obstacles, True)
            return Transition(next_state, reward, True, 1.0)
        draws = StepDraws(step_seed)
        prob = 1.0
        regrown = None
        for i in self._regrow_candidates(state, agent):
            p = self._regrow_probs[i]
            if draws.uniform() < p:
                prob *= p
                regrown = i
                break
            prob *= 1.0 - p
        if regrown is not None:
            flags = list(obstacles)
            flags[regrown] = 1
            obstacles = tuple(flags)
        next_state = GridworldState(agent, state.dragon, obstacles, False)
        return Transition(next_state, reward, False, prob)

    def outcomes(self, state: GridworldState, action: int) -> dict[GridworldState, Outcome]:
        self._check_steppable(state, action)
        agent, obstacles, reward, done = self._apply_action(state, action)
        if done:
            final = GridworldState(agent, state.dragon, obstacles, True)
            return {final: Outcome(1.0, reward, True)}
        result: dict[GridworldState, Outcome] = {}
        candidates = self._regrow_candidates(state, agent)
        none_prob = 1.0
        for pos, i in enumerate(candidates):
            p = self._regrow_probs[i]
            hit_prob = p
            for j in candidates[:pos]:
                hit_prob *= 1.0 - self._regrow_probs[j]
            flags = list(obstacles)
            flags[i] = 1
            result[GridworldState(agent, state.dragon, tuple(flags), False)] = Outcome(
                hit_prob, reward, False
            )
            none_prob *= 1.0 - p
        result[GridworldState(agent, state.dragon, obstacles, False)] = Outcome(
            none_prob, reward, False
        )
        return result

    # -- features -------------------------------------------------------

    def encode_features(self, state: GridworldState) -> np.ndarray:
        return np.array(
            [*state.agent, *state.dragon, *state.obstacles], dtype=float
        )

    def feature_bounds(self) -> tuple[tuple[int, int], ...]:
        hi = self.config.size - 1
        pos = ((0, hi), (0, hi))
        dragon = ((self.config.dragon[0],) * 2, (self.config.dragon[1],) * 2)
        flags = ((0, 1),) * len(self.obstacle_cells)
        return pos + dragon + flags

    def mutable_features(self) -> tuple[int, ...]:
        return (0, 1) + tuple(range(4, 4 + len(self.obstacle_cells)))

    def decode_features(self, vector) -> GridworldState | None:
        vec = [int(v) for v in vector]
        if len(vec) != 4 + len(self.obstacle_cells):
            return None
        agent = (vec[0], vec[1])
        dragon = (vec[2], vec[3])
        flags = tuple(vec[4:])
        size = self.config.size
        if not (0 <= agent[0] < size and 0 <= agent[1] < size):
            return None
        if dragon != self.config.dragon:
            return None
        if any(f not in (0, 1) for f in flags):
            return None
        if agent == dragon:
            return None
        idx = self._cell_index.get(agent)
        if idx is not None and flags[idx] == 1:
            return None
        return GridworldState(agent, dragon, flags, False)

    # -- serialization / display ----------------------------------------

    def state_to_jsonable(self, state: GridworldState) -> dict:
        return {
            "agent": list(state.agent),
            "dragon": list(state.dragon),
            "obstacles": list(state.obstacles),
            "done": state.done,
        }

    def state_from_jsonable(self, payload: dict) -> GridworldState:
        return GridworldState(
            agent=tuple(payload["agent"]),
            dragon=tuple(payload["dragon"]),
            obstacles=tuple(int(v) for v in payload["obstacles"]),
            done=bool(payload["done"]),
        )

    def render(self, state: GridworldState) -> str:
        size = self.config.size
        grid = [["." for _ in range(size)] for _ in range(size)]
        for i, (r, c) in enumerate(self.obstacle_cells):
            mark = "T" if self.obstacle_kinds[i] == TREE else "W"
            grid[r][c] = mark if state.obstacles[i] == 1 else mark.lower()
        dr, dc = state.dragon
        grid[dr][dc] = "D" if not state.done else "x"
        ar, ac = state.agent
        grid[ar][ac] = "A"
        return "\n".join(" ".join(row) for row in grid)


def deterministic_config(**overrides) -> GridworldConfig:
    """Gridworld layout with regrowth disabled (fully deterministic)."""
    base = GridworldConfig(tree_regrow_prob=0.0, wall_rebuild_prob=0.0)
    return replace(base, **overrides) if overrides else base
