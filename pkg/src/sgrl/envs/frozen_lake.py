"""Frozen lake grid: walk to the goal corner and exit the game.

Moving from a frozen square slips: the agent goes the intended way with
probability 0.6 and to each perpendicular side with probability 0.2.
EXIT ends the episode with a bonus only on the goal square; anywhere
else it is a costly no-op. Walking off the grid leaves the agent in
place, and slip outcomes that land on the same square are merged when
computing transition probabilities.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from ..seeding import StepDraws
from .base import MOVE_DELTAS, Environment, Outcome, Transition


class LakeAction(IntEnum):
    UP = 0
    DOWN = 1
    LEFT = 2
    RIGHT = 3
    EXIT = 4


# Perpendicular slip directions per movement action, in draw order.
_PERPENDICULAR = {0: (2, 3), 1: (2, 3), 2: (0, 1), 3: (0, 1)}


@dataclass(frozen=True, slots=True)
class FrozenLakeState:
    agent: tuple[int, int]
    done: bool = False


@dataclass(frozen=True)
class FrozenLakeConfig:
    size: int = 5
    start: tuple[int, int] = (0, 0)
    goal: tuple[int, int] = (4, 4)
    frozen: tuple[tuple[int, int], ...] = ((1, 1), (1, 3), (2, 2), (3, 1), (3, 3), (4, 2))
    slip_forward: float = 0.6
    slip_side: float = 0.2
    move_reward: float = -1.0
    exit_goal_reward: float = 10.0
    exit_noop_reward: float = -1.0
    max_episode_steps: int = 50

    def __post_init__(self):
        object.__setattr__(self, "frozen", tuple(tuple(c) for c in self.frozen))
        object.__setattr__(self, "start", tuple(self.start))
        object.__setattr__(self, "goal", tuple(self.goal))
        for cell in set(self.frozen) | {self.start, self.goal}:
            if not (0 <= cell[0] < self.size and 0 <= cell[1] < self.size):
                raise ValueError(f"cell {cell} outside the {self.size}x{self.size} grid")
        total = self.slip_forward + 2 * self.slip_side
        if abs(total - 1.0) > 1e-12:
            raise ValueError("slip probabilities must sum to 1")


class FrozenLake(Environment):
    name = "frozen_lake"
    n_actions = 5
    action_names = tuple(a.name for a in LakeAction)

    def __init__(self, config: FrozenLakeConfig | None = None):
        self.config = config or FrozenLakeConfig()
        self.max_episode_steps = self.config.max_episode_steps
        self._frozen = frozenset(self.config.frozen)

    # -- dynamics -------------------------------------------------------

    def initial_state(self) -> FrozenLakeState:
        return FrozenLakeState(agent=self.config.start, done=False)

    def is_terminal(self, state: FrozenLakeState) -> bool:
        return state.done

    def _move_target(self, agent: tuple[int, int], direction: int) -> tuple[int, int]:
        size = self.config.size
        r, c = agent[0] + MOVE_DELTAS[direction][0], agent[1] + MOVE_DELTAS[direction][1]
        if 0 <= r < size and 0 <= c < size:
            return (r, c)
        return agent

    def _direction_probs(self, agent: tuple[int, int], action: int) -> list[tuple[int, float]]:
        """(direction, probability) pairs for a movement action."""
        if agent not in self._frozen:
            return [(action, 1.0)]
        side1, side2 = _PERPENDICULAR[action]
        cfg = self.config
        return [(action, cfg.slip_forward), (side1, cfg.slip_side), (side2, cfg.slip_side)]

    def step(self, state: FrozenLakeState, action: int, step_seed: int) -> Transition:
        self._check_steppable(state, action)
        cfg = self.config
        if action == LakeAction.EXIT:
            if state.agent == cfg.goal:
                return Transition(FrozenLakeState(state.agent, True), cfg.exit_goal_reward, True, 1.0)
            return Transition(state, cfg.exit_noop_reward, False, 1.0)
        dirs = self._direction_probs(state.agent, action)
        realized = dirs[0][0]
        if len(dirs) > 1:
            u = StepDraws(step_seed).uniform()
            acc = 0.0
            for direction, p in dirs:
                acc += p
                if u < acc:
                    realized = direction
                    break
        target = self._move_target(state.agent, realized)
        # Aggregate over slip directions landing on the same square.
        prob = sum(p for d, p in dirs if self._move_target(state.agent, d) == target)
        return Transition(FrozenLakeState(target, False), cfg.move_reward, False, prob)

    def outcomes(self, state: FrozenLakeState, action: int) -> dict[FrozenLakeState, Outcome]:
        self._check_steppable(state, action)
        cfg = self.config
        if action == LakeAction.EXIT:
            if state.agent == cfg.goal:
                return {FrozenLakeState(state.agent, True): Outcome(1.0, cfg.exit_goal_reward, True)}
            return {state: Outcome(1.0, cfg.exit_noop_reward, False)}
        result: dict[FrozenLakeState, Outcome] = {}
        for direction, p in self._direction_probs(state.agent, action):
            nxt = FrozenLakeState(self._move_target(state.agent, direction), False)
            prev = result.get(nxt)
            result[nxt] = Outcome(p + (prev.prob if prev else 0.0), cfg.move_reward, False)
        return result

    # -- features -------------------------------------------------------

    def encode_features(self, state: FrozenLakeState) -> np.ndarray:
        return np.array(state.agent, dtype=float)

    def feature_bounds(self) -> tuple[tuple[int, int], ...]:
        hi = self.config.size - 1
        return ((0, hi), (0, hi))

    def mutable_features(self) -> tuple[int, ...]:
        return (0, 1)

    def decode_features(self, vector) -> FrozenLakeState | None:
        vec = [int(v) for v in vector]
        if len(vec) != 2:
            return None
        if not (0 <= vec[0] < self.config.size and 0 <= vec[1] < self.config.size):
            return None
        return FrozenLakeState((vec[0], vec[1]), False)

    # -- serialization / display ----------------------------------------

    def state_to_jsonable(self, state: FrozenLakeState) -> dict:
        return {"agent": list(state.agent), "done": state.done}

    def state_from_jsonable(self, payload: dict) -> FrozenLakeState:
        return FrozenLakeState(agent=tuple(payload["agent"]), done=bool(payload["done"]))

    def render(self, state: FrozenLakeState) -> str:
        size = self.config.size
        grid = [["." for _ in range(size)] for _ in range(size)]
        for r, c in self.config.frozen:
            grid[r][c] = "F"
        gr, gc = self.config.goal
        grid[gr][gc] = "G"
        ar, ac = state.agent
        grid[ar][ac] = "A"
        return "\n".join(" ".join(row) for row in grid)
