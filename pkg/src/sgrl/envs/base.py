"""Shared environment machinery: transitions, trajectories, replay.

Environments in this package are stateless rule objects: all mutable
simulation state travels through immutable state values, and
``step(state, action, step_seed)`` is a pure function. That makes any
recorded trajectory exactly replayable from its per-step seeds.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Any, Iterable, Sequence

import numpy as np

# Row/column deltas for the four movement actions shared by both grids.
MOVE_DELTAS = {0: (-1, 0), 1: (1, 0), 2: (0, -1), 3: (0, 1)}  # UP DOWN LEFT RIGHT


@dataclass(frozen=True, slots=True)
class Transition:
    """One realized environment transition.

    ``prob`` is the exact probability of the realized ``next_state``
    given the (state, action) pair, aggregated over all stochastic
    events that land on the same next state.
    """

    next_state: Any
    reward: float
    terminal: bool
    prob: float


@dataclass(frozen=True, slots=True)
class Outcome:
    """One entry of an exact transition distribution."""

    prob: float
    reward: float
    terminal: bool


@dataclass(frozen=True, slots=True)
class TrajectoryStep:
    state: Any
    action: int
    reward: float
    step_seed: int
    next_state: Any


@dataclass(frozen=True)
class Trajectory:
    """A recorded episode prefix, replayable from its step seeds."""

    env_name: str
    initial_state: Any
    steps: tuple[TrajectoryStep, ...]

    def __len__(self) -> int:
        return len(self.steps)

    def state_at(self, index: int) -> Any:
        """State visited at time ``index`` (0 is the initial state)."""
        if index < 0 or index > len(self.steps):
            raise IndexError(f"index {index} outside trajectory of length {len(self.steps)}")
        if index == 0:
            return self.initial_state
        return self.steps[index - 1].next_state


class Environment:
    """Base class for the grid environments.

    Subclasses implement the pure dynamics (``step`` and ``outcomes``)
    plus feature encoding and state serialization. Instances hold only
    layout constants and may be shared freely across threads.
    """

    name: str = ""
    n_actions: int = 0
    action_names: tuple[str, ...] = ()
    max_episode_steps: int = 50

    # -- dynamics -------------------------------------------------------

    def initial_state(self) -> Any:
        raise NotImplementedError

    def is_terminal(self, state) -> bool:
        raise NotImplementedError

    def step(self, state, action: int, step_seed: int) -> Transition:
        raise NotImplementedError

    def outcomes(self, state, action: int) -> dict[Any, Outcome]:
        """Exact distribution over next states for (state, action)."""
        raise NotImplementedError

    def transition_prob(self, state, action: int, next_state) -> float:
        """Exact probability of ``next_state``; 0.0 when unreachable."""
        out = self.outcomes(state, action).get(next_state)
        return out.prob if out is not None else 0.0

    def _check_action(self, action: int) -> None:
        if not 0 <= action < self.n_actions:
            raise ValueError(f"action {action} outside [0, {self.n_actions})")

    def _check_steppable(self, state, action: int) -> None:
        if self.is_terminal(state):
            raise ValueError("cannot step a terminal state")
        self._check_action(action)

    # -- features -------------------------------------------------------

    def encode_features(self, state) -> np.ndarray:
        raise NotImplementedError

    def feature_bounds(self) -> tuple[tuple[int, int], ...]:
        """Inclusive (lo, hi) integer bounds per feature coordinate."""
        raise NotImplementedError

    def mutable_features(self) -> tuple[int, ...]:
        """Indices of feature coordinates that vary over reachable states."""
        raise NotImplementedError

    def decode_features(self, vector: Sequence[int]):
        """Inverse of ``encode_features`` onto valid non-terminal states.

        Returns None when the vector violates a state invariant (agent
        inside an obstacle, out-of-range coordinate, ...).
        """
        raise NotImplementedError

    # -- serialization / display ----------------------------------------

    def state_to_jsonable(self, state) -> dict:
        raise NotImplementedError

    def state_from_jsonable(self, payload: dict):
        raise NotImplementedError

    def state_key(self, state) -> str:
        """Canonical string key for a state (stable across processes)."""
        return json.dumps(self.state_to_jsonable(state), sort_keys=True)

    def render(self, state) -> str:
        raise NotImplementedError


def replay(env: Environment, trajectory: Trajectory, upto: int) -> Any:
    """Re-execute the recorded (action, step seed) pairs up to ``upto``.

    Returns the state reached after ``upto`` steps; by seeded purity it
    equals the recorded state at that index exactly.
    """
    if upto < 0 or upto > len(trajectory):
        raise IndexError(f"replay index {upto} outside trajectory of length {len(trajectory)}")
    state = trajectory.initial_state
    for step in trajectory.steps[:upto]:
        state = env.step(state, step.action, step.step_seed).next_state
    return state


def save_trajectories(path, env: Environment, trajectories: Iterable[Trajectory]) -> None:
    """Write trajectories as line-delimited JSON records."""
    with open(path, "w", encoding="utf-8") as fh:
        for tid, traj in enumerate(trajectories):
            header = {
                "kind": "trajectory",
                "id": tid,
                "env": traj.env_name,
                "initial_state": env.state_to_jsonable(traj.initial_state),
            }
            fh.write(json.dumps(header, sort_keys=True) + "\n")
            for i, step in enumerate(traj.steps):
                row = {
                    "kind": "step",
                    "trajectory_id": tid,
                    "step_index": i,
                    "state": env.state_to_jsonable(step.state),
                    "action": step.action,
                    "reward": step.reward,
                    "step_seed": step.step_seed,
                    "next_state": env.state_to_jsonable(step.next_state),
                }
                fh.write(json.dumps(row, sort_keys=True) + "\n")


def load_trajectories(path, env: Environment) -> list[Trajectory]:
    """Read trajectories written by :func:`save_trajectories`.

    Lines of other kinds (e.g. factual records appended by the harness)
    are ignored, so the same file format serves both purposes.
    """
    headers: dict[int, dict] = {}
    steps: dict[int, list[tuple[int, TrajectoryStep]]] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            row = json.loads(line)
            kind = row.get("kind")
            if kind == "trajectory":
                if row["env"] != env.name:
                    raise ValueError(f"trajectory recorded for {row['env']!r}, not {env.name!r}")
                headers[row["id"]] = row
            elif kind == "step":
                step = TrajectoryStep(
                    state=env.state_from_jsonable(row["state"]),
                    action=int(row["action"]),
                    reward=float(row["reward"]),
                    step_seed=int(row["step_seed"]),
                    next_state=env.state_from_jsonable(row["next_state"]),
                )
                steps.setdefault(row["trajectory_id"], []).append((row["step_index"], step))
    out = []
    for tid in sorted(headers):
        ordered = tuple(s for _, s in sorted(steps.get(tid, []), key=lambda p: p[0]))
        out.append(
            Trajectory(
                env_name=headers[tid]["env"],
                initial_state=env.state_from_jsonable(headers[tid]["initial_state"]),
                steps=ordered,
            )
        )
    return out
