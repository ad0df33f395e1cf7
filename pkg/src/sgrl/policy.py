"""Black-box policy interface with a tabular Q-learning default.

Everything downstream talks to a :class:`QFunction`: a mapping from
states to per-action values. The bundled implementation is a plain
Q-table trained by epsilon-greedy temporal-difference learning, which
is enough for the grid tasks while keeping the explanation machinery
model-agnostic.
"""
from __future__ import annotations

import abc
import json
from dataclasses import dataclass

import numpy as np

from .envs.base import Environment
from .seeding import draw_step_seed, rng_from


def softmax(values) -> np.ndarray:
    """Numerically stable softmax over a value vector."""
    v = np.asarray(values, dtype=float)
    z = np.exp(v - v.max())
    return z / z.sum()


class QFunction(abc.ABC):
    """State -> per-action value vector, plus the derived policy."""

    n_actions: int

    @abc.abstractmethod
    def q_values(self, state) -> np.ndarray:
        """Finite value per action; callers must not mutate the result."""

    def greedy_action(self, state) -> int:
        # argmax returns the lowest index among ties, which is the
        # documented deterministic tie-break.
        return int(np.argmax(self.q_values(state)))

    def action_distribution(self, state) -> np.ndarray:
        return softmax(self.q_values(state))


def greedy_action(q: QFunction, state) -> int:
    return q.greedy_action(state)


def action_distribution(q: QFunction, state) -> np.ndarray:
    return q.action_distribution(state)


class QTable(QFunction):
    """Dict-backed Q-function; unseen states score zero everywhere.

    Treated as immutable once constructed, so greedy actions and softmax
    distributions are cached per state.
    """

    def __init__(self, n_actions: int, table: dict | None = None):
        self.n_actions = n_actions
        self._table = dict(table or {})
        self._zero = np.zeros(n_actions)
        self._greedy_cache: dict = {}
        self._dist_cache: dict = {}

    def __len__(self) -> int:
        return len(self._table)

    def __contains__(self, state) -> bool:
        return state in self._table

    def items(self):
        return self._table.items()

    def q_values(self, state) -> np.ndarray:
        return self._table.get(state, self._zero)

    def greedy_action(self, state) -> int:
        a = self._greedy_cache.get(state)
        if a is None:
            a = int(np.argmax(self.q_values(state)))
            self._greedy_cache[state] = a
        return a

    def action_distribution(self, state) -> np.ndarray:
        d = self._dist_cache.get(state)
        if d is None:
            d = softmax(self.q_values(state))
            self._dist_cache[state] = d
        return d


@dataclass(frozen=True)
class TrainingConfig:
    steps: int = 300_000
    learning_rate: float = 0.1
    discount: float = 0.95
    epsilon_start: float = 1.0
    epsilon_end: float = 0.05
    epsilon_decay_steps: int | None = None  # default: first half of training
    seed: int = 0

    def __post_init__(self):
        if self.steps < 0:
            raise ValueError("steps must be non-negative")
        if not 0.0 < self.learning_rate <= 1.0:
            raise ValueError("learning_rate must lie in (0, 1]")
        if not 0.0 <= self.discount <= 1.0:
            raise ValueError("discount must lie in [0, 1]")


def train(env: Environment, config: TrainingConfig | None = None) -> QTable:
    """Tabular Q-learning over ``config.steps`` environment steps.

    Fully deterministic given ``config.seed``: exploration, step seeds,
    and episode resets all derive from one generator.
    """
    config = config or TrainingConfig()
    rng = rng_from(config.seed)
    decay = config.epsilon_decay_steps or max(1, config.steps // 2)
    table: dict = {}

    def q_row(state) -> np.ndarray:
        row = table.get(state)
        if row is None:
            row = np.zeros(env.n_actions)
            table[state] = row
        return row

    state = env.initial_state()
    steps_in_episode = 0
    for t in range(config.steps):
        frac = min(1.0, t / decay)
        epsilon = config.epsilon_start + (config.epsilon_end - config.epsilon_start) * frac
        row = q_row(state)
        if rng.random() < epsilon:
            action = int(rng.integers(env.n_actions))
        else:
            action = int(np.argmax(row))
        tr = env.step(state, action, draw_step_seed(rng))
        target = tr.reward
        if not tr.terminal:
            target += config.discount * float(np.max(q_row(tr.next_state)))
        row[action] += config.learning_rate * (target - row[action])
        state = tr.next_state
        steps_in_episode += 1
        if tr.terminal or steps_in_episode >= env.max_episode_steps:
            state = env.initial_state()
            steps_in_episode = 0
    return QTable(env.n_actions, table)


def save_qtable(path, q: QTable, env: Environment) -> None:
    """One JSON line per state: canonical state plus its value vector."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps({"kind": "header", "env": env.name, "n_actions": q.n_actions}) + "\n")
        rows = sorted(
            (env.state_key(state), env.state_to_jsonable(state), values)
            for state, values in q.items()
        )
        for _, jsonable, values in rows:
            fh.write(
                json.dumps({"state": jsonable, "q": [float(v) for v in values]}, sort_keys=True)
                + "\n"
            )


def load_qtable(path, env: Environment) -> QTable:
    table: dict = {}
    n_actions = env.n_actions
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            row = json.loads(line)
            if row.get("kind") == "header":
                if row["env"] != env.name:
                    raise ValueError(f"Q-table trained for {row['env']!r}, not {env.name!r}")
                n_actions = int(row["n_actions"])
                continue
            state = env.state_from_jsonable(row["state"])
            table[state] = np.array(row["q"], dtype=float)
    return QTable(n_actions, table)
