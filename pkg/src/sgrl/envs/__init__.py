"""Seeded, exactly replayable grid environments."""
from __future__ import annotations

import json
from dataclasses import replace
from pathlib import Path

from .base import (
    Environment,
    Outcome,
    Trajectory,
    TrajectoryStep,
    Transition,
    load_trajectories,
    replay,
    save_trajectories,
)
from .frozen_lake import FrozenLake, FrozenLakeConfig, FrozenLakeState, LakeAction
from .gridworld import (
    GridAction,
    Gridworld,
    GridworldConfig,
    GridworldState,
    deterministic_config,
)

ENV_NAMES = ("gridworld", "frozen_lake")

_FACTORIES = {
    "gridworld": (Gridworld, GridworldConfig),
    "frozen_lake": (FrozenLake, FrozenLakeConfig),
}


def make_env(name: str, overrides=None) -> Environment:
    """Build an environment by name.

    ``overrides`` may be a dict of config fields or a path to a JSON
    file containing one; omitted fields keep their defaults.
    """
    if name not in _FACTORIES:
        raise ValueError(f"unknown environment {name!r}; expected one of {ENV_NAMES}")
    cls, cfg_cls = _FACTORIES[name]
    if overrides is None:
        return cls()
    if isinstance(overrides, (str, Path)):
        with open(overrides, "r", encoding="utf-8") as fh:
            overrides = json.load(fh)
    overrides = dict(overrides)
    overrides.pop("env", None)
    config = replace(cfg_cls(), **{k: _tupled(v) for k, v in overrides.items()})
    return cls(config)


def _tupled(value):
    if isinstance(value, list):
        return tuple(_tupled(v) for v in value)
    return value


def reset(env_spec, seed: int = 0):
    """Initial state of the named (or given) environment.

    Layouts are fixed, so the result is the same for every seed; the
    parameter is part of the interface for environments with randomized
    starts.
    """
    env = make_env(env_spec) if isinstance(env_spec, str) else env_spec
    del seed
    return env.initial_state()


__all__ = [
    "ENV_NAMES",
    "Environment",
    "FrozenLake",
    "FrozenLakeConfig",
    "FrozenLakeState",
    "GridAction",
    "Gridworld",
    "GridworldConfig",
    "GridworldState",
    "LakeAction",
    "Outcome",
    "Trajectory",
    "TrajectoryStep",
    "Transition",
    "deterministic_config",
    "load_trajectories",
    "make_env",
    "replay",
    "reset",
    "save_trajectories",
]
