"""Deterministic seed derivation and cheap per-step random draws.

Every stochastic choice in the library flows through an explicit integer
seed, so trajectories, searches, and whole experiment runs replay exactly.
Bulk randomness (training loops, search operators) uses numpy generators;
single environment transitions use a counter-based hash stream because a
step must be a pure function of its seed and is called millions of times.
"""
from __future__ import annotations

import hashlib

import numpy as np

_MASK64 = (1 << 64) - 1


def stable_seed(*parts) -> int:
    """Derive a 64-bit seed from a mix of ints, strings, and tuples.

    Unlike builtin ``hash``, the result does not depend on
    ``PYTHONHASHSEED`` or the platform, so seeds derived from the same
    inputs agree across runs and machines.
    """
    h = hashlib.blake2b(digest_size=8)
    for part in parts:
        h.update(_canonical_bytes(part))
    return int.from_bytes(h.digest(), "big")


def _canonical_bytes(part) -> bytes:
    if isinstance(part, bool):
        return b"b" + bytes([part])
    if isinstance(part, (int, np.integer)):
        return b"i" + int(part).to_bytes(16, "big", signed=True)
    if isinstance(part, str):
        return b"s" + part.encode("utf-8") + b"\x00"
    if isinstance(part, (tuple, list)):
        out = b"t"
        for item in part:
            out += _canonical_bytes(item)
        return out + b"\x00"
    raise TypeError(f"cannot derive a seed from {type(part).__name__}")


class StepDraws:
    """Stream of uniforms in [0, 1) derived from one step seed.

    Uses the splitmix64 output function: each draw is a pure function of
    (seed, draw index), so replaying a step with the same seed reproduces
    the same stochastic events at a fraction of the cost of constructing
    a full generator per step.
    """

    __slots__ = ("_x",)

    def __init__(self, seed: int):
        self._x = seed & _MASK64

    def uniform(self) -> float:
        self._x = (self._x + 0x9E3779B97F4A7C15) & _MASK64
        z = self._x
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        z ^= z >> 31
        return z / 2**64


def rng_from(seed: int) -> np.random.Generator:
    """numpy generator for bulk draws (training, search operators)."""
    return np.random.default_rng(seed & _MASK64)


def draw_step_seed(rng: np.random.Generator) -> int:
    """Sample a fresh per-step seed to record into a trajectory."""
    return int(rng.integers(0, 1 << 64, dtype=np.uint64))
