"""Deterministic 64-bit PRNG used for weight initialization.

Two cooperating generators, both fully specified so that any
reimplementation can reproduce the parameter tensors bit for bit:

* ``Xorshift64Star`` -- the classic xorshift64* recurrence
  (shifts 12/25/27, output multiplier 0x2545F4914F6CDD1D).  Used as the
  master stream that hands one 64-bit sub-seed to each parameter tensor.
* ``splitmix64_fill`` -- the SplitMix64 counter generator
  (increment 0x9E3779B97F4A7C15, mix multipliers 0xBF58476D1CE4E5B9 and
  0x94D049BB133111EB).  Counter-indexed, therefore vectorizable; used to
  fill each tensor from its sub-seed.

Doubles are formed from the top 53 bits: ``(x >> 11) * 2**-53``.
"""

from __future__ import annotations

import numpy as np

_MASK = (1 << 64) - 1

_SPLITMIX_INC = 0x9E3779B97F4A7C15
_SPLITMIX_MUL1 = 0xBF58476D1CE4E5B9
_SPLITMIX_MUL2 = 0x94D049BB133111EB
_XORSHIFT_MUL = 0x2545F4914F6CDD1D


def _splitmix64_scalar(state: int) -> int:
    z = (state + _SPLITMIX_INC) & _MASK
    z = ((z ^ (z >> 30)) * _SPLITMIX_MUL1) & _MASK
    z = ((z ^ (z >> 27)) * _SPLITMIX_MUL2) & _MASK
    return z ^ (z >> 31)


class Xorshift64Star:
    """xorshift64* stream; the zero state is avoided by seed mixing."""

    def __init__(self, seed: int):
        state = _splitmix64_scalar(seed & _MASK)
        self._state = state if state != 0 else _SPLITMIX_INC

    def next_u64(self) -> int:
        x = self._state
        x ^= x >> 12
        x = (x ^ (x << 25)) & _MASK
        x ^= x >> 27
        self._state = x
        return (x * _XORSHIFT_MUL) & _MASK


def splitmix64_fill(seed: int, n: int) -> np.ndarray:
    """Return ``n`` u64 outputs of SplitMix64 seeded at ``seed``."""
    states = (
        np.uint64(seed & _MASK)
        + np.uint64(_SPLITMIX_INC) * np.arange(1, n + 1, dtype=np.uint64)
    )
    z = (states ^ (states >> np.uint64(30))) * np.uint64(_SPLITMIX_MUL1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_SPLITMIX_MUL2)
    return z ^ (z >> np.uint64(31))


def uniform(seed: int, shape, low: float, high: float) -> np.ndarray:
    """Deterministic uniform [low, high) tensor from a SplitMix64 stream."""
    n = int(np.prod(shape, dtype=np.int64)) if shape else 1
    bits = splitmix64_fill(seed, n)
    u = (bits >> np.uint64(11)).astype(np.float64) * 2.0**-53
    return (low + (high - low) * u).reshape(shape)
