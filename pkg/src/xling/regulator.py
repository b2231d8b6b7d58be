"""Phoneme length regulation and duration expansion.

The regulator collapses an IPA-resolution embedding matrix back to
language-dependent-phoneme resolution by summing, for each phoneme, the
rows of its IPA decomposition (segment boundaries come from the cumulative
phoneme-length sequence).  Expansion is the usual duration-driven row
repetition that lifts phoneme-resolution embeddings to frame resolution.

All four operators here (aggregate, expand, stop-gradient, gradient
reversal) are linear, so their backward passes are closed-form transposes
exposed as :func:`linear_backward` -- no autodiff framework involved.

Everything is float64.  Segment sums accumulate rows strictly in index
order, which makes results reproducible bit for bit and lets tests compare
against naive reference loops with ``==`` rather than tolerances.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import LengthMismatchError

__all__ = [
    "Aggregate",
    "Expand",
    "StopGrad",
    "GRL",
    "cumulative_lengths",
    "aggregate",
    "expand",
    "linear_forward",
    "linear_backward",
]


def _as_matrix(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 2:
        raise LengthMismatchError(f"{name} must be 2-D, got shape {arr.shape}")
    if arr.size and not np.all(np.isfinite(arr)):
        raise LengthMismatchError(f"{name} contains non-finite entries")
    return arr


def _as_lengths(lengths) -> np.ndarray:
    arr = np.asarray(lengths, dtype=np.int64).reshape(-1)
    if arr.size and arr.min() < 1:
        raise LengthMismatchError("phoneme lengths must all be >= 1")
    return arr


def _as_durations(durations) -> np.ndarray:
    arr = np.asarray(durations, dtype=np.int64).reshape(-1)
    if arr.size and arr.min() < 0:
        raise LengthMismatchError("durations must all be >= 0")
    return arr


@dataclass(frozen=True)
class Aggregate:
    """Segment-sum by phoneme lengths (IPA rows -> phoneme rows)."""

    lengths: tuple

    def __post_init__(self):
        object.__setattr__(self, "lengths", tuple(int(v) for v in self.lengths))
        _as_lengths(self.lengths)


@dataclass(frozen=True)
class Expand:
    """Row repetition by frame durations (phoneme rows -> frame rows)."""

    durations: tuple

    def __post_init__(self):
        object.__setattr__(self, "durations", tuple(int(v) for v in self.durations))
        _as_durations(self.durations)


@dataclass(frozen=True)
class StopGrad:
    """Identity forward, zero backward."""


@dataclass(frozen=True)
class GRL:
    """Identity forward, backward scaled by -lam (lam > 0)."""

    lam: float

    def __post_init__(self):
        if not (self.lam > 0):
            raise LengthMismatchError("GRL scale must be positive")


def cumulative_lengths(lengths) -> np.ndarray:
    """Cumulative sums with a leading zero: c[0] = 0, c[t] = sum(L[:t])."""
    arr = _as_lengths(lengths)
    c = np.zeros(arr.size + 1, dtype=np.int64)
    np.cumsum(arr, out=c[1:])
    return c


def _segment_sum(X: np.ndarray, bounds: np.ndarray) -> np.ndarray:
    """Sum rows of X per [bounds[i], bounds[i+1]) segment, in index order."""
    n = bounds.size - 1
    out = np.zeros((n, X.shape[1]), dtype=np.float64)
    for i in range(n):
        acc = out[i]
        for k in range(bounds[i], bounds[i + 1]):
            acc += X[k]
    return out


def aggregate(X, lengths) -> np.ndarray:
    """Collapse IPA-resolution rows to one summed row per phoneme."""
    Xm = _as_matrix(X, "X")
    c = cumulative_lengths(lengths)
    if Xm.shape[0] != c[-1]:
        raise LengthMismatchError(
            f"X has {Xm.shape[0]} rows but lengths sum to {c[-1]}"
        )
    return _segment_sum(Xm, c)


def expand(Y, durations) -> np.ndarray:
    """Repeat row i of Y durations[i] times; zero durations drop the row."""
    Ym = _as_matrix(Y, "Y")
    d = _as_durations(durations)
    if Ym.shape[0] != d.size:
        raise LengthMismatchError(f"Y has {Ym.shape[0]} rows but {d.size} durations")
    return np.repeat(Ym, d, axis=0)


def linear_forward(tag, X) -> np.ndarray:
    """Apply the tagged operator's forward map."""
    if isinstance(tag, Aggregate):
        return aggregate(X, tag.lengths)
    if isinstance(tag, Expand):
        return expand(X, tag.durations)
    if isinstance(tag, (StopGrad, GRL)):
        return _as_matrix(X, "X").copy()
    raise TypeError(f"unknown operator tag {tag!r}")


def linear_backward(tag, upstream) -> np.ndarray:
    """Apply the transpose of the tagged operator to an upstream gradient.

    Aggregate broadcasts each phoneme-level row back over its IPA segment;
    Expand sums each duration segment back to one phoneme-level row;
    StopGrad yields zeros; GRL scales by -lam.
    """
    g = _as_matrix(upstream, "upstream")
    if isinstance(tag, Aggregate):
        lengths = _as_lengths(tag.lengths)
        if g.shape[0] != lengths.size:
            raise LengthMismatchError(
                f"upstream has {g.shape[0]} rows but {lengths.size} lengths"
            )
        return np.repeat(g, lengths, axis=0)
    if isinstance(tag, Expand):
        d = _as_durations(tag.durations)
        bounds = np.zeros(d.size + 1, dtype=np.int64)
        np.cumsum(d, out=bounds[1:])
        if g.shape[0] != bounds[-1]:
            raise LengthMismatchError(
                f"upstream has {g.shape[0]} rows but durations sum to {bounds[-1]}"
            )
        return _segment_sum(g, bounds)
    if isinstance(tag, StopGrad):
        return np.zeros_like(g)
    if isinstance(tag, GRL):
        return -tag.lam * g
    raise TypeError(f"unknown operator tag {tag!r}")
