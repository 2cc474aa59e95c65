"""Smooth dyadic resolution of the indicator of an open box.

``f0`` is a smooth step with ``f0(x) + f0(1 - x) = 1``; ``f1`` is a bump
supported in ``[1/6, 2/3]`` built from it, and the sums
``sum_j f1(2^j x) + f1(2^j (1 - x))`` resolve the indicator of ``(0, 1)``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, GuardViolation


@dataclass(frozen=True)
class PartitionConfig:
    J_max: int = 14
    f0_kind: str = "exp-bump"

    def __post_init__(self):
        if self.J_max < 0:
            raise GuardViolation("J_max must be nonnegative")
        if self.f0_kind != "exp-bump":
            raise ValueError(f"unknown f0 kind {self.f0_kind!r}")


@dataclass(frozen=True)
class DyadicIndex:
    j: tuple
    S: frozenset = frozenset()

    def __post_init__(self):
        j = tuple(int(v) for v in np.atleast_1d(self.j))
        if any(v < 0 for v in j):
            raise GuardViolation("dyadic indices must be nonnegative")
        S = frozenset(int(i) for i in self.S)
        if any(not 0 <= i < len(j) for i in S):
            raise DimensionMismatch("S must be a subset of the coordinate indices")
        object.__setattr__(self, "j", j)
        object.__setattr__(self, "S", S)


def _sigma(x):
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    pos = x > 0
    out[pos] = np.exp(-1.0 / x[pos])
    return out


def f0(x):
    """``sigma(x) / (sigma(x) + sigma(1 - x))`` with ``sigma(x) = exp(-1/x)`` for ``x > 0``."""
    x = np.asarray(x, dtype=float)
    a = _sigma(x)
    b = _sigma(1.0 - x)
    out = a / (a + b)
    return out if out.ndim else float(out)


def f1(x):
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    lo = (x >= 1 / 6) & (x <= 1 / 3)
    hi = (x > 1 / 3) & (x <= 2 / 3)
    out[lo] = f0(6.0 * x[lo] - 1.0)
    out[hi] = f0(2.0 - 3.0 * x[hi])
    return out if out.ndim else float(out)


def partition_terms(x, J: int):
    """Array of shape ``(J + 1, 2)`` with ``f1(2^j x)`` and ``f1(2^j (1 - x))``."""
    if J < 0:
        raise GuardViolation("J must be nonnegative")
    p = 2.0 ** np.arange(J + 1)
    return np.stack([f1(p * x), f1(p * (1.0 - x))], axis=-1)


def partition_eval(x, J: int):
    """Truncated partition sum; vectorized over ``x``."""
    if J < 0:
        raise GuardViolation("J must be nonnegative")
    x = np.asarray(x, dtype=float)
    p = 2.0 ** np.arange(J + 1)
    xs = x[..., None] * p
    out = np.sum(f1(xs) + f1(p - xs), axis=-1)
    out = np.where((x > 0) & (x < 1), out, 0.0)
    return out if out.ndim else float(out)


def box_term(x, idx: DyadicIndex, b):
    """``f_n((x B^{-1} + x_S) E_S A_j)``, with ``f_n`` the product of ``f1`` over coordinates."""
    x = np.asarray(x, dtype=float)
    b = np.atleast_1d(np.asarray(b, dtype=float))
    n = len(b)
    if x.shape[-1] != n or len(idx.j) != n:
        raise DimensionMismatch("point, index and box differ in length")
    u = x / b
    out = np.ones(x.shape[:-1])
    for i in range(n):
        s = (1.0 - u[..., i]) if i in idx.S else u[..., i]
        out = out * f1(2.0 ** idx.j[i] * s)
    return out if out.ndim else float(out)


def box_indices(n: int, J: int):
    for j in itertools.product(range(J + 1), repeat=n):
        for k in range(n + 1):
            for S in itertools.combinations(range(n), k):
                yield DyadicIndex(j, frozenset(S))


def box_partition(x, b, J: int):
    """Sum of :func:`box_term` over all ``(j, S)`` with ``j_i <= J``.

    The sum factorizes over coordinates, so it is evaluated as a product of
    one-dimensional partitions; :func:`box_partition_slow` sums the terms.
    """
    x = np.asarray(x, dtype=float)
    b = np.atleast_1d(np.asarray(b, dtype=float))
    out = np.ones(x.shape[:-1])
    for i in range(len(b)):
        out = out * partition_eval(x[..., i] / b[i], J)
    return out


def box_partition_slow(x, b, J: int):
    x = np.asarray(x, dtype=float)
    return sum(box_term(x, idx, b) for idx in box_indices(len(np.atleast_1d(b)), J))


def box_indicator(x, b):
    x = np.asarray(x, dtype=float)
    return np.all((x > 0) & (x < np.asarray(b, dtype=float)), axis=-1).astype(float)
