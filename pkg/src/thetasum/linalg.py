"""Small dense matrix kernels.

Positive definite matrices are factored as ``Y = U V U^T`` with ``U`` unit
upper-triangular and ``V`` positive diagonal. The factorization eliminates
from the bottom-right corner, so ``v_n = Y[n-1, n-1]`` and ``v_1`` is the
Schur complement ``1 / (Y^{-1})[0, 0]``.

Matrices are plain ``numpy`` arrays; the helpers here validate and convert.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .errors import DimensionMismatch, NotPositiveDefinite

MAX_DIM = 8
PIVOT_RTOL = 1e-12


def max_rel_err(a, b) -> float:
    """Max-entry error of ``a`` against ``b``, relative to ``max(1, max|b|)``."""
    a = np.asarray(a)
    b = np.asarray(b)
    scale = max(1.0, float(np.max(np.abs(b)))) if b.size else 1.0
    return float(np.max(np.abs(a - b))) / scale if a.size else 0.0


def as_square(a, name="matrix") -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"{name} must be square, got shape {a.shape}")
    if a.shape[0] > MAX_DIM or a.shape[0] < 1:
        raise DimensionMismatch(f"{name}: dimension {a.shape[0]} outside 1..{MAX_DIM}")
    return a


def sym(a) -> np.ndarray:
    """Return the exactly symmetric part ``(a + a^T) / 2``."""
    a = as_square(a)
    return 0.5 * (a + a.T)


@dataclass(frozen=True)
class UVDecomp:
    U: np.ndarray
    v: np.ndarray

    @property
    def n(self) -> int:
        return len(self.v)

    def reconstruct(self) -> np.ndarray:
        return (self.U * self.v) @ self.U.T

    def det(self) -> float:
        return float(np.prod(self.v))


def uv_decompose(Y) -> UVDecomp:
    """Factor a positive definite ``Y`` as ``U diag(v) U^T``.

    Raises NotPositiveDefinite when a pivot is not finite or falls below
    ``1e-12`` times the largest diagonal entry.
    """
    Y = sym(Y)
    if not np.all(np.isfinite(Y)):
        raise NotPositiveDefinite("non-finite entries")
    n = Y.shape[0]
    scale = float(np.max(np.abs(np.diag(Y))))
    if not scale > 0:
        raise NotPositiveDefinite("zero diagonal")
    W = Y.copy()
    U = np.eye(n)
    v = np.empty(n)
    for k in range(n - 1, -1, -1):
        p = W[k, k]
        if not np.isfinite(p) or p <= PIVOT_RTOL * scale:
            raise NotPositiveDefinite(f"pivot {k} = {p!r}")
        v[k] = p
        col = W[:k, k] / p
        U[:k, k] = col
        W[:k, :k] -= p * np.outer(col, col)
    return UVDecomp(U, v)


def is_posdef(Y) -> bool:
    try:
        uv_decompose(Y)
    except NotPositiveDefinite:
        return False
    return True


def sqrt_upper(Y) -> np.ndarray:
    """Upper-triangular ``R`` with positive diagonal and ``R R^T = Y``."""
    d = uv_decompose(Y)
    return d.U * np.sqrt(d.v)


def inv_sqrt_upper(Y) -> np.ndarray:
    """Inverse of :func:`sqrt_upper`, i.e. ``(Y^{1/2})^{-1}``, not ``(Y^{-1})^{1/2}``."""
    R = sqrt_upper(Y)
    return solve_triangular(R, np.eye(R.shape[0]), lower=False)


def random_spd(rng: np.random.Generator, n: int, scale: float = 1.0) -> np.ndarray:
    G = rng.normal(size=(n, n)) * scale
    return G.T @ G + np.eye(n)


def random_unitary(rng: np.random.Generator, n: int) -> np.ndarray:
    """Haar-distributed unitary matrix (QR of a complex Ginibre matrix)."""
    z = (rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))) / np.sqrt(2.0)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


# JSON helpers shared by every module and the CLI.


def matrix_to_json(a) -> dict:
    a = np.asarray(a)
    if np.iscomplexobj(a):
        return {"n": int(a.shape[0]), "re": a.real.tolist(), "im": a.imag.tolist()}
    return {"n": int(a.shape[0]), "rows": a.tolist()}


def matrix_from_json(obj) -> np.ndarray:
    if isinstance(obj, list):
        return np.asarray(obj, dtype=float)
    if "rows" in obj:
        return np.asarray(obj["rows"], dtype=float)
    if "re" in obj:
        return np.asarray(obj["re"], dtype=float) + 1j * np.asarray(obj.get("im", 0.0), dtype=float)
    raise ValueError("matrix JSON needs 'rows' or 're'/'im'")


def complex_to_json(z) -> dict:
    z = np.asarray(z)
    return {"re": z.real.tolist(), "im": z.imag.tolist()}


def complex_from_json(obj):
    if isinstance(obj, (int, float)):
        return complex(obj)
    if isinstance(obj, list):
        return np.asarray(obj, dtype=complex)
    re = np.asarray(obj.get("re", 0.0), dtype=float)
    im = np.asarray(obj.get("im", 0.0), dtype=float)
    out = re + 1j * im
    return complex(out) if out.ndim == 0 else out
