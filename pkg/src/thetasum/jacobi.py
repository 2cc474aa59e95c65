"""Heisenberg group, its symplectic action, and the Jacobi group.

Integral symplectic matrices are kept as ``int64`` arrays so that parity
computations are exact. Products of integral matrices go through
:func:`int_matmul`, which refuses inputs large enough to overflow.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, IntegerOverflowGuard, NotIntegral, NotSymplectic
from .symplectic import J0, blocks, rank, sp_inverse

ENTRY_GUARD = 2 ** 40


@dataclass(frozen=True)
class HeisenbergElem:
    x: np.ndarray
    y: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        x = np.atleast_1d(np.asarray(self.x, dtype=float))
        y = np.atleast_1d(np.asarray(self.y, dtype=float))
        if x.shape != y.shape or x.ndim != 1:
            raise DimensionMismatch("x and y must be row vectors of equal length")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "t", float(self.t))

    @property
    def n(self) -> int:
        return len(self.x)

    @classmethod
    def zero(cls, n: int) -> "HeisenbergElem":
        return cls(np.zeros(n), np.zeros(n), 0.0)

    def to_json(self) -> dict:
        return {"x": self.x.tolist(), "y": self.y.tolist(), "t": self.t}

    @classmethod
    def from_json(cls, obj) -> "HeisenbergElem":
        return cls(obj["x"], obj["y"], obj.get("t", 0.0))


def h_mul(h1: HeisenbergElem, h2: HeisenbergElem) -> HeisenbergElem:
    if h1.n != h2.n:
        raise DimensionMismatch("Heisenberg elements of different rank")
    t = h1.t + h2.t + 0.5 * (h1.y @ h2.x - h1.x @ h2.y)
    return HeisenbergElem(h1.x + h2.x, h1.y + h2.y, t)


def h_inv(h: HeisenbergElem) -> HeisenbergElem:
    return HeisenbergElem(-h.x, -h.y, -h.t)


def h_act(g, h: HeisenbergElem) -> HeisenbergElem:
    """Right action ``(x, y, t)^g = (xA + yC, xB + yD, t)``."""
    if rank(g) != h.n:
        raise DimensionMismatch("group element and Heisenberg element differ in rank")
    A, B, C, D = blocks(np.asarray(g, dtype=float))
    return HeisenbergElem(h.x @ A + h.y @ C, h.x @ B + h.y @ D, h.t)


@dataclass(frozen=True)
class JacobiElem:
    h: HeisenbergElem
    g: np.ndarray

    @classmethod
    def identity(cls, n: int) -> "JacobiElem":
        return cls(HeisenbergElem.zero(n), np.eye(2 * n))


def jacobi_mul(j1: JacobiElem, j2: JacobiElem) -> JacobiElem:
    """``(h1, g1)(h2, g2) = (h1 h2^{g1^{-1}}, g1 g2)``."""
    if j1.h.n != j2.h.n:
        raise DimensionMismatch("Jacobi elements of different rank")
    g1 = np.asarray(j1.g, dtype=float)
    h = h_mul(j1.h, h_act(sp_inverse(g1), j2.h))
    return JacobiElem(h, g1 @ np.asarray(j2.g, dtype=float))


def jacobi_inv(j: JacobiElem) -> JacobiElem:
    return JacobiElem(h_act(j.g, h_inv(j.h)), sp_inverse(j.g))


# Integral symplectic matrices.


def as_integral(g) -> np.ndarray:
    a = np.asarray(g)
    if a.dtype.kind in "iu":
        out = a.astype(np.int64)
    else:
        r = np.rint(a)
        if not np.all(np.isfinite(a)) or np.max(np.abs(a - r), initial=0.0) > 0:
            raise NotIntegral("matrix has non-integer entries")
        out = r.astype(np.int64)
    if np.max(np.abs(out), initial=0) > ENTRY_GUARD:
        raise IntegerOverflowGuard("integral matrix entry exceeds 2^40")
    return out


def int_matmul(a, b) -> np.ndarray:
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    bound = int(np.max(np.abs(a), initial=0)) * int(np.max(np.abs(b), initial=0)) * a.shape[-1]
    if bound >= 2 ** 62:
        raise IntegerOverflowGuard("integer product may overflow int64")
    out = a @ b
    if np.max(np.abs(out), initial=0) > ENTRY_GUARD:
        raise IntegerOverflowGuard("integral matrix entry exceeds 2^40")
    return out


def is_int_symplectic(gamma) -> bool:
    gamma = np.asarray(gamma, dtype=np.int64)
    n = rank(gamma)
    J = J0(n).astype(np.int64)
    return bool(np.array_equal(int_matmul(int_matmul(gamma, J), gamma.T), J))


def check_gamma(gamma) -> np.ndarray:
    gamma = as_integral(gamma)
    if not is_int_symplectic(gamma):
        raise NotSymplectic("integral matrix is not symplectic")
    return gamma


def h_gamma(gamma) -> HeisenbergElem:
    """``(r, s, 0)`` with entries ½ where diag(C D^T), diag(A B^T) are odd."""
    gamma = check_gamma(gamma)
    A, B, C, D = blocks(gamma)
    cd = np.sum(C * D, axis=1)
    ab = np.sum(A * B, axis=1)
    return HeisenbergElem(0.5 * (cd % 2), 0.5 * (ab % 2), 0.0)


@dataclass(frozen=True)
class GammaTildeElem:
    m: np.ndarray
    n_vec: np.ndarray
    t: float
    gamma: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "m", np.atleast_1d(as_integral(self.m)))
        object.__setattr__(self, "n_vec", np.atleast_1d(as_integral(self.n_vec)))
        object.__setattr__(self, "gamma", check_gamma(self.gamma))
        object.__setattr__(self, "t", float(self.t))
        if len(self.m) != rank(self.gamma) or len(self.n_vec) != len(self.m):
            raise DimensionMismatch("lattice vectors and gamma differ in rank")

    @property
    def n(self) -> int:
        return len(self.m)

    def to_jacobi(self) -> JacobiElem:
        u = HeisenbergElem(self.m, self.n_vec, self.t)
        return JacobiElem(h_mul(u, h_gamma(self.gamma)), self.gamma.astype(float))

    def to_json(self) -> dict:
        A, B, C, D = blocks(self.gamma)
        return {
            "m": self.m.tolist(),
            "n": self.n_vec.tolist(),
            "t": self.t,
            "gamma": {"A": A.tolist(), "B": B.tolist(), "C": C.tolist(), "D": D.tolist()},
        }

    @classmethod
    def from_json(cls, obj) -> "GammaTildeElem":
        gm = obj["gamma"]
        gamma = np.block([[np.asarray(gm["A"]), np.asarray(gm["B"])], [np.asarray(gm["C"]), np.asarray(gm["D"])]])
        return cls(obj["m"], obj["n"], obj.get("t", 0.0), gamma)


def gamma_tilde_apply(e: GammaTildeElem, j: JacobiElem) -> JacobiElem:
    return jacobi_mul(e.to_jacobi(), j)


def gamma_tilde_mul(e1: GammaTildeElem, e2: GammaTildeElem, tol: float = 1e-9) -> GammaTildeElem:
    """Product inside the integral Jacobi subgroup.

    The Heisenberg part of the product equals ``u h_{g1 g2}`` for some ``u``
    with integral x and y parts; NotIntegral is raised if that fails.
    """
    p = jacobi_mul(e1.to_jacobi(), e2.to_jacobi())
    gamma = int_matmul(e1.gamma, e2.gamma)
    u = h_mul(p.h, h_inv(h_gamma(gamma)))
    m, nv = np.rint(u.x), np.rint(u.y)
    if max(np.max(np.abs(u.x - m)), np.max(np.abs(u.y - nv))) > tol:
        raise NotIntegral("product is not of the form (m, n, t) h_gamma")
    return GammaTildeElem(m, nv, u.t, gamma)


def int_generators(n: int) -> list:
    """Integral symplectic generators for words, closed under inverses."""
    I = np.eye(n, dtype=np.int64)
    Z = np.zeros((n, n), dtype=np.int64)
    gens = []

    def add(A, B, C, D):
        gens.append(np.block([[A, B], [C, D]]).astype(np.int64))

    for i in range(n):
        for j in range(i, n):
            S = np.zeros((n, n), dtype=np.int64)
            S[i, j] = S[j, i] = 1
            add(I, S, Z, I)
            add(I, -S, Z, I)
        E = np.zeros((n, n), dtype=np.int64)
        E[i, i] = 1
        # single-coordinate inversion and its inverse
        add(I - E, -E, E, I - E)
        add(I - E, E, -E, I - E)
        F = I.copy()
        F[i, i] = -1
        add(F, Z, Z, F)
    for i in range(n):
        for j in range(n):
            if i != j:
                T = I.copy()
                T[i, j] = 1
                Ti = I.copy()
                Ti[i, j] = -1
                add(T, Z, Z, Ti.T)
                add(Ti, Z, Z, T.T)
    J = J0(n).astype(np.int64)
    gens.append(J)
    gens.append(-J)
    return gens


def random_gamma(rng: np.random.Generator, n: int, length: int) -> np.ndarray:
    gens = int_generators(n)
    g = np.eye(2 * n, dtype=np.int64)
    for _ in range(length):
        g = int_matmul(g, gens[rng.integers(len(gens))])
    return g


def random_gamma_tilde(rng: np.random.Generator, n: int, length: int, spread: int = 3) -> GammaTildeElem:
    m = rng.integers(-spread, spread + 1, size=n)
    nv = rng.integers(-spread, spread + 1, size=n)
    return GammaTildeElem(m, nv, float(rng.normal()), random_gamma(rng, n, length))


def random_heisenberg(rng: np.random.Generator, n: int, scale: float = 1.0) -> HeisenbergElem:
    return HeisenbergElem(rng.normal(size=n) * scale, rng.normal(size=n) * scale, float(rng.normal()))
