"""Reduction theory for GL(n, Z) and Sp(n, Z).

``grenier_reduce`` moves a positive definite ``Y`` into the recursive domain
D' by ``Y -> A Y A^T``. Writing

    Y = [[1, r], [0, I]] diag(v1, Y1) [[1, 0], [r^T, I]]

the conditions are: ``v1`` maximal over the GL(n, Z) orbit, ``Y1`` reduced
recursively, ``|r_j| <= 1/2`` and ``0 <= r_1``. Since
``v1(A Y A^T) = 1 / (p Y^{-1} p^T)`` with ``p`` the first column of ``A^{-1}``,
maximizing ``v1`` is a shortest-vector problem for ``Y^{-1}``, solved exactly
by LLL followed by enumeration.

``siegel_reduce`` alternates GL reduction, integer translation of ``X`` and
"inversion" moves from a finite candidate set of cosets ``(C, D)`` until
``|det(C Z + D)| >= 1`` on the whole set.
"""

from __future__ import annotations

import functools
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, IterationLimit, NumericalBreakdown
from .jacobi import check_gamma, int_generators, int_matmul
from .linalg import as_square, sym
from .symplectic import IwasawaCoords, blocks, iwasawa, rank

DEFAULT_WORD_LENGTH = 8
DEFAULT_ENTRY_BOUND = 1
MAX_ITER = 1000
MOVE_TOL = 1e-12
TIE_RTOL = 1e-12


# Lattice kernels on Gram matrices.


def lll_gram(G, delta: float = 0.99):
    """LLL-reduce a Gram matrix. Returns integer ``T`` with ``T G T^T`` reduced."""
    G = np.array(G, dtype=float)
    n = G.shape[0]
    T = np.eye(n, dtype=np.int64)

    def gso(G):
        mu = np.zeros((n, n))
        Bn = np.zeros(n)
        for i in range(n):
            for j in range(i):
                mu[i, j] = (G[i, j] - np.dot(mu[j, :j] * Bn[:j], mu[i, :j])) / Bn[j]
            Bn[i] = G[i, i] - np.dot(mu[i, :i] ** 2, Bn[:i])
        return mu, Bn

    k = 1
    guard = 0
    while k < n:
        guard += 1
        if guard > 100000:
            raise IterationLimit("LLL did not terminate")
        mu, Bn = gso(G)
        for j in range(k - 1, -1, -1):
            q = int(np.rint(mu[k, j]))
            if q:
                T[k] -= q * T[j]
                G[k, :] -= q * G[j, :]
                G[:, k] -= q * G[:, j]
                mu, Bn = gso(G)
        if Bn[k] >= (delta - mu[k, k - 1] ** 2) * Bn[k - 1]:
            k += 1
        else:
            T[[k, k - 1]] = T[[k - 1, k]]
            G[[k, k - 1], :] = G[[k - 1, k], :]
            G[:, [k, k - 1]] = G[:, [k - 1, k]]
            k = max(k - 1, 1)
    return T


def short_vectors(G, bound: float):
    """All nonzero integer ``c`` (up to sign) with ``c G c^T <= bound`` (Fincke-Pohst)."""
    G = np.asarray(G, dtype=float)
    n = G.shape[0]
    # G = R^T R, so c G c^T = sum_i R_ii^2 (c_i + sum_{j>i} R_ij / R_ii c_j)^2
    R = np.linalg.cholesky(G).T
    qd = np.diag(R) ** 2
    qo = R / np.diag(R)[:, None]
    out = []
    c = np.zeros(n, dtype=np.int64)

    def rec(i, remaining):
        center = -float(qo[i, i + 1:] @ c[i + 1:])
        span = np.sqrt(max(remaining, 0.0) / qd[i])
        lo = int(np.ceil(center - span - 1e-9))
        hi = int(np.floor(center + span + 1e-9))
        for v in range(lo, hi + 1):
            c[i] = v
            rest = remaining - qd[i] * (v - center) ** 2
            if i == 0:
                if np.any(c):
                    out.append(c.copy())
            else:
                rec(i - 1, rest)
        c[i] = 0

    rec(n - 1, bound)
    vecs = []
    for v in out:
        nz = np.flatnonzero(v)
        if v[nz[0]] > 0:
            vecs.append(v)
    return vecs


def shortest_vector(G) -> np.ndarray:
    """A shortest nonzero integer vector of the Gram matrix ``G``."""
    G = np.asarray(G, dtype=float)
    T = lll_gram(G)
    Gr = T @ G @ T.T
    Gr = 0.5 * (Gr + Gr.T)
    bound = float(np.min(np.diag(Gr))) * (1 + 1e-9)
    cands = short_vectors(Gr, bound)
    best = None
    bestv = np.inf
    for cv in cands:
        p = cv @ T
        val = float(p @ G @ p)
        if val < bestv * (1 - 1e-15):
            best, bestv = p, val
    return np.asarray(best, dtype=np.int64)


def unimodular_with_image(p) -> np.ndarray:
    """Integer ``W`` with ``det W = ±1`` and ``W p^T = e_1^T`` for primitive ``p``."""
    p = np.array(p, dtype=np.int64)
    n = len(p)
    W = np.eye(n, dtype=np.int64)
    while np.count_nonzero(p) > 1:
        nz = np.flatnonzero(p)
        i = nz[np.argmin(np.abs(p[nz]))]
        for j in nz:
            if j != i:
                q = p[j] // p[i]
                p[j] -= q * p[i]
                W[j] -= q * W[i]
    k = int(np.flatnonzero(p)[0])
    if abs(p[k]) != 1:
        raise ValueError("vector is not primitive")
    if k:
        W[[0, k]] = W[[k, 0]]
        p[[0, k]] = p[[k, 0]]
    if p[0] < 0:
        W[0] = -W[0]
    return W


def int_inverse(A) -> np.ndarray:
    A = np.asarray(A, dtype=np.int64)
    inv = np.rint(np.linalg.inv(A.astype(float))).astype(np.int64)
    if not np.array_equal(int_matmul(A, inv), np.eye(A.shape[0], dtype=np.int64)):
        raise NumericalBreakdown("integer matrix inverse failed")
    return inv


# GL(n, Z) reduction.


@dataclass(frozen=True)
class GLReduction:
    A: np.ndarray
    reducedY: np.ndarray


def split_first(Y):
    """``(v1, r, Y1)`` with ``Y = [[1, r], [0, I]] diag(v1, Y1) [[1, 0], [r^T, I]]``."""
    Y = np.asarray(Y, dtype=float)
    Y1 = Y[1:, 1:]
    if Y.shape[0] == 1:
        return float(Y[0, 0]), np.zeros(0), Y1
    r = np.linalg.solve(Y1, Y[0, 1:])
    v1 = float(Y[0, 0] - r @ Y[0, 1:])
    return v1, r, Y1


def grenier_reduce(Y) -> GLReduction:
    Y = sym(as_square(Y, "Y"))
    A = _grenier(Y)
    return GLReduction(A, sym(A @ Y @ A.T))


def _grenier(Y) -> np.ndarray:
    n = Y.shape[0]
    if n == 1:
        return np.eye(1, dtype=np.int64)
    Gi = np.linalg.inv(Y)
    Gi = 0.5 * (Gi + Gi.T)
    p = shortest_vector(Gi)
    if Gi[0, 0] <= float(p @ Gi @ p) * (1 + TIE_RTOL):
        A0 = np.eye(n, dtype=np.int64)
    else:
        A0 = unimodular_with_image(p)
    Y0 = A0 @ Y @ A0.T
    A1 = _grenier(sym(Y0[1:, 1:]))
    D1 = np.eye(n, dtype=np.int64)
    D1[1:, 1:] = A1
    A = int_matmul(D1, A0)
    Y0 = A @ Y @ A.T
    _, r, _ = split_first(Y0)
    k = -np.rint(r).astype(np.int64)
    Tm = np.eye(n, dtype=np.int64)
    Tm[0, 1:] = k
    A = int_matmul(Tm, A)
    r = r + k
    if r[0] < 0:
        F = np.eye(n, dtype=np.int64)
        F[0, 0] = -1
        A = int_matmul(F, A)
    return A


def domain_prime_violations(Y, tol: float = 1e-9, _depth: int = 0) -> list:
    """Failed conditions of the recursive GL domain, empty if ``Y`` is in D'."""
    Y = np.asarray(Y, dtype=float)
    n = Y.shape[0]
    out = []
    if n == 1:
        if not Y[0, 0] > 0:
            out.append(f"level {_depth}: y <= 0")
        return out
    v1, r, Y1 = split_first(Y)
    Gi = np.linalg.inv(Y)
    Gi = 0.5 * (Gi + Gi.T)
    p = shortest_vector(Gi)
    vmax = 1.0 / float(p @ Gi @ p)
    if v1 < vmax * (1 - tol):
        out.append(f"level {_depth}: v1 = {v1:.12g} not maximal ({vmax:.12g})")
    if np.any(np.abs(r) > 0.5 + tol):
        out.append(f"level {_depth}: |r_j| > 1/2")
    if r[0] < -tol:
        out.append(f"level {_depth}: r_1 < 0")
    out.extend(domain_prime_violations(Y1, tol, _depth + 1))
    return out


# Candidate cosets (C, D).


def row_hnf(M) -> np.ndarray:
    """Row Hermite normal form of a full-row-rank integer matrix."""
    H = np.array(M, dtype=np.int64)
    rows, cols = H.shape
    r = 0
    for c in range(cols):
        if r == rows:
            break
        while True:
            nz = [i for i in range(r, rows) if H[i, c] != 0]
            if not nz:
                break
            piv = min(nz, key=lambda i: abs(H[i, c]))
            if piv != r:
                H[[r, piv]] = H[[piv, r]]
            done = True
            for i in range(r + 1, rows):
                if H[i, c]:
                    H[i] -= (H[i, c] // H[r, c]) * H[r]
                    if H[i, c]:
                        done = False
            if done:
                break
        if H[r, c] == 0:
            continue
        if H[r, c] < 0:
            H[r] = -H[r]
        for i in range(r):
            H[i] -= (H[i, c] // H[r, c]) * H[r]
        r += 1
    return H


@dataclass(frozen=True)
class CandidateSet:
    n: int
    L: int
    C: np.ndarray
    D: np.ndarray
    gammas: np.ndarray

    def __len__(self):
        return len(self.gammas)


def candidate_set(n: int, L: int = DEFAULT_WORD_LENGTH, entry_bound: int = DEFAULT_ENTRY_BOUND) -> CandidateSet:
    return _candidate_set(int(n), int(L), int(entry_bound))


@functools.lru_cache(maxsize=32)
def _candidate_set(n: int, L: int, entry_bound: int) -> CandidateSet:
    """Cosets ``Gamma_inf gamma`` reachable by words of length <= L.

    Words are grown breadth-first by right multiplication with the integral
    generators; cosets are identified by the row HNF of ``[C | D]``. Words
    whose entries exceed ``entry_bound`` are pruned. The identity coset is
    dropped since it always gives ``det D = 1``.
    """
    gens = int_generators(n)
    I = np.eye(2 * n, dtype=np.int64)
    seen = {row_hnf(I[n:]).tobytes()}
    raw = {I[n:].tobytes()}
    reps = []
    frontier = deque([(I, 0)])
    while frontier:
        g, depth = frontier.popleft()
        if depth == L:
            continue
        for s in gens:
            h = g @ s
            if np.max(np.abs(h)) > entry_bound:
                continue
            rk = h[n:].tobytes()
            if rk in raw:
                continue
            raw.add(rk)
            key = row_hnf(h[n:]).tobytes()
            if key in seen:
                continue
            seen.add(key)
            reps.append(h)
            frontier.append((h, depth + 1))
    # embedded SL2 pairs, normally already present
    for i in range(n):
        E = np.zeros((n, n), dtype=np.int64)
        E[i, i] = 1
        Id = np.eye(n, dtype=np.int64)
        h = np.block([[Id - E, -E], [E, Id - E]])
        key = row_hnf(h[n:]).tobytes()
        if key not in seen:
            seen.add(key)
            reps.append(h)
    G = np.array(reps, dtype=np.int64).reshape(-1, 2 * n, 2 * n)
    return CandidateSet(n, L, G[:, n:, :n].copy(), G[:, n:, n:].copy(), G)


def cd_moduli(cs: CandidateSet, Z) -> np.ndarray:
    """``|det(C Z + D)|`` for every candidate."""
    M = cs.C @ Z + cs.D
    if cs.n == 1:
        return np.abs(M[:, 0, 0])
    if cs.n == 2:
        return np.abs(M[:, 0, 0] * M[:, 1, 1] - M[:, 0, 1] * M[:, 1, 0])
    if cs.n == 3:
        a, b, c = M[:, 0, 0], M[:, 0, 1], M[:, 0, 2]
        d, e, f = M[:, 1, 0], M[:, 1, 1], M[:, 1, 2]
        g, h, i = M[:, 2, 0], M[:, 2, 1], M[:, 2, 2]
        return np.abs(a * (e * i - f * h) - b * (d * i - f * g) + c * (d * h - e * g))
    return np.abs(np.linalg.det(M))


# Siegel reduction.


@dataclass(frozen=True)
class ReductionResult:
    gamma0: np.ndarray
    reduced: IwasawaCoords
    detV: float
    iterations: int = 0
    moves: dict = field(default_factory=dict)
    trace: tuple = ()

    def to_json(self) -> dict:
        from .linalg import matrix_to_json

        A, B, C, D = blocks(self.gamma0)
        return {
            "gamma0": {"n": self.reduced.n, "A": A.tolist(), "B": B.tolist(), "C": C.tolist(), "D": D.tolist()},
            "X": matrix_to_json(self.reduced.X),
            "V": self.reduced.V.tolist(),
            "U": matrix_to_json(self.reduced.U),
            "detV": self.detV,
            "iterations": self.iterations,
        }


def levi_int(A) -> np.ndarray:
    A = np.asarray(A, dtype=np.int64)
    n = A.shape[0]
    Z = np.zeros((n, n), dtype=np.int64)
    return np.block([[A, Z], [Z, int_inverse(A).T]])


def translation_int(N) -> np.ndarray:
    N = np.asarray(N, dtype=np.int64)
    n = N.shape[0]
    I = np.eye(n, dtype=np.int64)
    return np.block([[I, N], [np.zeros((n, n), dtype=np.int64), I]])


def siegel_reduce(g, L: int = DEFAULT_WORD_LENGTH, max_iter: int = MAX_ITER, gamma_start=None,
                  entry_bound: int = DEFAULT_ENTRY_BOUND) -> ReductionResult:
    g = np.asarray(g, dtype=float)
    n = rank(g)
    if n > 4:
        raise DimensionMismatch("siegel_reduce supports n <= 4")
    cs = candidate_set(n, L, entry_bound)
    gamma0 = np.eye(2 * n, dtype=np.int64) if gamma_start is None else check_gamma(gamma_start)
    moves = {"gl": 0, "translate": 0, "invert": 0}
    last = None
    trace = []
    for it in range(1, max_iter + 1):
        c = iwasawa(gamma0 @ g)
        trace.append(c.detV)
        red = grenier_reduce(c.Y)
        if not np.array_equal(red.A, np.eye(n, dtype=np.int64)):
            gamma0 = int_matmul(levi_int(red.A), gamma0)
            moves["gl"] += 1
            c = iwasawa(gamma0 @ g)
            trace.append(c.detV)
        N = np.rint(c.X).astype(np.int64)
        if np.any(N):
            gamma0 = int_matmul(translation_int(-N), gamma0)
            moves["translate"] += 1
            c = iwasawa(gamma0 @ g)
            trace.append(c.detV)
        vals = cd_moduli(cs, c.Z)
        k = int(np.argmin(vals))
        last = c
        if vals[k] >= 1 - MOVE_TOL:
            return ReductionResult(gamma0, c, c.detV, it, moves, tuple(trace))
        gamma0 = int_matmul(cs.gammas[k], gamma0)
        moves["invert"] += 1
    raise IterationLimit(
        f"siegel_reduce did not stabilize in {max_iter} iterations",
        {"detV": None if last is None else last.detV, "moves": moves},
    )


def height(g, **kw) -> float:
    return siegel_reduce(g, **kw).detV


def in_domain(c: IwasawaCoords, tol: float = 1e-9, L: int = DEFAULT_WORD_LENGTH,
              entry_bound: int = DEFAULT_ENTRY_BOUND):
    """Membership test for the Siegel domain. Returns ``(ok, violations)``."""
    out = []
    n = c.n
    X = c.X
    for i in range(n):
        for j in range(i, n):
            if abs(X[i, j]) > 0.5 + tol:
                out.append(f"|x_{i + 1}{j + 1}| > 1/2")
    out.extend(domain_prime_violations(c.Y, tol))
    v = c.V
    if v[-1] < np.sqrt(3) / 2 - tol:
        out.append("v_n < sqrt(3)/2")
    for j in range(n - 1):
        if v[j] < 0.75 * v[j + 1] - tol:
            out.append(f"v_{j + 1} < 3/4 v_{j + 2}")
    if n <= 4:
        vals = cd_moduli(candidate_set(n, L, entry_bound), c.Z)
        if vals.size and float(np.min(vals)) < 1 - tol:
            out.append(f"|det(CZ + D)| = {float(np.min(vals)):.12g} < 1")
    return (not out), out
