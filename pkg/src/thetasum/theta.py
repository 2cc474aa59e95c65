"""Theta sums and the automorphic theta function.

Conventions: ``theta_f(M, X, x, y) = sum_m f((m + x) / M) e(½ m X m^T + m y^T)``
and, for ``g = n(X) a(Y^{1/2}) k(Q)`` and ``h = (x, y, t)``,

    Theta_f(h, g) = (det Y)^{1/4} e(-t + ½ x y^T)
        sum_m f_Q((m + x) Y^{1/2}) e(½ (m + x) X (m + x)^T + m y^T)

with ``f_Q = R(k(Q)) f``. The two are related by
``theta_f(M, X, x, y) = M^{n/2} Theta_f(h, g_{M,X})`` where
``h = (x, y - x X, ½ x y^T)``; see :func:`jacobi_point`.

Lattice sums over Gaussian envelopes keep every ``m`` whose envelope is at
least ``tail_tol`` times the peak.
"""

from __future__ import annotations

import contextlib
import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, GuardViolation, NotInDomain, TooLarge
from .jacobi import GammaTildeElem, HeisenbergElem, JacobiElem, gamma_tilde_apply
from .reduction import height, in_domain, siegel_reduce
from .symplectic import g_MX, iwasawa, langlands_coords, rank, unipotent
from .weil import GaussianPacket, apply_unitary, packet_exponent

TAIL_TOL = 1e-14
BOX_GUARD = 1e8
LATTICE_GUARD = 5e7
CHUNK = 1 << 20
TWO_PI = 2.0 * np.pi

_mutations = set()


@contextlib.contextmanager
def mutation(name: str):
    """Temporarily inject a known defect (used to check that the verifier bites)."""
    if name not in {"theta-phase-sign"}:
        raise ValueError(f"unknown mutation {name!r}")
    _mutations.add(name)
    try:
        yield
    finally:
        _mutations.discard(name)


@dataclass(frozen=True)
class ThetaQuery:
    M: float
    X: np.ndarray
    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.X, dtype=float))
        x = np.atleast_1d(np.asarray(self.x, dtype=float))
        y = np.atleast_1d(np.asarray(self.y, dtype=float))
        if not self.M >= 1:
            raise GuardViolation("M must be at least 1")
        if X.shape != (len(x), len(x)) or y.shape != x.shape:
            raise DimensionMismatch("query shapes disagree")
        object.__setattr__(self, "X", 0.5 * (X + X.T))
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "M", float(self.M))

    @property
    def n(self) -> int:
        return len(self.x)


@dataclass(frozen=True)
class BoxSpec:
    b: np.ndarray

    def __post_init__(self):
        b = np.atleast_1d(np.asarray(self.b, dtype=float))
        if np.any(b <= 0):
            raise GuardViolation("box sides must be positive")
        object.__setattr__(self, "b", b)


def jacobi_point(q: ThetaQuery):
    """``(h, g)`` with ``theta_f(M, X, x, y) = M^{n/2} Theta_f(h, g)``."""
    h = HeisenbergElem(q.x, q.y - q.x @ q.X, 0.5 * q.x @ q.y)
    return h, g_MX(q.M, q.X)


# Lattice enumeration.


def ellipsoid_points(center, P, rad2: float, guard: float = LATTICE_GUARD):
    """Yield chunks of integer points ``m`` with ``(m - center) P (m - center)^T <= rad2``."""
    center = np.asarray(center, dtype=float)
    n = len(center)
    Pinv = np.linalg.inv(P)
    half = np.sqrt(rad2 * np.diag(Pinv))
    lo = np.ceil(center - half).astype(np.int64)
    hi = np.floor(center + half).astype(np.int64)
    sizes = np.maximum(hi - lo + 1, 0)
    total = float(np.prod(sizes.astype(float)))
    if total > guard:
        raise TooLarge(f"lattice box has {total:.3g} points (guard {guard:.3g})")
    if total == 0:
        return
    if n == 1:
        m = np.arange(lo[0], hi[0] + 1)[:, None]
        d = m - center
        yield m[(d @ P * d).sum(1) <= rad2]
        return
    inner = int(np.prod(sizes[1:]))
    rows = max(1, CHUNK // max(inner, 1))
    grids = np.meshgrid(*[np.arange(lo[i], hi[i] + 1) for i in range(1, n)], indexing="ij")
    tail = np.stack([g_.ravel() for g_ in grids], axis=-1)
    for start in range(lo[0], hi[0] + 1, rows):
        first = np.arange(start, min(start + rows, hi[0] + 1))
        m = np.empty((len(first) * inner, n), dtype=np.int64)
        m[:, 0] = np.repeat(first, inner)
        m[:, 1:] = np.tile(tail, (len(first), 1))
        d = m - center
        keep = np.einsum("ki,ij,kj->k", d, P, d) <= rad2
        if np.any(keep):
            yield m[keep]


def _sum_exp(log_terms):
    """Stable ``sum(exp(z))`` returned as ``(mantissa, log_scale)``."""
    if log_terms.size == 0:
        return 0j, 0.0
    s = float(np.max(log_terms.real))
    return complex(np.sum(np.exp(log_terms - s))), s


def _frac(a):
    return a - np.floor(a)


def _log_terms(bracket, extra_phase=0.0):
    """``2 pi i * bracket`` with the real part of ``bracket`` reduced mod 1."""
    re = _frac(bracket.real + extra_phase)
    return -TWO_PI * bracket.imag + 1j * TWO_PI * re


# Automorphic theta function.


@dataclass(frozen=True)
class ThetaData:
    """Closed form of the lattice sum: ``pref * sum_m e(½ u Om u^T + u beta^T + m y^T)``, ``u = m + x``."""

    Omega: np.ndarray
    beta: np.ndarray
    x: np.ndarray
    y: np.ndarray
    pref: complex
    detY: float


def theta_data(h: HeisenbergElem, g, f: GaussianPacket) -> ThetaData:
    g = np.asarray(g, dtype=float)
    if rank(g) != f.n or h.n != f.n:
        raise DimensionMismatch("ranks differ")
    c = iwasawa(g)
    R = c.sqrtY
    fQ = apply_unitary(c.Q, f)
    Omega = c.X + R @ fQ.W @ R.T
    Omega = 0.5 * (Omega + Omega.T)
    beta = fQ.w @ R.T
    detY = c.detV
    sign = -1.0 if "theta-phase-sign" in _mutations else 1.0
    pref = detY ** 0.25 * np.exp(TWO_PI * 1j * (-h.t + 0.5 * h.x @ h.y)) * fQ.c
    return ThetaData(Omega, beta, h.x, sign * h.y, complex(pref), detY)


def _nearest_offset(center, P, rad2: float) -> float:
    """Envelope exponent of the lattice point closest to ``center`` (searched beyond ``rad2``)."""
    r = rad2
    while True:
        best = np.inf
        for m in ellipsoid_points(center, P, r):
            d = m - center
            best = min(best, float(np.min(np.einsum("ki,ij,kj->k", d, P, d))))
        if np.isfinite(best):
            return best
        r *= 4.0


def _theta_sum(td: ThetaData, tail_tol: float, skip_prefix: int = 0, log_only: bool = False):
    """Returns ``(value or log|value|, terms)``; ``skip_prefix = l`` keeps only m with m[:l] != 0."""
    P = td.Omega.imag
    bim = td.beta.imag
    ustar = -np.linalg.solve(P, bim)
    rad2 = math.log(1.0 / tail_tol) / np.pi
    parts = []
    terms = 0
    for attempt in range(2):
        for m in ellipsoid_points(ustar - td.x, P, rad2):
            if skip_prefix:
                m = m[np.any(m[:, :skip_prefix] != 0, axis=1)]
                if not len(m):
                    continue
            u = m + td.x
            br = 0.5 * np.einsum("ki,ij,kj->k", u, td.Omega, u) + u @ td.beta
            parts.append(_log_terms(br, m @ td.y))
            terms += len(m)
        if terms or skip_prefix:
            break
        # every term is below tail_tol times the Gaussian peak: truncate relative to the largest term
        rad2 += _nearest_offset(ustar - td.x, P, rad2)
    z = np.concatenate(parts) if parts else np.zeros(0, dtype=complex)
    mant, scale = _sum_exp(z)
    if log_only:
        if mant == 0:
            return -np.inf, terms
        return float(np.log(abs(mant)) + scale + np.log(abs(td.pref))), terms
    return td.pref * mant * np.exp(scale), terms


def theta_auto(h: HeisenbergElem, g, f: GaussianPacket, tail_tol: float = TAIL_TOL) -> complex:
    return complex(_theta_sum(theta_data(h, g, f), tail_tol)[0])


def theta_auto_terms(h, g, f, tail_tol: float = TAIL_TOL):
    """``(value, number of lattice terms used)``."""
    v, k = _theta_sum(theta_data(h, g, f), tail_tol)
    return complex(v), k


# Direct sums.


def theta_direct_schwartz_terms(q: ThetaQuery, f: GaussianPacket, tail_tol: float = TAIL_TOL):
    if f.n != q.n:
        raise DimensionMismatch("packet and query differ in rank")
    P = f.W.imag
    vstar = -np.linalg.solve(P, f.w.imag)
    rad2 = math.log(1.0 / tail_tol) / np.pi
    Pm = P / q.M ** 2
    parts = []
    terms = 0
    sign = -1.0 if "theta-phase-sign" in _mutations else 1.0
    for m in ellipsoid_points(q.M * vstar - q.x, Pm, rad2):
        br = packet_exponent(f, (m + q.x) / q.M)
        ph = 0.5 * np.einsum("ki,ij,kj->k", m.astype(float), q.X, m.astype(float)) + sign * (m @ q.y)
        parts.append(_log_terms(br, ph))
        terms += len(m)
    z = np.concatenate(parts) if parts else np.zeros(0, dtype=complex)
    mant, scale = _sum_exp(z)
    return complex(f.c * mant * np.exp(scale)), terms


def theta_direct_schwartz(q: ThetaQuery, f: GaussianPacket, tail_tol: float = TAIL_TOL) -> complex:
    return theta_direct_schwartz_terms(q, f, tail_tol)[0]


def box_ranges(q: ThetaQuery, box: BoxSpec):
    """Integer ranges ``m_i`` with ``0 < m_i + x_i < M b_i`` (open box)."""
    lo = np.floor(-q.x).astype(np.int64) + 1
    hi = np.ceil(q.M * box.b - q.x).astype(np.int64) - 1
    return lo, hi


def theta_direct_box(q: ThetaQuery, box: BoxSpec, guard: float = BOX_GUARD) -> complex:
    n = q.n
    if len(box.b) != n:
        raise DimensionMismatch("box and query differ in rank")
    if q.M ** n * float(np.prod(box.b)) > guard:
        raise TooLarge("box holds more lattice points than the guard allows")
    lo, hi = box_ranges(q, box)
    if np.any(hi < lo):
        return 0j
    X, y = q.X, q.y
    if n == 1:
        m = np.arange(lo[0], hi[0] + 1, dtype=float)
        return complex(np.sum(np.exp(1j * TWO_PI * _frac(0.5 * X[0, 0] * m * m + m * y[0]))))
    if n == 2:
        return _box_sum_2d(X, y, lo, hi)
    ranges = [np.arange(lo[i], hi[i] + 1) for i in range(n)]
    total = 0j
    for head in ranges[0]:
        grid = np.meshgrid(*ranges[1:], indexing="ij")
        m = np.stack([np.full(grid[0].size, head)] + [g_.ravel() for g_ in grid], axis=-1).astype(float)
        ph = 0.5 * np.einsum("ki,ij,kj->k", m, X, m) + m @ y
        total += np.sum(np.exp(1j * TWO_PI * _frac(ph)))
    return complex(total)


def _box_sum_2d(X, y, lo, hi) -> complex:
    """Rectangle sum via per-row geometric factors and Horner's rule in the longer axis."""
    if hi[0] - lo[0] > hi[1] - lo[1]:
        # put the longer axis last so the Horner loop runs over the shorter one
        X = X[::-1, ::-1]
        y = y[::-1]
        lo, hi = lo[::-1], hi[::-1]
    m1 = np.arange(lo[0], hi[0] + 1, dtype=float)
    m2 = np.arange(lo[1], hi[1] + 1, dtype=float)
    a = np.exp(1j * TWO_PI * _frac(0.5 * X[0, 0] * m1 * m1 + m1 * y[0]))
    b = np.exp(1j * TWO_PI * _frac(0.5 * X[1, 1] * m2 * m2 + m2 * y[1]))
    # row sums: sum_k b[k] e(X12 m1 m2[k]) = e(X12 m1 m2[0]) * sum_k b[k] r^k
    r = np.exp(1j * TWO_PI * _frac(X[0, 1] * m1))
    base = np.exp(1j * TWO_PI * _frac(X[0, 1] * m1 * m2[0]))
    acc = np.full(len(m1), b[-1])
    for k in range(len(m2) - 2, -1, -1):
        acc = acc * r + b[k]
    return complex(np.sum(a * base * acc))


def theta_direct_box_reference(q: ThetaQuery, box: BoxSpec) -> complex:
    """Plain nested loops; a slow second implementation used as an oracle."""
    lo, hi = box_ranges(q, box)
    total = 0j
    for m in itertools.product(*[range(int(lo[i]), int(hi[i]) + 1) for i in range(q.n)]):
        mv = np.array(m, dtype=float)
        total += np.exp(2j * np.pi * (0.5 * mv @ q.X @ mv + mv @ q.y))
    return complex(total)


# Fast modulus through reduction.


@dataclass(frozen=True)
class FastTheta:
    modulus: float
    terms: int
    detV: float
    h: HeisenbergElem
    g: np.ndarray


def fold_heisenberg(j: JacobiElem) -> JacobiElem:
    """Shift ``x``, ``y`` into ``[-½, ½]`` by an integral Heisenberg element."""
    n = j.h.n
    m = -np.rint(j.h.x)
    k = -np.rint(j.h.y)
    if not (np.any(m) or np.any(k)):
        return j
    return gamma_tilde_apply(GammaTildeElem(m, k, 0.0, np.eye(2 * n, dtype=np.int64)), j)


def theta_fast(h: HeisenbergElem, g, f: GaussianPacket, tail_tol: float = TAIL_TOL, **reduce_kw) -> FastTheta:
    red = siegel_reduce(g, **reduce_kw)
    n = f.n
    e0 = GammaTildeElem(np.zeros(n), np.zeros(n), 0.0, red.gamma0)
    j = fold_heisenberg(gamma_tilde_apply(e0, JacobiElem(h, np.asarray(g, dtype=float))))
    val, terms = _theta_sum(theta_data(j.h, j.g, f), tail_tol)
    return FastTheta(float(abs(val)), terms, red.detV, j.h, j.g)


def theta_fast_modulus(h: HeisenbergElem, g, f: GaussianPacket, tail_tol: float = TAIL_TOL) -> float:
    return theta_fast(h, g, f, tail_tol).modulus


# Dyadic height bound.


def dyadic_indices(M: float, b):
    """All ``j >= 0`` with ``2^{j_i} <= M b_i``."""
    b = np.atleast_1d(np.asarray(b, dtype=float))
    tops = [int(math.floor(math.log2(M * bi) + 1e-12)) if M * bi >= 1 else -1 for bi in b]
    if min(tops) < 0:
        return []
    return list(itertools.product(*[range(t + 1) for t in tops]))


def g_jS(j, S, n: int) -> np.ndarray:
    Aj = np.diag([2.0 ** ji for ji in j])
    E = np.diag([-1.0 if i in S else 1.0 for i in range(n)])
    Z = np.zeros((n, n))
    return np.block([[Aj @ E, Z], [Z, np.linalg.inv(Aj) @ E]])


def g_MBX(M: float, b, X) -> np.ndarray:
    b = np.atleast_1d(np.asarray(b, dtype=float))
    n = len(b)
    MB = M * b
    return unipotent(X) @ np.diag(np.r_[1.0 / MB, MB])


def dyadic_height_bound(q: ThetaQuery, box: BoxSpec, psi_C: float = 1.0, cache=None, all_subsets: bool = False,
                        **reduce_kw) -> float:
    """Finite dyadic sum ``psi_C M^{n/2} sum_S sum_j 2^{-|j|/2} D(g_{MB,X} g_{j,S})^{1/4}``.

    ``g_{j,S}`` differs from ``g_{j,empty}`` by the orthogonal factor
    ``diag(E_S, E_S)``, which leaves the height unchanged. By default the
    height is computed once per ``j`` and counted ``2^n`` times; pass
    ``all_subsets=True`` to reduce every pair separately. ``cache`` (a dict)
    shares heights between calls; they depend on ``M b_i / 2^{j_i}`` and ``X``.
    """
    n = q.n
    b = box.b
    if n > 3:
        raise DimensionMismatch("dyadic bound supports n <= 3")
    if q.M * float(np.max(b)) > 2 ** 14:
        raise TooLarge("dyadic range exceeds 2^14")
    base = g_MBX(q.M, b, q.X)
    Xkey = q.X.tobytes()
    subsets = [tuple(s) for k in range(n + 1) for s in itertools.combinations(range(n), k)]
    total = 0.0
    last = None
    for j in dyadic_indices(q.M, b):
        weight = 2.0 ** (-0.5 * sum(j))
        if all_subsets:
            acc = 0.0
            for S in subsets:
                r = siegel_reduce(base @ g_jS(j, S, n), gamma_start=last, **reduce_kw)
                last = r.gamma0
                acc += r.detV ** 0.25
            total += weight * acc
            continue
        key = (Xkey, tuple(q.M * b[i] / 2.0 ** j[i] for i in range(n)))
        D = None if cache is None else cache.get(key)
        if D is None:
            r = siegel_reduce(base @ g_jS(j, (), n), gamma_start=last, **reduce_kw)
            last = r.gamma0
            D = r.detV
            if cache is not None:
                cache[key] = D
        total += weight * len(subsets) * D ** 0.25
    return float(psi_C * q.M ** (n / 2) * total)


# Cusp asymptotics.


@dataclass(frozen=True)
class CuspMain:
    main: complex
    errorbound_shape: float
    xl: np.ndarray
    yl: np.ndarray


def cusp_vectors(h: HeisenbergElem, g, l: int):
    """``(x_l, y_l)`` from ``(x, y)`` and the nilpotent Langlands factors."""
    L = langlands_coords(g, l)
    N1, N2, _, _ = L.factors()
    v = np.r_[h.x, h.y] @ N1 @ N2
    n = h.n
    return L, v[:n], v[n:]


def cusp_main_term(h: HeisenbergElem, g, f: GaussianPacket, l: int, A: float = 4.0, tail_tol: float = TAIL_TOL,
                   check: bool = True, tol: float = 1e-9) -> CuspMain:
    n = f.n
    if check:
        ok, viol = in_domain(iwasawa(g), tol)
        if not ok:
            raise NotInDomain("; ".join(viol))
        if np.any(np.abs(h.x) > 0.5 + tol) or np.any(np.abs(h.y) > 0.5 + tol):
            raise NotInDomain("entries of x, y must lie in [-1/2, 1/2]")
    L, xl, yl = cusp_vectors(h, g, l)
    fQ = apply_unitary(L.Q, f)
    k = n - l
    V = L.V
    pref = np.prod(V) ** 0.25 * (np.linalg.det(L.Y) ** 0.25 if k else 1.0)
    pref = pref * np.exp(TWO_PI * 1j * (-h.t + 0.5 * xl @ yl)) * fQ.c
    first = xl[:l] * np.sqrt(V)
    if k == 0:
        val = pref * np.exp(TWO_PI * 1j * packet_exponent(fQ, first))
    else:
        from .linalg import sqrt_upper

        R = sqrt_upper(L.Y)
        W = fQ.W
        W11, W12, W22 = W[:l, :l], W[:l, l:], W[l:, l:]
        # exponent in u = m2 + x_l^(2):  ½ u (X_l + R W22 R^T) u^T + u (R W12^T first^T + R w2^T) + const
        Om = L.X + R @ W22 @ R.T
        be = first @ W12 @ R.T + fQ.w[l:] @ R.T
        const = 0.5 * first @ W11 @ first + first @ fQ.w[:l]
        td = ThetaData(0.5 * (Om + Om.T), be, xl[l:], yl[l:], complex(pref * np.exp(TWO_PI * 1j * const)), 1.0)
        val, _ = _theta_sum(td, tail_tol)
    c = iwasawa(g)
    shape = np.prod(V) ** 0.25 * (V[l - 1] + h.x @ np.diag(c.V) @ h.x) ** (-A)
    return CuspMain(complex(val), float(shape), xl, yl)


def _prefix_nonzero_points(td: ThetaData, l: int, rad2: float):
    """Lattice points with ``m[:l] != 0`` within ``rad2`` of the best such slice.

    For fixed ``m^(1)`` the envelope exponent is minimised over real ``m^(2)``
    by a Schur complement; slices are ranked by that minimum and the
    conditional ellipsoids in ``m^(2)`` are enumerated around it.
    """
    P = td.Omega.imag
    n = P.shape[0]
    c = -np.linalg.solve(P, td.beta.imag) - td.x
    c1, c2 = c[:l], c[l:]
    P11, P12, P22 = P[:l, :l], P[:l, l:], P[l:, l:]
    K = np.linalg.solve(P22, P12.T).T if n > l else np.zeros((l, 0))
    S = P11 - K @ P12.T
    S = 0.5 * (S + S.T)

    def q1(m1):
        d = m1 - c1
        return np.einsum("ki,ij,kj->k", d, S, d)

    unit = np.vstack([np.eye(l, dtype=np.int64), -np.eye(l, dtype=np.int64)])
    r0 = float(np.min(q1(unit)))
    best = np.inf
    for m1 in ellipsoid_points(c1, S, r0 * (1 + 1e-9) + 1e-300):
        m1 = m1[np.any(m1 != 0, axis=1)]
        if len(m1):
            best = min(best, float(np.min(q1(m1))))
    out = []
    for m1 in ellipsoid_points(c1, S, best + rad2):
        m1 = m1[np.any(m1 != 0, axis=1)]
        for row, val in zip(m1, q1(m1)):
            left = best + rad2 - val
            if left < 0:
                continue
            if n == l:
                out.append(row[None, :])
                continue
            centre = c2 - (row - c1) @ K
            for m2 in ellipsoid_points(centre, P22, left):
                out.append(np.hstack([np.broadcast_to(row, (len(m2), l)), m2]))
    return np.vstack(out) if out else np.zeros((0, n), dtype=np.int64)


def cusp_remainder_log(h: HeisenbergElem, g, f: GaussianPacket, l: int, tail_tol: float = TAIL_TOL) -> float:
    """``log |Theta - main|`` computed as the sum over ``m`` with ``m^(1) != 0``.

    The main term is exactly the ``m^(1) = 0`` part of the lattice sum, so
    the remainder is summed directly instead of differenced; it stays
    meaningful far below machine precision relative to Theta.
    """
    td = theta_data(h, g, f)
    m = _prefix_nonzero_points(td, l, math.log(1.0 / tail_tol) / np.pi)
    if not len(m):
        return -np.inf
    u = m + td.x
    br = 0.5 * np.einsum("ki,ij,kj->k", u, td.Omega, u) + u @ td.beta
    mant, scale = _sum_exp(_log_terms(br, m @ td.y))
    if mant == 0:
        return -np.inf
    return float(np.log(abs(mant)) + scale + np.log(abs(td.pref)))


def heights_along(g, M_values, **kw):
    return [height(g @ np.diag(np.r_[np.full(rank(g), 1.0 / M), np.full(rank(g), M)]), **kw) for M in M_values]
