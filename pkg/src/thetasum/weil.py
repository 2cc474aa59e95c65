"""Schrödinger and Weil operators on Gaussian packets.

A packet is ``f(x) = c e(½ x W x^T + x w^T)`` with ``e(z) = exp(2 pi i z)``
and ``Im W`` positive definite. The family is closed under ``W(h)`` and
``R(g)``; every operator below is a closed-form map on ``(W, w, c)``.

Upper block-triangular ``g`` act with their exact phase. Partial Fourier
transforms and the unitary part ``k(Q)`` involve complex Gaussian integrals
and products of several operators, so they are correct up to a unimodular
constant only and clear ``phase_exact``.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import ChartSingular, DegenerateSpectrum, DimensionMismatch, NotPositiveDefinite, NotUnitary, NumericalBreakdown
from .jacobi import HeisenbergElem, h_act
from .linalg import is_posdef, matrix_from_json, matrix_to_json, complex_from_json, complex_to_json
from .symplectic import SYMPLECTIC_TOL, blocks, iwasawa, rank

TWO_PI = 2.0 * np.pi
CLUSTER_TOL = 1e-8


def e(z):
    return np.exp(TWO_PI * 1j * z)


@dataclass(frozen=True)
class GaussianPacket:
    W: np.ndarray
    w: np.ndarray
    c: complex = 1.0
    phase_exact: bool = True

    def __post_init__(self):
        W = np.atleast_2d(np.asarray(self.W, dtype=complex))
        W = 0.5 * (W + W.T)
        w = np.atleast_1d(np.asarray(self.w, dtype=complex))
        if W.shape != (len(w), len(w)):
            raise DimensionMismatch("W and w have incompatible shapes")
        if not is_posdef(W.imag):
            raise NotPositiveDefinite("Im W is not positive definite")
        c = complex(self.c)
        if not abs(c) > 0 or not np.isfinite(c):
            raise NumericalBreakdown("packet amplitude is zero or not finite")
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "c", c)

    @property
    def n(self) -> int:
        return len(self.w)

    @classmethod
    def standard(cls, n: int) -> "GaussianPacket":
        """``exp(-pi x x^T)``."""
        return cls(1j * np.eye(n), np.zeros(n))

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "W": matrix_to_json(self.W),
            "w": complex_to_json(self.w),
            "c": complex_to_json(self.c),
            "phase_exact": self.phase_exact,
        }

    @classmethod
    def from_json(cls, obj) -> "GaussianPacket":
        W = matrix_from_json(obj["W"])
        w = complex_from_json(obj.get("w", [0.0] * W.shape[0]))
        c = complex_from_json(obj.get("c", 1.0))
        return cls(W, np.atleast_1d(w), c, bool(obj.get("phase_exact", True)))


def random_packet(rng: np.random.Generator, n: int, spread: float = 0.5) -> GaussianPacket:
    G = rng.normal(size=(n, n)) * spread
    P = G @ G.T + np.eye(n) * 0.5
    S = rng.normal(size=(n, n)) * spread
    Wr = 0.5 * (S + S.T)
    w = (rng.normal(size=n) + 0.5j * rng.normal(size=n)) * spread
    c = complex(rng.normal(), rng.normal())
    return GaussianPacket(Wr + 1j * P, w, c if abs(c) > 1e-3 else 1.0)


def packet_exponent(f: GaussianPacket, x) -> np.ndarray:
    """``½ x W x^T + x w^T`` for a point or a batch of points."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != f.n:
        raise DimensionMismatch("point dimension does not match packet")
    return 0.5 * np.einsum("...i,ij,...j->...", x, f.W, x) + x @ f.w


def packet_eval(f: GaussianPacket, x):
    return f.c * e(packet_exponent(f, x))


def l2_norm(f: GaussianPacket) -> float:
    """Closed-form L2 norm of the packet."""
    P = f.W.imag
    v = f.w.imag
    val = abs(f.c) ** 2 * np.linalg.det(2 * P) ** -0.5 * np.exp(TWO_PI * v @ np.linalg.solve(P, v))
    return float(np.sqrt(val))


def schrodinger_apply(h: HeisenbergElem, f: GaussianPacket) -> GaussianPacket:
    if h.n != f.n:
        raise DimensionMismatch("Heisenberg element and packet differ in rank")
    x, y = h.x, h.y
    w_new = f.w + x @ f.W + y
    c_new = f.c * e(-h.t + 0.5 * x @ y + 0.5 * x @ f.W @ x + x @ f.w)
    return GaussianPacket(f.W, w_new, c_new, f.phase_exact)


def apply_upper(A, B, f: GaussianPacket) -> GaussianPacket:
    """``[[A, B], [0, A^{-T}]]``: ``|det A|^{1/2} e(½ x A B^T x^T) f(x A)``."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    ABt = A @ B.T
    W_new = A @ f.W @ A.T + 0.5 * (ABt + ABt.T)
    w_new = f.w @ A.T
    c_new = f.c * np.sqrt(abs(np.linalg.det(A)))
    return GaussianPacket(W_new, w_new, c_new, f.phase_exact)


def principal_det_sqrt_inv(M) -> complex:
    """``det(M)^{-1/2}`` for ``M`` with positive definite real part.

    Eigenvalues of such ``M`` lie in the open right half plane, where the
    principal square root is continuous; this fixes the branch.
    """
    lam = np.linalg.eigvals(M)
    if np.any(lam.real <= 1e-14 * np.max(np.abs(lam))):
        raise NumericalBreakdown("square-root argument at or past the branch cut")
    return complex(np.prod(1.0 / np.sqrt(lam)))


def apply_partial_fourier(S, f: GaussianPacket) -> GaussianPacket:
    """``∫ f(x^(1), y^(2)) e(-x^(2) y^(2)^T) dy^(2)`` over the coordinates in ``S``."""
    n = f.n
    S = sorted(set(int(i) for i in S))
    if not S:
        return f
    T = [i for i in range(n) if i not in S]
    W, w = f.W, f.w
    Wss = W[np.ix_(S, S)]
    Wts = W[np.ix_(T, S)]
    Wtt = W[np.ix_(T, T)]
    Winv = np.linalg.inv(Wss)
    amp = principal_det_sqrt_inv(-1j * Wss)
    W_new = np.zeros_like(W)
    W_new[np.ix_(S, S)] = -Winv
    if T:
        W_new[np.ix_(T, T)] = Wtt - Wts @ Winv @ Wts.T
        W_new[np.ix_(T, S)] = Wts @ Winv
        W_new[np.ix_(S, T)] = (Wts @ Winv).T
    w_new = np.zeros_like(w)
    ws = w[S]
    w_new[S] = ws @ Winv
    if T:
        w_new[T] = w[T] - ws @ Winv @ Wts.T
    c_new = f.c * amp * e(-0.5 * ws @ Winv @ ws)
    return GaussianPacket(W_new, w_new, c_new, False)


def partial_fourier_matrix(n: int, S) -> np.ndarray:
    """The element acting as ``J0`` on the coordinates ``S`` and trivially elsewhere."""
    g = np.eye(2 * n)
    for i in S:
        g[i, i] = g[n + i, n + i] = 0.0
        g[i, n + i] = -1.0
        g[n + i, i] = 1.0
    return g


def _unit_eigh(S):
    """Real orthogonal ``O`` with ``O^T S O`` diagonal for symmetric unitary ``S``."""
    n = S.shape[0]
    X, Y = S.real, S.imag
    X = 0.5 * (X + X.T)
    Y = 0.5 * (Y + Y.T)
    theta = np.angle(np.linalg.eigvals(S))
    # pick a rotation of the phase circle that separates distinct eigenphases
    best, best_gap = 0.0, -1.0
    for beta in np.linspace(0, np.pi, 13)[:-1] + 0.1234:
        vals = np.sort(np.cos(theta - beta))
        d = np.diff(vals)
        d = d[d > CLUSTER_TOL]
        gap = float(np.min(d)) if d.size else np.inf
        if gap > best_gap:
            best, best_gap = beta, gap
    cb, sb = np.cos(best), np.sin(best)
    H1 = cb * X + sb * Y
    H2 = -sb * X + cb * Y
    lam, O = np.linalg.eigh(H1)
    out = np.zeros((n, n))
    i = 0
    while i < n:
        j = i + 1
        while j < n and lam[j] - lam[j - 1] <= CLUSTER_TOL:
            j += 1
        B = O[:, i:j]
        if j - i > 1:
            mu, Vb = np.linalg.eigh(B.T @ H2 @ B)
            B = B @ Vb
        out[:, i:j] = B
        i = j
    return out


def unitary_split(Q0):
    """``Q0 = Q1 Qd Q2`` with ``Q1``, ``Q2`` real orthogonal and ``Qd`` diagonal unitary."""
    Q0 = np.asarray(Q0, dtype=complex)
    n = Q0.shape[0]
    if float(np.max(np.abs(Q0 @ Q0.conj().T - np.eye(n)))) > SYMPLECTIC_TOL:
        raise NotUnitary("Q0 is not unitary within 1e-9")
    S = Q0 @ Q0.T
    O = _unit_eigh(S)
    # canonical column order and signs: closest signed permutation to I
    _, cols = linear_sum_assignment(-np.abs(O))
    O = O[:, cols]
    O = O * np.where(np.diag(O) < 0, -1.0, 1.0)[None, :]
    lam = np.diag(O.T @ S @ O)
    Qd = np.diag(np.sqrt(lam / np.abs(lam)))
    Q2c = np.diag(1.0 / np.diag(Qd)) @ O.T @ Q0
    if float(np.max(np.abs(Q2c.imag))) > 1e-6:
        raise DegenerateSpectrum("joint diagonalization failed to separate eigenphases")
    return O, Qd, Q2c.real


def apply_diag_unitary(phases, f: GaussianPacket) -> GaussianPacket:
    """``R(k(diag(e^{i phi})))`` via partial Fourier and the Bruhat factorization."""
    n = f.n
    phi = np.angle(np.asarray(phases, dtype=complex))
    s = np.sin(phi)
    active = [i for i in range(n) if abs(np.exp(1j * phi[i]) - 1) > 1e-15]
    if not active:
        return f
    # coordinates with small |sin| get a quarter turn first: e^{i phi} = i e^{i (phi - pi/2)}
    turn = [i for i in active if abs(s[i]) < np.sqrt(0.5)]
    f = apply_partial_fourier(turn, f)
    phi2 = phi.copy()
    phi2[turn] -= np.pi / 2
    C = np.ones(n)
    D = np.zeros(n)
    C[active] = np.sin(phi2[active])
    D[active] = np.cos(phi2[active])
    # k(Q') = n(C^{-1} D) J [[C, D], [0, C^{-1}]] on the active coordinates
    f = apply_upper(np.diag(C), np.diag(D), f)
    f = apply_partial_fourier(active, f)
    Bn = np.zeros(n)
    Bn[active] = D[active] / C[active]
    f = apply_upper(np.eye(n), np.diag(Bn), f)
    return replace(f, phase_exact=False)


def apply_unitary(Q, f: GaussianPacket) -> GaussianPacket:
    """``R(k(Q)) f`` up to a unimodular constant."""
    Q = np.asarray(Q, dtype=complex)
    if float(np.max(np.abs(Q.imag))) == 0.0:
        Qr = Q.real
        return apply_upper(Qr, np.zeros_like(Qr), f)
    Q1, Qd, Q2 = unitary_split(Q)
    Z = np.zeros((f.n, f.n))
    f = apply_upper(Q2, Z, f)
    f = apply_diag_unitary(np.diag(Qd), f)
    f = apply_upper(Q1, Z, f)
    return replace(f, phase_exact=False)


def is_partial_fourier(g, tol: float = 1e-14):
    """Coordinates ``S`` if ``g`` is the partial-Fourier element on ``S``, else None."""
    n = rank(g)
    S = [i for i in range(n) if abs(g[i, i]) <= tol]
    return S if np.max(np.abs(np.asarray(g) - partial_fourier_matrix(n, S))) <= tol else None


def weil_apply(g, f: GaussianPacket) -> GaussianPacket:
    g = np.asarray(g, dtype=float)
    if rank(g) != f.n:
        raise DimensionMismatch("group element and packet differ in rank")
    A, B, C, D = blocks(g)
    if not np.any(C):
        return apply_upper(A, B, f)
    S = is_partial_fourier(g)
    if S is not None:
        return apply_partial_fourier(S, f)
    c = iwasawa(g)
    R = c.sqrtY
    f = apply_unitary(c.Q, f)
    f = apply_upper(R, c.X @ np.linalg.inv(R).T, f)
    return replace(f, phase_exact=False)


def intertwining_gap(g, h: HeisenbergElem, f: GaussianPacket, xs) -> float:
    """Max of ``| |W(h) R(g) f| - |R(g) W(h^g) f| |`` over the points ``xs``."""
    lhs = packet_eval(schrodinger_apply(h, weil_apply(g, f)), xs)
    rhs = packet_eval(weil_apply(g, schrodinger_apply(h_act(g, h), f)), xs)
    return float(np.max(np.abs(np.abs(lhs) - np.abs(rhs))))


def cocycle_modulus_check(g1, g2, f: GaussianPacket, xs=None, seed: int = 0) -> float:
    if xs is None:
        xs = np.random.default_rng(seed).normal(size=(20, f.n))
    a = packet_eval(weil_apply(np.asarray(g1) @ np.asarray(g2), f), xs)
    b = packet_eval(weil_apply(g1, weil_apply(g2, f)), xs)
    return float(np.max(np.abs(np.abs(a) - np.abs(b))))


# Quadrature oracle (tests only).


def _gl_nodes(lo, hi, panels, order=20):
    t, wt = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(lo, hi, panels + 1)
    a, b = edges[:-1, None], edges[1:, None]
    nodes = (0.5 * (b - a) * t[None, :] + 0.5 * (a + b)).ravel()
    weights = (0.5 * (b - a) * wt[None, :]).ravel()
    return nodes, weights


def _tensor_integral(func, centers, radii, tol):
    """Integral of ``func(points)`` over a box, refining panels until stable."""
    d = len(centers)
    prev = None
    panels = 8
    while True:
        grids = [_gl_nodes(centers[k] - radii[k], centers[k] + radii[k], panels) for k in range(d)]
        mesh = np.meshgrid(*[gg[0] for gg in grids], indexing="ij")
        wmesh = np.meshgrid(*[gg[1] for gg in grids], indexing="ij")
        pts = np.stack([m.ravel() for m in mesh], axis=-1)
        wts = np.prod(np.stack([w.ravel() for w in wmesh], axis=-1), axis=-1)
        val = np.sum(func(pts) * wts)
        if prev is not None and abs(val - prev) <= tol * max(1.0, abs(val)):
            return val
        if panels >= 256:
            return val
        prev = val
        panels *= 2


def _envelope_box(f: GaussianPacket, coords, fixed=None):
    """Center and radius of the region outside which ``|f|`` is negligible."""
    P = f.W.imag
    b = f.w.imag
    center = -np.linalg.solve(P, b)
    radius = np.sqrt(40.0 / np.pi * np.diag(np.linalg.inv(P)))
    return center[coords], radius[coords] + 1.0


def weil_quadrature_oracle(g, f: GaussianPacket, x, tol: float = 1e-9) -> complex:
    """Independent evaluation of ``R(g) f (x)`` by numerical integration."""
    g = np.asarray(g, dtype=float)
    n = f.n
    if n > 2:
        raise DimensionMismatch("quadrature oracle supports n <= 2")
    x = np.asarray(x, dtype=float)
    A, B, C, D = blocks(g)
    if not np.any(C):
        return complex(np.sqrt(abs(np.linalg.det(A))) * e(0.5 * x @ A @ B.T @ x) * packet_eval(f, x @ A))
    S = is_partial_fourier(g)
    if S is not None and len(S) < n:
        T = [i for i in range(n) if i not in S]
        ctr, rad = _envelope_box(f, S)

        def integrand(ys):
            pts = np.empty((len(ys), n))
            pts[:, T] = x[T]
            pts[:, S] = ys
            return packet_eval(f, pts) * e(-(ys @ x[S]))

        return complex(_tensor_integral(integrand, ctr, rad, tol))
    if abs(np.linalg.det(C)) <= 1e-10:
        raise ChartSingular("oracle needs C invertible or a partial-Fourier element")
    Ci = np.linalg.inv(C)
    CiD = Ci @ D
    ctr, rad = _envelope_box(f, list(range(n)))

    def integrand(ys):
        return packet_eval(f, ys) * e(0.5 * np.einsum("ki,ij,kj->k", ys, CiD, ys) - ys @ (Ci @ x))

    pre = abs(np.linalg.det(C)) ** -0.5 * e(0.5 * x @ A @ Ci @ x)
    return complex(pre * _tensor_integral(integrand, ctr, rad, tol))


def packet_peak(f: GaussianPacket) -> float:
    """``max_x |f(x)|``."""
    P = f.W.imag
    v = f.w.imag
    return float(abs(f.c) * np.exp(np.pi * v @ np.linalg.solve(P, v)))
