"""Haar-density sampling of a superset of the Siegel domain.

Samples are drawn in coordinates where Haar measure is a product:

* ``X`` uniform with ``|x_ij| <= 1/2``;
* ``U`` through the recursive coordinates ``r`` of the GL domain
  (``Y = [[1, r], [0, I]] diag(v1, Y1) [[1, 0], [r^T, I]]``), uniform with
  ``0 <= r_1 <= 1/2`` and ``|r_j| <= 1/2``; the change from ``r`` to the
  entries of ``U`` has unit Jacobian;
* ``V`` through ``s_j = u_j - u_{j+1}`` (``j < n``) and ``u_n``, with
  ``v_j = e^{u_j}``. The density ``v_1^{-n-1} ... v_n^{-2} dv`` becomes
  ``exp(-n(n+1)/2 u_n - sum_j j(2n-j+1)/2 s_j)`` with unit Jacobian, and the
  conditions ``v_j >= 3/4 v_{j+1}``, ``v_n >= sqrt(3)/2`` are lower bounds
  on these variables. Each one is drawn as an exponential variate whose rate
  is ``kappa`` times the Haar rate; ``kappa < 1`` oversamples the cusp and
  the importance weights restore Haar measure;
* ``Q`` Haar on U(n).

Each sample is tagged by membership in the domain. Randomness is drawn per
chunk from a Philox generator keyed by ``(seed, chunk index)``, so results
do not depend on evaluation order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, GuardViolation
from .linalg import uv_decompose
from .reduction import DEFAULT_ENTRY_BOUND, DEFAULT_WORD_LENGTH, candidate_set, domain_prime_violations
from .symplectic import IwasawaCoords

CHUNK = 4096
SQRT3_2 = math.sqrt(3.0) / 2.0
LOG34 = math.log(0.75)


def chunk_rng(seed: int, chunk: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(chunk)])))


def v_rates(n: int) -> np.ndarray:
    """Haar rates of ``s_1..s_{n-1}, u_n``."""
    return np.array([j * (2 * n - j + 1) / 2.0 for j in range(1, n)] + [n * (n + 1) / 2.0])


def v_lower(n: int) -> np.ndarray:
    return np.array([LOG34] * (n - 1) + [math.log(SQRT3_2)])


def region_volume(n: int) -> float:
    """Haar volume of the sampled superset (Q normalised to mass one)."""
    rates, lower = v_rates(n), v_lower(n)
    vol_v = float(np.prod(np.exp(-rates * lower) / rates))
    # x entries have length 1; r-coordinates: first entry of each level has length 1/2
    return vol_v * 0.5 ** (n - 1)


def t_to_u(t):
    """``(s_1..s_{n-1}, u_n)`` to ``(u_1..u_n)``."""
    t = np.asarray(t, dtype=float)
    u = np.empty_like(t)
    u[..., -1] = t[..., -1]
    for k in range(t.shape[-1] - 2, -1, -1):
        u[..., k] = u[..., k + 1] + t[..., k]
    return u


def r_to_U(r_levels, n: int, N: int) -> np.ndarray:
    """Build unit upper-triangular ``U`` from recursive r-coordinates.

    ``r_levels[k]`` has shape ``(N, n - k - 1)``; row ``k`` of ``U`` is
    ``(1, r_k U_{k+1})`` where ``U_{k+1}`` is the trailing block.
    """
    U = np.broadcast_to(np.eye(n), (N, n, n)).copy()
    for k in range(n - 2, -1, -1):
        U[:, k, k + 1:] = np.einsum("ki,kij->kj", r_levels[k], U[:, k + 1:, k + 1:])
    return U


def haar_unitary(rng: np.random.Generator, N: int, n: int) -> np.ndarray:
    z = (rng.normal(size=(N, n, n)) + 1j * rng.normal(size=(N, n, n))) / np.sqrt(2.0)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r, axis1=1, axis2=2)
    return q * (d / np.abs(d))[:, None, :]


@dataclass
class HaarSample:
    n: int
    X: np.ndarray
    U: np.ndarray
    v: np.ndarray
    Q: np.ndarray
    r: list
    weight: np.ndarray
    in_domain: np.ndarray

    def __len__(self):
        return len(self.v)

    @property
    def detV(self) -> np.ndarray:
        return np.prod(self.v, axis=1)

    @property
    def Y(self) -> np.ndarray:
        return np.einsum("kij,kj,klj->kil", self.U, self.v, self.U)

    def coords(self, i: int) -> IwasawaCoords:
        return IwasawaCoords.from_xuvq(self.X[i], self.U[i], self.v[i], self.Q[i])


def _draw_chunk(rng, n: int, N: int, kappa: float):
    iu = np.triu_indices(n)
    X = np.zeros((N, n, n))
    vals = rng.uniform(-0.5, 0.5, size=(N, len(iu[0])))
    X[:, iu[0], iu[1]] = vals
    X[:, iu[1], iu[0]] = vals
    r_levels = []
    for k in range(n - 1):
        rk = rng.uniform(-0.5, 0.5, size=(N, n - k - 1))
        rk[:, 0] = np.abs(rk[:, 0])
        r_levels.append(rk)
    rates, lower = v_rates(n), v_lower(n)
    t = lower + rng.exponential(size=(N, n)) / (kappa * rates)
    logw = np.sum(np.log(1.0 / kappa) - (1.0 - kappa) * rates * (t - lower), axis=1)
    v = np.exp(t_to_u(t))
    Q = haar_unitary(rng, N, n)
    return X, r_levels, v, Q, logw


def haar_sample_region(n: int, N: int, seed: int, kappa: float = 1.0, tag: bool = True, tol: float = 1e-9,
                       L: int = DEFAULT_WORD_LENGTH, entry_bound: int = DEFAULT_ENTRY_BOUND) -> HaarSample:
    if not 1 <= n <= 3:
        raise DimensionMismatch("sampler supports n <= 3")
    if not 0 < kappa <= 1:
        raise GuardViolation("kappa must lie in (0, 1]")
    parts = []
    for c in range(0, (N + CHUNK - 1) // CHUNK):
        size = min(CHUNK, N - c * CHUNK)
        parts.append(_draw_chunk(chunk_rng(seed, c), n, size, kappa))
    X = np.concatenate([p[0] for p in parts])
    r_levels = [np.concatenate([p[1][k] for p in parts]) for k in range(n - 1)]
    v = np.concatenate([p[2] for p in parts])
    Q = np.concatenate([p[3] for p in parts])
    U = r_to_U(r_levels, n, N)
    weight = region_volume(n) / N * np.exp(np.concatenate([p[4] for p in parts]))
    s = HaarSample(n, X, U, v, Q, r_levels, weight, np.ones(N, dtype=bool))
    if tag:
        s.in_domain = in_domain_batch(s, tol, L, entry_bound)
    return s


def _dprime_ok(s: HaarSample, tol: float) -> np.ndarray:
    """Maximality of ``v_1`` at every level of the GL recursion."""
    n, N = s.n, len(s)
    ok = np.ones(N, dtype=bool)
    if n == 1:
        return ok
    if n == 2:
        # shortest vector of Y^{-1} has |p_2| <= 1 here, so only p = (k, 1) competes with e_1
        r = s.r[0][:, 0]
        d = np.abs(r - np.rint(r))
        return s.v[:, 0] >= (1.0 - d * d) * s.v[:, 1] * (1 - tol)
    Y = s.Y
    for i in range(N):
        if domain_prime_violations(Y[i], tol):
            ok[i] = False
    return ok


def in_domain_batch(s: HaarSample, tol: float = 1e-9, L: int = DEFAULT_WORD_LENGTH,
                    entry_bound: int = DEFAULT_ENTRY_BOUND) -> np.ndarray:
    """Vectorised version of :func:`thetasum.reduction.in_domain`."""
    n, v = s.n, s.v
    ok = np.all(np.abs(s.X) <= 0.5 + tol, axis=(1, 2))
    ok &= v[:, -1] >= SQRT3_2 - tol
    if n > 1:
        ok &= np.all(v[:, :-1] >= 0.75 * v[:, 1:] - tol, axis=1)
    ok &= _dprime_ok(s, tol)
    cs = candidate_set(n, L, entry_bound)
    Z = s.X + 1j * s.Y
    step = max(1, (1 << 21) // (len(cs) * n * n))
    idx = np.flatnonzero(ok)
    for a in range(0, len(idx), step):
        sel = idx[a:a + step]
        M = np.einsum("kij,sjl->skil", cs.C, Z[sel]) + cs.D[None]
        if n == 1:
            dets = np.abs(M[..., 0, 0])
        elif n == 2:
            dets = np.abs(M[..., 0, 0] * M[..., 1, 1] - M[..., 0, 1] * M[..., 1, 0])
        else:
            dets = np.abs(np.linalg.det(M))
        ok[sel] &= np.min(dets, axis=1) >= 1 - tol
    return ok


def check_uv(s: HaarSample, i: int) -> float:
    """Reconstruction error of the cached ``U``, ``v`` against a fresh decomposition."""
    uv = uv_decompose(s.Y[i])
    return float(max(np.max(np.abs(uv.U - s.U[i])), np.max(np.abs(uv.v - s.v[i]) / s.v[i])))
