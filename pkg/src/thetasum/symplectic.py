"""Elements of Sp(n, R), Iwasawa and Langlands coordinates, the XAT chart.

A symplectic matrix is a ``(2n, 2n)`` float array ``g = [[A, B], [C, D]]``
with ``g J0 g^T = J0``. The Iwasawa decomposition used throughout is

    g = [[I, X], [0, I]] @ [[Y^{1/2}, 0], [0, Y^{-T/2}]] @ k(Q)

with ``Y^{1/2}`` upper-triangular with positive diagonal and
``k(Q) = [[Re Q, -Im Q], [Im Q, Re Q]]``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ChartSingular, DimensionMismatch, NotPositiveDefinite, NotUnitary, NumericalBreakdown, OddDimension
from .linalg import UVDecomp, max_rel_err, sqrt_upper, sym, uv_decompose

SYMPLECTIC_TOL = 1e-9


def rank(g) -> int:
    m = np.shape(g)[0]
    if m % 2:
        raise OddDimension(f"matrix dimension {m} is odd")
    return m // 2


def blocks(g):
    n = rank(g)
    g = np.asarray(g)
    return g[:n, :n], g[:n, n:], g[n:, :n], g[n:, n:]


def from_blocks(A, B, C, D) -> np.ndarray:
    return np.block([[A, B], [C, D]])


def J0(n: int) -> np.ndarray:
    z = np.zeros((n, n))
    I = np.eye(n)
    return from_blocks(z, -I, I, z)


def unipotent(X) -> np.ndarray:
    """``[[I, X], [0, I]]``."""
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    return from_blocks(np.eye(n), X, np.zeros((n, n)), np.eye(n))


def lower_unipotent(T) -> np.ndarray:
    """``[[I, 0], [T, I]]``."""
    T = np.asarray(T, dtype=float)
    n = T.shape[0]
    return from_blocks(np.eye(n), np.zeros((n, n)), T, np.eye(n))


def levi(A) -> np.ndarray:
    """``[[A, 0], [0, A^{-T}]]``."""
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    return from_blocks(A, np.zeros((n, n)), np.zeros((n, n)), np.linalg.inv(A).T)


def flow(n: int, s: float) -> np.ndarray:
    """Diagonal flow ``diag(e^{-s} I, e^{s} I)``."""
    return np.diag(np.r_[np.full(n, np.exp(-s)), np.full(n, np.exp(s))])


def g_MX(M: float, X) -> np.ndarray:
    """``[[I, X], [0, I]] @ diag(M^{-1} I, M I)``."""
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    return unipotent(X) @ np.diag(np.r_[np.full(n, 1.0 / M), np.full(n, float(M))])


def is_symplectic(M, tol: float = SYMPLECTIC_TOL) -> bool:
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionMismatch("matrix must be square")
    n = rank(M)
    J = J0(n)
    return float(np.max(np.abs(M @ J @ M.T - J))) <= tol


def sp_inverse(g) -> np.ndarray:
    """Exact block inverse ``[[D^T, -B^T], [-C^T, A^T]]``."""
    A, B, C, D = blocks(g)
    return from_blocks(D.T, -B.T, -C.T, A.T)


def embed_unitary(Q) -> np.ndarray:
    Q = np.asarray(Q, dtype=complex)
    n = Q.shape[0]
    if float(np.max(np.abs(Q @ Q.conj().T - np.eye(n)))) > SYMPLECTIC_TOL:
        raise NotUnitary("Q is not unitary within 1e-9")
    return from_blocks(Q.real, -Q.imag, Q.imag, Q.real)


@dataclass(frozen=True)
class IwasawaCoords:
    X: np.ndarray
    Y: np.ndarray
    Q: np.ndarray
    uv: UVDecomp

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def V(self) -> np.ndarray:
        return self.uv.v

    @property
    def U(self) -> np.ndarray:
        return self.uv.U

    @property
    def detV(self) -> float:
        return self.uv.det()

    @property
    def sqrtY(self) -> np.ndarray:
        return self.uv.U * np.sqrt(self.uv.v)

    @property
    def Z(self) -> np.ndarray:
        return self.X + 1j * self.Y

    @classmethod
    def from_parts(cls, X, Y, Q=None) -> "IwasawaCoords":
        X = sym(X)
        Y = sym(Y)
        Q = np.eye(X.shape[0], dtype=complex) if Q is None else np.asarray(Q, dtype=complex)
        return cls(X, Y, Q, uv_decompose(Y))

    @classmethod
    def from_xuvq(cls, X, U, v, Q=None) -> "IwasawaCoords":
        U = np.asarray(U, dtype=float)
        v = np.asarray(v, dtype=float)
        return cls.from_parts(X, (U * v) @ U.T, Q)


def iwasawa(g) -> IwasawaCoords:
    A, B, C, D = blocks(np.asarray(g, dtype=float))
    P = C @ C.T + D @ D.T
    try:
        uv_decompose(P)
        Y = sym(np.linalg.inv(P))
        uv = uv_decompose(Y)
    except NotPositiveDefinite as exc:
        raise NumericalBreakdown(f"C C^T + D D^T not positive definite: {exc}") from exc
    X = sym((A @ C.T + B @ D.T) @ Y)
    # (C C^T + D D^T)^{-1/2} is read as the transpose of the upper-triangular
    # root of Y, the only choice consistent with the factorization above.
    R = uv.U * np.sqrt(uv.v)
    Q = R.T @ (D + 1j * C)
    return IwasawaCoords(X, Y, Q, uv)


def assemble(c: IwasawaCoords) -> np.ndarray:
    R = c.sqrtY
    n = c.n
    a = from_blocks(R, np.zeros((n, n)), np.zeros((n, n)), np.linalg.inv(R).T)
    return unipotent(c.X) @ a @ embed_unitary(c.Q)


@dataclass(frozen=True)
class LanglandsCoords:
    l: int
    R: np.ndarray
    S: np.ndarray
    T: np.ndarray
    U: np.ndarray
    V: np.ndarray
    X: np.ndarray
    Y: np.ndarray
    Q: np.ndarray

    def factors(self):
        """The four factors before ``k(Q)`` in the parabolic decomposition.

        The third diagonal block of the torus factor is ``V_l^{-1/2}``; that
        is what makes the factor symplectic.
        """
        l = self.l
        k = self.X.shape[0]
        n = l + k
        Il, Ik = np.eye(l), np.eye(k)
        zlk, zkl = np.zeros((l, k)), np.zeros((k, l))
        zl, zk = np.zeros((l, l)), np.zeros((k, k))
        N1 = np.block([
            [Il, zlk, self.T, self.S],
            [zkl, Ik, self.S.T, zk],
            [zl, zlk, Il, zlk],
            [zkl, zk, zkl, Ik],
        ])
        Uinv_T = np.linalg.inv(self.U).T
        N2 = np.block([
            [self.U, self.R, zl, zlk],
            [zkl, Ik, zkl, zk],
            [zl, zlk, Uinv_T, zlk],
            [zkl, zk, -self.R.T @ Uinv_T, Ik],
        ])
        N3 = np.eye(2 * n)
        N3[l:n, n + l:] = self.X
        sqY = sqrt_upper(self.Y) if k else np.zeros((0, 0))
        sv = np.sqrt(self.V)
        A4 = np.zeros((n, n))
        A4[:l, :l] = np.diag(sv)
        A4[l:, l:] = sqY
        D4 = np.zeros((n, n))
        D4[:l, :l] = np.diag(1.0 / sv)
        if k:
            D4[l:, l:] = np.linalg.inv(sqY).T
        A4full = from_blocks(A4, np.zeros((n, n)), np.zeros((n, n)), D4)
        return N1, N2, N3, A4full

    def assemble(self) -> np.ndarray:
        N1, N2, N3, A4 = self.factors()
        return N1 @ N2 @ N3 @ A4 @ embed_unitary(self.Q)


def langlands_coords(g, l: int) -> LanglandsCoords:
    c = iwasawa(g)
    n = c.n
    if not 1 <= l <= n:
        raise DimensionMismatch(f"l must be in 1..{n}")
    Rt = c.sqrtY
    R11, R12, R22 = Rt[:l, :l], Rt[:l, l:], Rt[l:, l:]
    V = np.diag(R11) ** 2
    U = R11 / np.diag(R11)
    if n - l:
        Rl = R12 @ np.linalg.inv(R22)
    else:
        Rl = np.zeros((l, 0))
    Xl = c.X[l:, l:]
    Sl = c.X[:l, l:] - Rl @ Xl
    Tl = sym(c.X[:l, :l] - Rl @ Xl @ Rl.T)
    Yl = R22 @ R22.T
    return LanglandsCoords(l, Rl, Sl, Tl, U, V, Xl, Yl, c.Q)


def xat_factor(g):
    """Chart ``g = [[I, X], [0, I]] levi(A) [[I, 0], [T, I]]`` (needs ``D`` invertible)."""
    A, B, C, D = blocks(np.asarray(g, dtype=float))
    if abs(np.linalg.det(D)) <= 1e-10:
        raise ChartSingular("D block is not invertible")
    Dinv = np.linalg.inv(D)
    return sym(B @ Dinv), Dinv.T, sym(Dinv @ C)


def xat_assemble(X, A, T) -> np.ndarray:
    return unipotent(X) @ levi(A) @ lower_unipotent(T)


def random_symmetric(rng: np.random.Generator, n: int, scale: float = 1.0) -> np.ndarray:
    a = rng.normal(size=(n, n)) * scale
    return 0.5 * (a + a.T)


def random_word(rng: np.random.Generator, n: int, length: int, scale: float = 0.5) -> np.ndarray:
    """Product of ``length`` random generators: unipotent, Levi, and J0."""
    g = np.eye(2 * n)
    for _ in range(length):
        kind = rng.integers(3)
        if kind == 0:
            h = unipotent(random_symmetric(rng, n, scale))
        elif kind == 1:
            A = np.eye(n) + rng.normal(size=(n, n)) * scale * 0.5
            while abs(np.linalg.det(A)) < 0.2:
                A = np.eye(n) + rng.normal(size=(n, n)) * scale * 0.5
            h = levi(A)
        else:
            h = J0(n)
        g = g @ h
    return g


def random_element(rng: np.random.Generator, n: int, spread: float = 1.0) -> np.ndarray:
    """Random element assembled from Iwasawa coordinates with moderate spread."""
    from .linalg import random_unitary

    X = random_symmetric(rng, n, spread)
    U = np.triu(rng.normal(size=(n, n)) * spread, 1) + np.eye(n)
    v = np.exp(rng.normal(size=n) * spread)
    return assemble(IwasawaCoords.from_xuvq(X, U, v, random_unitary(rng, n)))


def coords_close(a: IwasawaCoords, b: IwasawaCoords) -> float:
    return max(max_rel_err(a.X, b.X), max_rel_err(a.Y, b.Y), max_rel_err(a.Q, b.Q))
