import math

import numpy as np
import pytest

from thetasum.jacobi import HeisenbergElem, random_heisenberg
from thetasum.linalg import random_unitary
from thetasum.symplectic import J0, blocks, levi, random_element, unipotent
from thetasum.weil import (GaussianPacket, apply_upper, cocycle_modulus_check, e, l2_norm, packet_eval, packet_peak,
                           random_packet, schrodinger_apply, unitary_split, weil_apply, weil_quadrature_oracle)


def mild_element(rng, n):
    """Random element whose oracle integrand oscillates slowly enough for the quadrature oracle."""
    while True:
        g = random_element(rng, n, 0.4)
        A, B, C, D = blocks(g)
        if abs(np.linalg.det(C)) > 1e-3:
            Ci = np.linalg.inv(C)
            if max(np.abs(Ci).max(), np.abs(Ci @ D).max()) <= 8:
                return g


def test_packet_eval_examples():
    f = GaussianPacket.standard(2)
    assert packet_eval(f, np.zeros(2)) == 1
    assert abs(packet_eval(GaussianPacket.standard(1), [1.0]) - 0.0432139182637723) < 1e-15
    assert abs(packet_eval(GaussianPacket(1j * np.eye(2), [0.5j, 0]), np.zeros(2)) - 1) < 1e-15


def test_schrodinger_examples(rng):
    f = random_packet(rng, 2)
    g = schrodinger_apply(HeisenbergElem.zero(2), f)
    assert np.allclose(g.W, f.W) and np.allclose(g.w, f.w) and np.isclose(g.c, f.c)
    g = schrodinger_apply(HeisenbergElem([0, 0], [0, 0], 0.3), f)
    assert np.isclose(g.c, f.c * e(-0.3))
    for n in (1, 2, 3):
        f = random_packet(rng, n)
        h = random_heisenberg(rng, n)
        for _ in range(20):
            x0 = rng.normal(size=n)
            want = e(-h.t + 0.5 * h.x @ h.y + x0 @ h.y) * packet_eval(f, x0 + h.x)
            assert abs(packet_eval(schrodinger_apply(h, f), x0) - want) <= 1e-12 * max(1, abs(want))


def test_weil_levi_example():
    a = 1.7
    f = weil_apply(levi([[a]]), GaussianPacket.standard(1))
    assert np.allclose(f.W, 1j * a * a) and np.isclose(f.c, math.sqrt(a)) and f.phase_exact


def test_weil_fourier_self_dual():
    f = weil_apply(J0(1), GaussianPacket.standard(1))
    xs = np.linspace(-2, 2, 9)[:, None]
    assert np.allclose(np.abs(packet_eval(f, xs)), np.exp(-np.pi * xs[:, 0] ** 2), atol=1e-14)


def test_oracle_examples(rng):
    f = GaussianPacket.standard(1)
    assert abs(abs(weil_quadrature_oracle(J0(1), f, [0.3])) - math.exp(-math.pi * 0.09)) < 1e-9
    g = unipotent([[0.4]]) @ levi([[1.3]])
    x = np.array([0.2])
    assert abs(weil_quadrature_oracle(g, f, x) - packet_eval(weil_apply(g, f), x)) < 1e-9
    for n in (1, 2):
        g = mild_element(rng, n)
        f = random_packet(rng, n, 0.4)
        f2 = weil_apply(g, f)
        for _ in range(10):
            x = rng.normal(size=n) * 0.5
            gap = abs(abs(packet_eval(f2, x)) - abs(weil_quadrature_oracle(g, f, x)))
            assert gap <= 1e-7 * packet_peak(f2)


def test_oracle_partial_fourier(rng):
    from thetasum.weil import partial_fourier_matrix

    g = partial_fourier_matrix(2, [1])
    f = random_packet(rng, 2, 0.4)
    f2 = weil_apply(g, f)
    for _ in range(5):
        x = rng.normal(size=2) * 0.5
        assert abs(abs(packet_eval(f2, x)) - abs(weil_quadrature_oracle(g, f, x))) <= 1e-7 * packet_peak(f2)


def test_unitary_split_examples(rng):
    O = np.linalg.qr(rng.normal(size=(3, 3)))[0]
    Q1, Qd, Q2 = unitary_split(O)
    assert np.allclose(np.abs(np.diag(Qd)), 1) and np.allclose(Qd ** 2 * np.eye(3), np.eye(3), atol=1e-9)
    assert np.allclose(Q1 @ Qd @ Q2, O, atol=1e-8)
    D = np.diag(np.exp(1j * np.array([0.3, 1.1, -0.7])))
    Q1, Qd, Q2 = unitary_split(D)
    assert np.allclose(Q1, np.eye(3)) and np.allclose(Q2, np.eye(3)) and np.allclose(Qd, D)
    for k in range(200):
        n = 1 + k % 3
        Q0 = random_unitary(rng, n)
        Q1, Qd, Q2 = unitary_split(Q0)
        assert np.max(np.abs(Q1 @ Qd @ Q2 - Q0)) < 1e-8
        assert np.allclose(Q1.imag, 0) and np.allclose(Q1 @ Q1.T, np.eye(n))


def test_cocycle_examples(rng):
    f = random_packet(rng, 2)
    g1 = random_element(rng, 2, 0.5)
    assert cocycle_modulus_check(g1, np.eye(4), f) < 1e-12
    u1 = unipotent([[0.3, 0.1], [0.1, -0.2]]) @ levi([[1.2, 0.3], [0.0, 0.8]])
    u2 = levi([[0.9, -0.2], [0.4, 1.1]]) @ unipotent([[-0.5, 0.2], [0.2, 0.1]])
    assert cocycle_modulus_check(u1, u2, f) < 1e-10
    for _ in range(20):
        a, b = random_element(rng, 2, 0.5), random_element(rng, 2, 0.5)
        assert cocycle_modulus_check(a, b, f) <= 1e-8


def test_l2_and_closure(rng):
    for k in range(100):
        n = 1 + k % 3
        f = random_packet(rng, n)
        f2 = weil_apply(random_element(rng, n, 0.6), f)
        assert np.all(np.linalg.eigvalsh(f2.W.imag) > 0)
        assert abs(l2_norm(f2) - l2_norm(f)) <= 1e-8 * l2_norm(f)


def test_upper_triangular_exact(rng):
    f = random_packet(rng, 2)
    A = np.array([[1.2, 0.3], [-0.1, 0.9]])
    S = np.array([[0.4, 0.1], [0.1, -0.3]])
    B = S @ np.linalg.inv(A).T
    f3 = apply_upper(A, B, f)
    xs = rng.normal(size=(10, 2))
    ref = math.sqrt(abs(np.linalg.det(A))) * e(0.5 * np.einsum("ki,ij,kj->k", xs, A @ B.T, xs)) * packet_eval(f, xs @ A)
    assert np.max(np.abs(packet_eval(f3, xs) - ref) / np.abs(ref)) < 1e-12


def test_packet_json_roundtrip(rng):
    f = random_packet(rng, 2)
    g = GaussianPacket.from_json(f.to_json())
    assert np.allclose(f.W, g.W) and np.allclose(f.w, g.w) and f.c == g.c


def test_invalid_packet():
    from thetasum.errors import NotPositiveDefinite

    with pytest.raises(NotPositiveDefinite):
        GaussianPacket(-1j * np.eye(1), [0.0])
