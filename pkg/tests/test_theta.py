import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from thetasum.errors import NotInDomain, TooLarge
from thetasum.jacobi import HeisenbergElem, JacobiElem, gamma_tilde_apply, random_gamma_tilde, random_heisenberg
from thetasum.reduction import siegel_reduce
from thetasum.symplectic import IwasawaCoords, assemble, g_MX, random_element
from thetasum.theta import (BoxSpec, ThetaQuery, cusp_main_term, cusp_remainder_log, dyadic_height_bound,
                            jacobi_point, mutation, theta_auto, theta_auto_terms, theta_direct_box,
                            theta_direct_box_reference, theta_direct_schwartz, theta_direct_schwartz_terms, theta_fast,
                            theta_fast_modulus)
from thetasum.weil import GaussianPacket, random_packet

# sum of exp(-pi m^2) over Z equals pi^(1/4) / Gamma(3/4)
THETA3 = math.pi ** 0.25 / math.gamma(0.75)


def point(X, Y):
    return assemble(IwasawaCoords.from_parts(np.atleast_2d(X), np.atleast_2d(Y)))


def test_frozen_theta_constant():
    direct = sum(math.exp(-math.pi * m * m) for m in range(-30, 31))
    assert abs(direct - THETA3) < 1e-15
    assert abs(THETA3 - 1.0864348112133080) < 1e-15


def test_box_examples():
    for M in (1, 2, 7, 40):
        assert theta_direct_box(ThetaQuery(M, [[0.0]], [0.0], [0.0]), BoxSpec([1.0])) == M - 1
    partial = [theta_direct_box(ThetaQuery(M, [[1.0]], [0.0], [0.0]), BoxSpec([1.0])) for M in range(1, 60)]
    assert max(abs(p) for p in partial) <= 1 + 1e-12


def test_box_open_convention():
    # b*M - x integral boundary points are excluded
    assert theta_direct_box(ThetaQuery(4, [[0.0]], [-1.0], [0.0]), BoxSpec([1.0])) == 3


def test_box_matches_reference(rng):
    for n in (1, 2, 3):
        for _ in range(10):
            A = rng.uniform(-1, 1, size=(n, n))
            q = ThetaQuery(8.0, 0.5 * (A + A.T), rng.normal(size=n), rng.normal(size=n))
            box = BoxSpec(rng.uniform(0.5, 1.5, n))
            a, b = theta_direct_box(q, box), theta_direct_box_reference(q, box)
            assert abs(a - b) <= 1e-11 * max(1.0, abs(b))


def test_box_guard():
    with pytest.raises(TooLarge):
        theta_direct_box(ThetaQuery(2.0 ** 14, np.zeros((2, 2)), [0, 0], [0, 0]), BoxSpec([1.0, 1.0]))


def test_schwartz_examples(rng):
    f = GaussianPacket.standard(1)
    assert abs(theta_direct_schwartz(ThetaQuery(1, [[0.0]], [0.0], [0.0]), f) - THETA3) < 1e-12
    for n in (1, 2):
        f = random_packet(rng, n)
        A = rng.uniform(-1, 1, size=(n, n))
        X = 0.5 * (A + A.T)
        x, y = rng.normal(size=n), rng.normal(size=n)
        base = theta_direct_schwartz(ThetaQuery(5.0, X, x, y), f)
        k = rng.integers(-4, 5, size=n)
        T = np.triu(rng.integers(-3, 4, size=(n, n)))
        T = T + np.triu(T, 1).T
        for q in (ThetaQuery(5.0, X, x, y + k), ThetaQuery(5.0, X + 2 * T, x, y)):
            assert abs(theta_direct_schwartz(q, f) - base) <= 1e-10 * max(1, abs(base))


def test_auto_examples():
    f = GaussianPacket.standard(1)
    assert abs(theta_auto(HeisenbergElem.zero(1), np.eye(2), f) - THETA3) < 1e-12
    want = math.sqrt(2) * (1 + 2 * math.exp(-4 * math.pi) + 2 * math.exp(-16 * math.pi))
    assert abs(theta_auto(HeisenbergElem.zero(1), point(0.0, 4.0), f) - want) < 1e-14


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 3), st.integers(0, 2 ** 31))
def test_automorphy_modulus(n, seed):
    rng = np.random.default_rng(seed)
    gt = random_gamma_tilde(rng, n, int(rng.integers(1, 13)))
    h, g, f = random_heisenberg(rng, n), random_element(rng, n, 0.5), random_packet(rng, n)
    a = abs(theta_auto(h, g, f))
    j = gamma_tilde_apply(gt, JacobiElem(h, g))
    assert abs(abs(theta_auto(j.h, j.g, f)) - a) <= 1e-8 * a


def test_mutation_breaks_automorphy(rng):
    worst = 0.0
    with mutation("theta-phase-sign"):
        for _ in range(10):
            gt = random_gamma_tilde(rng, 1, 6)
            h, g, f = random_heisenberg(rng, 1), random_element(rng, 1, 0.5), random_packet(rng, 1)
            a = abs(theta_auto(h, g, f))
            j = gamma_tilde_apply(gt, JacobiElem(h, g))
            worst = max(worst, abs(abs(theta_auto(j.h, j.g, f)) - a) / a)
    assert worst > 1e-3
    with pytest.raises(ValueError):
        with mutation("no-such-mutation"):
            pass


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 2), st.floats(1.0, 256.0), st.integers(0, 2 ** 31))
def test_schwartz_equals_automorphic(n, M, seed):
    rng = np.random.default_rng(seed)
    A = rng.uniform(-1, 1, size=(n, n))
    q = ThetaQuery(M, 0.5 * (A + A.T), rng.normal(size=n), rng.normal(size=n))
    f = random_packet(rng, n)
    a = theta_direct_schwartz(q, f)
    h, g = jacobi_point(q)
    # round-off scales with the envelope mass sum |terms|, which cancellation can leave far above |a|
    env = GaussianPacket(1j * f.W.imag, 1j * f.w.imag, abs(f.c))
    mass = abs(theta_direct_schwartz(ThetaQuery(M, np.zeros((n, n)), q.x, np.zeros(n)), env))
    assert abs(a - M ** (n / 2) * theta_auto(h, g, f)) <= 1e-7 * max(abs(a), 1e-6 * mass)


def test_fast_examples(rng):
    f = GaussianPacket.standard(2)
    g = siegel_reduce(random_element(rng, 2, 0.6))
    gr = g.gamma0.astype(float) @ random_element(np.random.default_rng(1), 2, 0.6)
    h = HeisenbergElem([0.1, -0.2], [0.3, 0.05])
    red = assemble(siegel_reduce(gr).reduced)
    assert abs(theta_fast_modulus(h, red, f) - abs(theta_auto(h, red, f))) < 1e-12 * abs(theta_auto(h, red, f))

    f1 = GaussianPacket.standard(1)
    q = ThetaQuery(100.0, [[0.0]], [0.0], [0.0])
    direct, n_direct = theta_direct_schwartz_terms(q, f1)
    h, g = jacobi_point(q)
    fast = theta_fast(h, g, f1)
    assert abs(10 * fast.modulus - abs(direct)) <= 1e-7 * abs(direct)
    assert fast.terms <= 3 and n_direct >= 100


def test_dyadic_examples(rng):
    q = ThetaQuery(1.5, [[0.0]], [0.0], [0.0])
    assert abs(dyadic_height_bound(q, BoxSpec([1.0])) - 3.0) < 1e-9
    for M in (4.0, 16.0, 100.0, 1000.0):
        q = ThetaQuery(M, [[0.0]], [0.0], [0.0])
        assert dyadic_height_bound(q, BoxSpec([1.0])) >= abs(theta_direct_box(q, BoxSpec([1.0])))
    A = rng.uniform(-0.5, 0.5, size=(2, 2))
    X = 0.5 * (A + A.T)
    box = BoxSpec([1.0, 0.7])
    base = ThetaQuery(32.0, X, [0.0, 0.0], [0.0, 0.0])
    bound = dyadic_height_bound(base, box)
    for _ in range(50):
        q = ThetaQuery(32.0, X, rng.uniform(-1, 1, 2), rng.uniform(-1, 1, 2))
        assert abs(theta_direct_box(q, box)) <= bound
    assert dyadic_height_bound(base, box, all_subsets=True) == pytest.approx(bound, rel=1e-9)


def reduced_point(v1, v2=1.0):
    return assemble(IwasawaCoords.from_xuvq(np.zeros((2, 2)), np.eye(2), [v1, v2], np.eye(2)))


def test_cusp_main_l_equals_n():
    h = HeisenbergElem([0.1, -0.2], [0.3, 0.05], 0.1)
    g = reduced_point(50.0, 2.0)
    f = GaussianPacket.standard(2)
    main = cusp_main_term(h, g, f, 2)
    # the m^(2) sum is empty, leaving the single m = 0 term
    x, y, v = h.x, h.y, np.array([50.0, 2.0])
    want = np.prod(v) ** 0.25 * np.exp(2j * np.pi * (-h.t + 0.5 * x @ y)) * np.exp(-np.pi * v @ x ** 2)
    assert abs(main.main - want) <= 1e-13 * abs(want)


def test_cusp_main_dimensional_reduction():
    f2, f1 = GaussianPacket.standard(2), GaussianPacket.standard(1)
    for v1 in (4.0, 64.0, 1e4):
        h = HeisenbergElem([0.0, 0.3], [0.2, -0.4], 0.15)
        main = cusp_main_term(h, reduced_point(v1), f2, 1)
        low = theta_auto(HeisenbergElem([0.3], [-0.4], 0.15), np.eye(2), f1)
        assert abs(main.main - v1 ** 0.25 * low) <= 1e-12 * abs(main.main)


def test_cusp_remainder_is_the_difference():
    f = GaussianPacket.standard(2)
    h = HeisenbergElem([0.17, -0.29], [0.33, 0.12], 0.25)
    g = assemble(IwasawaCoords.from_xuvq([[0.11, -0.23], [-0.23, 0.31]], [[1, 0.21], [0, 1]], [3.0, 1.3], np.eye(2)))
    diff = abs(theta_auto(h, g, f) - cusp_main_term(h, g, f, 1).main)
    assert abs(math.log(diff) - cusp_remainder_log(h, g, f, 1)) < 1e-6


def test_cusp_requires_domain():
    with pytest.raises(NotInDomain):
        cusp_main_term(HeisenbergElem.zero(1), point(0.8, 2.0), GaussianPacket.standard(1), 1)


def test_theta_auto_terms_count():
    _, terms = theta_auto_terms(HeisenbergElem.zero(2), g_MX(1.0, np.zeros((2, 2))), GaussianPacket.standard(2))
    assert 1 <= terms < 200
