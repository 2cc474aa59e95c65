import itertools
import math

import numpy as np
from hypothesis import given, settings, strategies as st

from thetasum.jacobi import random_gamma
from thetasum.reduction import (domain_prime_violations, grenier_reduce, height, in_domain, short_vectors,
                                shortest_vector, siegel_reduce)
from thetasum.symplectic import IwasawaCoords, assemble, iwasawa, levi, random_element


def point(X, Y):
    return assemble(IwasawaCoords.from_parts(np.atleast_2d(X), np.atleast_2d(Y)))


def y_from(v1, v2, r):
    return np.array([[v1 + r * r * v2, r * v2], [r * v2, v2]])


def test_grenier_identity():
    red = grenier_reduce(np.eye(3))
    assert np.allclose(np.abs(red.A), np.eye(3)) and np.allclose(red.reducedY, np.eye(3))


def test_grenier_example():
    Y = grenier_reduce(y_from(1.0, 1.0, 0.7)).reducedY
    v2 = Y[1, 1]
    r = Y[0, 1] / v2
    v1 = Y[0, 0] - r * r * v2
    assert 0 <= r <= 0.5 + 1e-12
    assert r * r + v1 / v2 >= 1 - 1e-12
    assert not domain_prime_violations(Y)


def test_grenier_v1_maximal_against_brute_force(rng):
    # v1 of A Y A^T equals det Y over the last diagonal entry, so v1 is maximal
    # exactly when the second row minimises p Y p^T over primitive p
    prim = [p for p in itertools.product(range(-25, 26), repeat=2) if math.gcd(*p) == 1]
    P = np.array(prim, dtype=float)
    for _ in range(200):
        G = rng.normal(size=(2, 2))
        Y = G @ G.T + 0.05 * np.eye(2)
        red = grenier_reduce(Y).reducedY
        best = np.linalg.det(Y) / np.min(np.einsum("ki,ij,kj->k", P, Y, P))
        v1 = red[0, 0] - red[0, 1] ** 2 / red[1, 1]
        assert abs(v1 - best) <= 1e-9 * best
        assert abs(abs(np.linalg.det(grenier_reduce(Y).A)) - 1) < 1e-12


def test_shortest_vector_matches_enumeration(rng):
    for n in (2, 3):
        for _ in range(20):
            G = rng.normal(size=(n, n))
            Y = G @ G.T + 0.1 * np.eye(n)
            p = shortest_vector(Y)
            val = p @ Y @ p
            for q in short_vectors(Y, val * (1 + 1e-9)):
                assert q @ Y @ q >= val * (1 - 1e-9)


def test_siegel_examples():
    r = siegel_reduce(point(0.6, 2.0))
    assert np.allclose(r.gamma0, [[1, -1], [0, 1]])
    assert np.isclose(r.reduced.X[0, 0], -0.4) and np.isclose(r.reduced.Y[0, 0], 2.0)
    r = siegel_reduce(point(0.3, 0.1))
    assert np.isclose(r.reduced.X[0, 0], 0.0, atol=1e-12) and np.isclose(r.reduced.Y[0, 0], 1.0)
    r = siegel_reduce(np.eye(4))
    assert np.allclose(r.reduced.Y, np.eye(2)) and np.isclose(r.detV, 1.0)


def test_height_examples(rng):
    assert np.isclose(height(np.eye(4)), 1.0)
    assert np.isclose(height(levi([[0.1]])), 100.0)
    for _ in range(30):
        n = int(rng.integers(1, 4))
        g = random_element(rng, n, 0.8)
        gam = random_gamma(rng, n, 8).astype(float)
        assert abs(height(gam @ g) - height(g)) <= 1e-7 * height(g)


def test_in_domain_examples():
    ok, viol = in_domain(IwasawaCoords.from_parts(np.zeros((2, 2)), np.eye(2)))
    assert ok and not viol
    ok, viol = in_domain(IwasawaCoords.from_parts([[0.6]], [[2.0]]))
    assert not ok and any("x_11" in v for v in viol)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 3), st.integers(0, 2 ** 31))
def test_reduced_points_lie_in_domain(n, seed):
    rng = np.random.default_rng(seed)
    g = random_element(rng, n, 1.0)
    r = siegel_reduce(g)
    ok, viol = in_domain(r.reduced)
    assert ok, viol
    assert np.all(np.diff(r.trace) >= -1e-9 * np.abs(np.asarray(r.trace[:-1])))
    assert np.max(np.abs(iwasawa(r.gamma0 @ g).Y - r.reduced.Y)) < 1e-8 * max(1, np.max(np.abs(r.reduced.Y)))


def test_membership_stable_when_L_grows(rng):
    # n <= 2 covers the full corpus cheaply; the n = 3 sets are checked on a few points
    for n, count in ((1, 60), (2, 60), (3, 6)):
        for _ in range(count):
            c = siegel_reduce(random_element(rng, n, 0.8)).reduced
            perturbed = IwasawaCoords.from_parts(c.X + rng.uniform(-0.02, 0.02) * np.eye(n), c.Y, c.Q)
            for pt in (c, perturbed):
                assert in_domain(pt, L=8)[0] == in_domain(pt, L=10)[0]


def test_to_json_shape():
    d = siegel_reduce(point(0.3, 0.1)).to_json()
    assert set(d) == {"gamma0", "X", "V", "U", "detV", "iterations"}
