import numpy as np
from hypothesis import given, settings, strategies as st

from thetasum.jacobi import (GammaTildeElem, HeisenbergElem, JacobiElem, gamma_tilde_apply, gamma_tilde_mul,
                             h_act, h_gamma, h_inv, h_mul, jacobi_mul, random_gamma_tilde, random_heisenberg)
from thetasum.symplectic import J0, random_element


def close(a: HeisenbergElem, b: HeisenbergElem, tol=1e-10):
    return np.allclose(a.x, b.x, atol=tol) and np.allclose(a.y, b.y, atol=tol) and abs(a.t - b.t) <= tol


def test_heisenberg_examples():
    h = HeisenbergElem([0.3, -1.2], [0.7, 0.4], 0.9)
    assert close(h_mul(h, HeisenbergElem(-h.x, -h.y, -h.t)), HeisenbergElem.zero(2))
    assert close(h_mul(HeisenbergElem([0.3], [0]), HeisenbergElem([0], [0.5])), HeisenbergElem([0.3], [0.5], -0.075))
    assert close(h_mul(h, h_inv(h)), HeisenbergElem.zero(2))


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 3), st.integers(0, 2 ** 31))
def test_group_laws(n, seed):
    rng = np.random.default_rng(seed)
    a, b, c = (random_heisenberg(rng, n) for _ in range(3))
    assert close(h_mul(h_mul(a, b), c), h_mul(a, h_mul(b, c)), 1e-12)
    g = random_element(rng, n, 0.5)
    assert close(h_act(g, h_mul(a, b)), h_mul(h_act(g, a), h_act(g, b)), 1e-9)
    js = [JacobiElem(random_heisenberg(rng, n), random_element(rng, n, 0.4)) for _ in range(3)]
    l = jacobi_mul(jacobi_mul(js[0], js[1]), js[2])
    r = jacobi_mul(js[0], jacobi_mul(js[1], js[2]))
    assert close(l.h, r.h, 1e-8) and np.allclose(l.g, r.g, atol=1e-9)


def test_h_act_examples():
    h = HeisenbergElem([0.3], [0.8], 0.1)
    assert close(h_act(np.eye(2), h), h)
    assert close(h_act(J0(1), h), HeisenbergElem([0.8], [-0.3], 0.1))


def test_jacobi_identity_and_reduction():
    e = JacobiElem(HeisenbergElem.zero(2), np.eye(4))
    j = JacobiElem(HeisenbergElem([0.1, 0.2], [0.3, 0.4], 0.5), random_element(np.random.default_rng(1), 2))
    for p in (jacobi_mul(e, j), jacobi_mul(j, e)):
        assert close(p.h, j.h) and np.allclose(p.g, j.g)
    a = JacobiElem(HeisenbergElem([0.1], [0.2], 0.3), np.eye(2))
    b = JacobiElem(HeisenbergElem([0.5], [-0.7], 0.1), np.eye(2))
    assert close(jacobi_mul(a, b).h, h_mul(a.h, b.h))


def test_h_gamma_examples():
    assert close(h_gamma(np.eye(4, dtype=int)), HeisenbergElem.zero(2))
    assert close(h_gamma(np.array([[1, 1], [0, 1]])), HeisenbergElem([0], [0.5]))
    assert close(h_gamma(np.array([[0, -1], [1, 0]])), HeisenbergElem([0], [0]))


def test_gamma_tilde_examples():
    j = JacobiElem(HeisenbergElem([0.2, 0.1], [0.3, -0.6], 0.4), random_element(np.random.default_rng(2), 2))
    e0 = GammaTildeElem([0, 0], [0, 0], 0.0, np.eye(4, dtype=int))
    r = gamma_tilde_apply(e0, j)
    assert close(r.h, j.h) and np.allclose(r.g, j.g)
    e1 = GammaTildeElem([1, 0], [0, 0], 0.0, np.eye(4, dtype=int))
    r = gamma_tilde_apply(e1, j)
    # product convention t = t1 + t2 + (y1.x2 - x1.y2)/2 gives t - y_1/2
    assert close(r.h, HeisenbergElem(j.h.x + [1, 0], j.h.y, j.h.t - 0.5 * j.h.y[0]))


def test_gamma_tilde_composition(rng):
    for n in (1, 2, 3):
        for _ in range(10):
            e1, e2 = random_gamma_tilde(rng, n, 5), random_gamma_tilde(rng, n, 5)
            j = JacobiElem(random_heisenberg(rng, n), random_element(rng, n, 0.4))
            a = gamma_tilde_apply(gamma_tilde_mul(e1, e2), j)
            b = gamma_tilde_apply(e1, gamma_tilde_apply(e2, j))
            scale = max(1.0, np.max(np.abs(a.h.x)), np.max(np.abs(a.h.y)))
            assert close(a.h, b.h, 1e-8 * scale ** 2) and np.allclose(a.g, b.g, atol=1e-8)


def test_gamma_tilde_json_roundtrip(rng):
    e = random_gamma_tilde(rng, 2, 6)
    f = GammaTildeElem.from_json(e.to_json())
    assert np.array_equal(e.gamma, f.gamma) and np.array_equal(e.m, f.m) and e.t == f.t
