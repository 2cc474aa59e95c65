import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from thetasum.errors import NotPositiveDefinite
from thetasum.linalg import inv_sqrt_upper, is_posdef, matrix_from_json, matrix_to_json, sqrt_upper, uv_decompose


def test_uv_identity_and_diagonal():
    d = uv_decompose(np.eye(2))
    assert np.allclose(d.U, np.eye(2)) and np.allclose(d.v, [1, 1])
    d = uv_decompose(np.diag([4.0, 9.0]))
    assert np.allclose(d.U, np.eye(2)) and np.allclose(d.v, [4, 9])


def test_sqrt_upper_examples():
    assert np.allclose(sqrt_upper(np.eye(3)), np.eye(3))
    assert np.allclose(sqrt_upper(np.diag([4.0, 9.0])), np.diag([2.0, 3.0]))
    Y = np.array([[2.0, 1.0], [1.0, 1.0]])
    R = sqrt_upper(Y)
    assert np.max(np.abs(R @ R.T - Y)) < 1e-12
    assert np.allclose(np.tril(R, -1), 0) and np.all(np.diag(R) > 0)
    assert np.allclose(inv_sqrt_upper(np.diag([4.0, 9.0])), np.diag([0.5, 1 / 3]))


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 4), st.integers(0, 2 ** 31))
def test_uv_and_sqrt_roundtrip(n, seed):
    G = np.random.default_rng(seed).normal(size=(n, n))
    Y = G.T @ G + np.eye(n)
    d = uv_decompose(Y)
    assert np.max(np.abs(d.reconstruct() - Y)) < 1e-10 * max(1.0, np.max(np.abs(Y)))
    assert np.allclose(np.diag(d.U), 1) and np.allclose(np.tril(d.U, -1), 0)
    assert np.allclose(sqrt_upper(Y) @ inv_sqrt_upper(Y), np.eye(n), atol=1e-10)


def test_not_posdef():
    assert not is_posdef(np.array([[1.0, 2.0], [2.0, 1.0]]))
    with pytest.raises(NotPositiveDefinite):
        uv_decompose(np.array([[1.0, 2.0], [2.0, 1.0]]))


def test_matrix_json_roundtrip():
    a = np.array([[1.0, 2.5], [2.5, -1.0]])
    assert np.array_equal(matrix_from_json(matrix_to_json(a)), a)
    z = a + 1j * a
    assert np.array_equal(matrix_from_json(matrix_to_json(z)), z)
