import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from thetasum.cutoff import (DyadicIndex, PartitionConfig, box_indicator, box_partition, box_partition_slow, box_term,
                             f0, f1, partition_eval, partition_terms)
from thetasum.errors import GuardViolation


def test_f0_examples():
    assert f0(-1.0) == 0.0 and f0(0.0) == 0.0 and f0(1.0) == 1.0
    assert f0(0.5) == 0.5
    x = np.linspace(-0.5, 1.5, 10 ** 4)
    assert np.max(np.abs(f0(x) + f0(1 - x) - 1)) <= 1e-15


def test_f1_examples():
    assert f1(0.1) == 0.0 and f1(0.7) == 0.0
    assert f1(0.25) == pytest.approx(0.5, abs=1e-15)
    assert f1(0.5) == pytest.approx(0.5, abs=1e-15)


def test_partition_examples():
    assert partition_eval(0.5, 0) == pytest.approx(1.0, abs=1e-15)
    for J in (0, 3, 20):
        assert partition_eval(1.2, J) == 0.0 and partition_eval(-0.1, J) == 0.0
    assert abs(partition_eval(2.0 ** -10, 20) - 1) <= 1e-14


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 25), st.floats(0, 1))
def test_partition_interior(J, t):
    d = 2.0 ** -J / 3
    x = d + (1 - 2 * d) * t
    if d < x < 1 - d:
        assert abs(partition_eval(x, J) - 1) <= 1e-14


def test_two_nonzero_terms():
    x = np.linspace(1e-6, 1 / 3, 5000)
    for xi in x:
        nz = np.count_nonzero(partition_terms(xi, 25)[:, 0])
        assert nz <= 2


def test_box_term_examples():
    assert box_term([0.25], DyadicIndex((0,)), [1.0]) == pytest.approx(0.5)
    assert box_term([0.25], DyadicIndex((0,), frozenset({0})), [1.0]) == 0.0
    assert box_partition(np.array([[1.5, 0.2]]), [1.0, 1.0], 10)[0] == 0.0


def test_box_decomposition(rng):
    b = np.array([1.0, 0.6])
    J = 12
    margin = 2.0 ** -J * b.max() / 3
    x = rng.uniform(margin, 1, size=(10 ** 4, 2)) * (b - 2 * margin) + margin
    assert np.max(np.abs(box_partition(x, b, J) - box_indicator(x, b))) <= 1e-12
    few = x[:20]
    assert np.max(np.abs(box_partition_slow(few, b, 6) - box_partition(few, b, 6))) <= 1e-13


def test_guards():
    with pytest.raises(GuardViolation):
        PartitionConfig(J_max=-1)
    with pytest.raises(GuardViolation):
        DyadicIndex((-1, 0))
    with pytest.raises(GuardViolation):
        partition_eval(0.5, -1)
