import math

import numpy as np
import pytest

from thetasum.errors import DimensionMismatch, GuardViolation
from thetasum.reduction import in_domain
from thetasum.sampling import CHUNK, check_uv, haar_sample_region, region_volume


def test_n1_marginal_mean_of_inverse():
    # density proportional to v^-2 on [sqrt3/2, inf): E[1/v] = 1 / (2 v0)
    s = haar_sample_region(1, 100000, seed=3)
    assert abs(np.mean(1.0 / s.v[:, 0]) - 1 / math.sqrt(3)) <= 0.02 / math.sqrt(3)


def test_weights_positive_finite():
    s = haar_sample_region(2, 5000, seed=1, kappa=0.5)
    assert np.all(s.weight > 0) and np.all(np.isfinite(s.weight))


def test_n1_in_domain_volume():
    # the n=1 domain has hyperbolic area pi/3
    s = haar_sample_region(1, 100000, seed=5, kappa=0.7)
    assert abs(np.sum(s.weight * s.in_domain) - math.pi / 3) <= 0.02 * math.pi / 3
    assert region_volume(1) == pytest.approx(2 / math.sqrt(3))


def test_in_domain_fraction_stable():
    fr = [np.mean(haar_sample_region(2, 100000, seed=s).in_domain) for s in (1, 2)]
    assert min(fr) > 0 and abs(fr[0] - fr[1]) <= 0.02


def test_batch_tag_matches_scalar():
    for n in (1, 2, 3):
        s = haar_sample_region(n, 120, seed=9)
        for i in range(len(s)):
            assert bool(s.in_domain[i]) == in_domain(s.coords(i))[0]
            assert check_uv(s, i) < 1e-9


def test_deterministic_and_chunk_independent():
    a = haar_sample_region(2, 5000, seed=4)
    b = haar_sample_region(2, 5000, seed=4)
    assert np.array_equal(a.v, b.v) and np.array_equal(a.X, b.X)
    # randomness is keyed per chunk, so whole chunks do not depend on N
    c = haar_sample_region(2, CHUNK, seed=4)
    assert np.array_equal(a.v[:CHUNK], c.v)


def test_guards():
    with pytest.raises(DimensionMismatch):
        haar_sample_region(4, 10, 0)
    with pytest.raises(GuardViolation):
        haar_sample_region(1, 10, 0, kappa=1.5)
