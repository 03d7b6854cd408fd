import math
from itertools import combinations

import numpy as np
import pytest
from scipy.special import erf
from scipy.stats import multivariate_normal

from appellforms.errfun import (ErrSpec, QuadratureConfig, arctan_value, e_frame, e_p, e_via_m, e_via_m_frame,
                                frame_spec, m_frame, m_p, reduce_to_positive)
from appellforms.lattice import DVectorSet, cartan_an, dual_vectors

RNG = np.random.default_rng(7)


def random_frame(p):
    while True:
        a = RNG.normal(size=(p, p))
        g = a @ a.T + 0.3 * np.eye(p)
        if np.linalg.cond(g) < 30:
            return g, RNG.normal(scale=0.8, size=p)


def sign_expectation(g, m):
    """E[prod sgn Z_j], Z ~ N(m, g / 2 pi), from Gaussian orthant probabilities."""
    cov = g / (2 * math.pi)
    p = len(m)
    total = 1.0
    for size in range(1, p + 1):
        for sub in combinations(range(p), size):
            idx = list(sub)
            if size == 1:
                prob = 0.5 * (1 + erf(-m[idx[0]] / math.sqrt(2 * cov[idx[0], idx[0]])))
            else:
                prob = multivariate_normal(mean=m[idx], cov=cov[np.ix_(idx, idx)]).cdf(np.zeros(size))
            total += (-2) ** size * prob
    return total


def as_key(g, m):
    return tuple(map(tuple, np.asarray(g))), tuple(np.asarray(m))


class TestDepthOne:
    def test_closed_form(self):
        for x in np.linspace(-2, 2, 9):
            value = e_frame(((1.0,),), (x,))
            assert abs(value - erf(math.sqrt(math.pi) * x)) < 1e-12

    def test_odd_and_saturating(self):
        for x in (0.3, 1.1, 2.5):
            assert abs(e_frame(((2.0,),), (x,)) + e_frame(((2.0,),), (-x,))) < 1e-13
        assert abs(e_frame(((1.0,),), (6.0,)) - 1) < 1e-12
        assert e_frame(((1.0,),), (0.0,)) == pytest.approx(0, abs=1e-14)

    def test_complement_decays(self):
        values = [abs(m_frame(((1.0,),), (x,))) for x in (0.5, 1.0, 1.5, 2.0)]
        assert all(a > b for a, b in zip(values, values[1:]))
        assert values[-1] < 2 * math.exp(-math.pi * 4)


class TestDepthTwo:
    @pytest.mark.parametrize("alpha", [-2.0, -0.5, 0.0, 0.7, 3.0])
    def test_origin_value(self, alpha):
        g = np.array([[1.0, alpha], [alpha, 1.0 + alpha * alpha]])
        assert abs(m_frame(*as_key(g, (0.0, 0.0))) - arctan_value(g)) < 1e-9
        # arctan_value uses the normalised off-diagonal entry
        assert abs(arctan_value(g) - 2 / math.pi * math.atan(alpha)) < 1e-12

    def test_rebuild_from_complements(self):
        for _ in range(20):
            g, m = random_frame(2)
            assert abs(e_via_m_frame(g, m) - e_frame(g, m)) < 1e-8

    def test_complement_decays_along_both_axes(self):
        g = np.array([[2.0, 0.5], [0.5, 1.0]])
        near = abs(m_frame(*as_key(g, (0.4, 0.6))))
        far = abs(m_frame(*as_key(g, (2.4, 2.6))))
        assert far < 1e-6 < near


class TestDepthThree:
    def test_rebuild_from_complements(self):
        for _ in range(4):
            g, m = random_frame(3)
            assert abs(e_via_m_frame(g, m) - e_frame(g, m)) < 1e-7


class TestGaussianOracle:
    @pytest.mark.parametrize("p", [1, 2, 3])
    def test_orthant_probabilities(self, p):
        for _ in range(3):
            g, m = random_frame(p)
            assert abs(e_frame(g, m) - sign_expectation(g, m)) < 1e-5


class TestSpecs:
    def test_frame_round_trip(self):
        g, m = random_frame(2)
        spec = frame_spec(g, m)
        g2, m2 = spec.frame()
        assert np.allclose(g, g2) and np.allclose(m, m2)
        assert abs(e_p(spec) - e_via_m(spec)) < 1e-8

    def test_negative_plane_is_flipped(self):
        spec = ErrSpec(((1.0, 0.0), (0.0, 1.0)), ((-2.0, 0.3), (0.3, -1.0)), (0.2, -0.4))
        g, m = spec.frame()
        assert np.all(np.linalg.eigvalsh(g) > 0)
        assert abs(e_p(spec) - e_frame(g, m)) < 1e-13

    def test_indefinite_rejected(self):
        spec = ErrSpec(((1.0, 0.0), (0.0, 1.0)), ((1.0, 0.0), (0.0, -1.0)), (0.2, 0.1))
        with pytest.raises(ValueError):
            spec.frame()

    def test_depth_limits(self):
        with pytest.raises(ValueError):
            ErrSpec(tuple(tuple(float(i == j) for j in range(4)) for i in range(4)),
                    tuple(tuple(float(i == j) for j in range(4)) for i in range(4)), (0.1,) * 4)
        with pytest.raises(ValueError):
            ErrSpec((), ((1.0,),), (0.0,))

    def test_singular_wall_rejected(self):
        # the dual component along c_1 vanishes, so M_2 is discontinuous there
        g = np.array([[1.0, 0.3], [0.3, 1.0]])
        m = g @ np.array([0.0, 0.8])
        with pytest.raises(ValueError):
            m_p(frame_spec(g, m))

    def test_reduce_to_positive(self):
        ds = DVectorSet(cartan_an(2), ((1, 0), (0, 1)))
        duals = dual_vectors(ds)
        spec = reduce_to_positive(duals, cartan_an(2).gram, (0.3, -0.2))
        g, m = spec.frame()
        direct = ErrSpec(tuple(tuple(float(t) for t in d) for d in duals),
                         tuple(tuple(float(t) for t in row) for row in cartan_an(2).gram), (0.3, -0.2))
        assert abs(e_p(spec) - e_p(direct)) < 1e-14
        assert np.all(np.linalg.eigvalsh(g) > 0)

    def test_coarse_config_still_converges(self):
        g, m = random_frame(2)
        coarse = QuadratureConfig(points_per_dim=32)
        assert abs(e_frame(g, m, coarse) - e_frame(g, m)) < 1e-8
