import cmath
import json
import math
from fractions import Fraction as F

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from appellforms.appell import theta_series
from appellforms.fseries import (FSeries, canonical_coefficients, eval_numeric, geometric_expand, monomial,
                                 series_add, series_compare, series_equal, series_mul, symmetric_box)
from appellforms.lattice import Lattice

QCUT = F(4)
BOX = symmetric_box(1, 5)


def series(terms, qcut=QCUT, wbox=None):
    return FSeries({(F(q), (F(w),), F(p)): F(c) for (q, w, p), c in terms.items()}, 1, qcut, wbox)


rationals = st.builds(F, st.integers(0, 12), st.sampled_from([1, 2, 3]))
keys = st.tuples(rationals, st.integers(-3, 3), st.sampled_from([0, F(1, 2), F(1, 4)]))
sparse = st.dictionaries(keys, st.integers(-3, 3).filter(bool), max_size=5).map(series)


class TestArithmetic:
    def test_difference_of_squares(self):
        one_plus = series({(0, 0, 0): 1, (1, 0, 0): 1})
        one_minus = series({(0, 0, 0): 1, (1, 0, 0): -1})
        assert series_equal(one_plus * one_minus, series({(0, 0, 0): 1, (2, 0, 0): -1}))

    def test_zero_is_identity(self):
        a = series({(F(1, 3), 1, 0): 2, (2, -1, F(1, 2)): -1})
        assert series_equal(series_add(a, FSeries(nvars=1, qcut=QCUT, wbox=BOX)), a)

    def test_no_zero_coefficients(self):
        a = series({(1, 0, 0): 1})
        assert len((a - a).terms) == 0

    def test_truncation(self):
        a = series({(0, 0, 0): 1, (5, 0, 0): 1})
        assert len(a.terms) == 1
        b = series({(0, 6, 0): 1}, wbox=BOX)
        assert len(b.terms) == 0

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            series_add(FSeries(nvars=1), FSeries(nvars=2))

    @settings(max_examples=40, deadline=None)
    @given(sparse, sparse, sparse)
    def test_ring_axioms(self, a, b, c):
        assert series_equal(a + b, b + a)
        assert series_equal(a * b, b * a)
        assert series_equal((a * b) * c, a * (b * c))
        assert series_equal(a * (b + c), a * b + a * c)

    def test_phases_are_reduced(self):
        # e(1/2) = -1 and 1 + e(1/3) + e(2/3) = 0
        assert series_equal(series({(0, 0, F(1, 2)): 1}), series({(0, 0, 0): -1}))
        a = series({(1, 0, 0): 1, (1, 0, F(1, 3)): 1, (1, 0, F(2, 3)): 1})
        assert series_equal(a, series({}))
        assert not canonical_coefficients(a)

    def test_multiplication_rule(self):
        a = series_mul(monomial(q=F(1, 2), w=(1,), coeff=3, qcut=QCUT, wbox=BOX),
                       monomial(q=F(1, 3), w=(-2,), phase=F(1, 3), coeff=2, qcut=QCUT))
        assert a.terms == {(F(5, 6), (F(-1),), F(1, 3)): F(6)}


class TestGeometric:
    def test_forward_q(self):
        g = geometric_expand(1, (0,), 1, 5)
        assert sorted(g.terms) == [(F(n), (F(0),), F(0)) for n in range(6)]

    def test_backward(self):
        g = geometric_expand(-1, (2,), -1, 4)
        assert g.terms == {(F(n), (F(-2 * n),), F(0)): F(-1) for n in range(1, 5)}

    def test_w_only_needs_window(self):
        box = symmetric_box(1, 8)
        g = geometric_expand(0, (2,), 1, 3, box)
        assert {k[1][0] for k in g.terms} == {F(0), F(2), F(4), F(6), F(8)}
        with pytest.raises(ValueError):
            geometric_expand(0, (2,), 1, 3)

    def test_both_w_truncated(self):
        with pytest.raises(ValueError):
            series({(0, 0, 0): 1}, wbox=BOX) * series({(0, 0, 0): 1}, wbox=BOX)

    def test_wrong_direction(self):
        with pytest.raises(ValueError):
            geometric_expand(1, (0,), -1, 3)

    @pytest.mark.parametrize("q,w,direction", [(1, 1, 1), (F(1, 2), -3, 1), (-2, 1, -1), (-F(1, 3), 2, -1)])
    def test_inverse_property(self, q, w, direction):
        box = symmetric_box(1, 30)
        g = geometric_expand(q, (w,), direction, 6, box)
        one_minus = FSeries({(F(0), (F(0),), F(0)): F(1), (F(q), (F(w),), F(0)): F(-1)}, 1)
        product = one_minus * g
        assert product.qcut >= 4
        assert series_equal(product, FSeries({(F(0), (F(0),), F(0)): F(1)}, 1))


class TestCompare:
    def test_reflexive(self):
        a = series({(1, 1, 0): 2})
        assert series_equal(a, a)

    def test_outside_window_ignored(self):
        a = series({(0, 0, 0): 1, (1, 0, 0): 1}, qcut=None)
        b = series({(0, 0, 0): 1, (1, 0, 0): 1, (5, 0, 0): 1}, qcut=None)
        assert series_equal(a, b, 4)
        ok, diff = series_compare(a, b, 6)
        assert not ok and diff is not None


class TestEval:
    def test_constant(self):
        value, _ = eval_numeric(FSeries({(F(0), (), F(0)): F(1)}, 0), 1j)
        assert value == 1

    def test_single_q(self):
        value, _ = eval_numeric(FSeries({(F(1), (), F(0)): F(1)}, 0), 1j)
        assert abs(value - math.exp(-2 * math.pi)) < 1e-15

    def test_theta_against_direct_sum(self):
        th = theta_series(Lattice(((2,),)), (0,), 60)
        value, bound = eval_numeric(th, 1j)
        direct = sum(math.exp(-2 * math.pi * k * k) for k in range(-25, 26))
        assert abs(value - direct) < 1e-12
        assert bound < 1e-12

    def test_linearity(self):
        a = series({(F(1, 2), 1, 0): 2, (1, -1, F(1, 3)): 1})
        b = series({(F(1, 3), 2, F(1, 2)): -1})
        tau, z = 0.1 + 0.8j, (0.3 - 0.05j,)
        lhs = eval_numeric(a + b, tau, z)[0]
        rhs = eval_numeric(a, tau, z)[0] + eval_numeric(b, tau, z)[0]
        assert abs(lhs - rhs) < 1e-12

    def test_monomial_value(self):
        a = series({(F(1, 2), 2, F(1, 4)): 3})
        tau, z = 0.2 + 1.1j, 0.3 + 0.1j
        expect = 3 * cmath.exp(2j * math.pi * (tau / 2 + 2 * z + 0.25))
        assert abs(eval_numeric(a, tau, (z,))[0] - expect) < 1e-14

    def test_upper_half_plane(self):
        with pytest.raises(ValueError):
            eval_numeric(FSeries(nvars=0), -1j)


class TestJson:
    def test_round_trip_and_order(self):
        a = series({(2, 1, 0): 1, (F(1, 2), -1, F(1, 3)): -2, (F(1, 2), -2, 0): 5})
        doc = json.loads(json.dumps(a.to_json()))
        back = FSeries.from_json(doc)
        assert series_equal(a, back)
        qs = [(F(*t["q"]), [F(*x) for x in t["w"]]) for t in doc["terms"]]
        assert qs == sorted(qs)
        assert set(doc) == {"qcut", "wwin", "nvars", "terms"}
