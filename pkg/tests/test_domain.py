"""Type space, densities, regions, menus, and discretization."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import adscreen as A
from adscreen.domain import (Region, density_eval, lower_right_orthant,
                             monotonicity_signature, upper_right_orthant)

SQUARE = A.TypeSpace(0.0, 1.0, -1.0, 0.0)


class TestTypeSpace:
    def test_valid(self):
        s = A.TypeSpace(0.5, 1.5, -0.8, -0.2)
        assert s.x1_lo == 0.5 and s.x2_hi == -0.2

    @pytest.mark.parametrize("args", [
        (-0.1, 1.0, -1.0, 0.0),   # good values must be nonnegative
        (1.0, 1.0, -1.0, 0.0),    # empty x1 interval
        (0.0, 1.0, -1.0, 0.5),    # bad values must be nonpositive
        (0.0, 1.0, 0.0, 0.0),     # empty x2 interval
    ])
    def test_invalid(self, args):
        with pytest.raises(A.DomainError):
            A.TypeSpace(*args)


class TestDensities:
    def test_uniform_normalization(self):
        d = A.uniform_density(A.TypeSpace(1.0, 3.0, -0.5, 0.0))
        val, grad = density_eval(d, (2.0, -0.25))
        assert val == pytest.approx(1.0)  # 1 / (2 * 0.5)
        assert grad == (0.0, 0.0)

    def test_loglinear_gradient(self):
        d = A.loglinear_density(SQUARE, 1.5, -0.7)
        f, (g1, g2) = density_eval(d, (0.3, -0.4))
        assert g1 == pytest.approx(-1.5 * f)
        assert g2 == pytest.approx(-0.7 * f)

    @given(a=st.floats(-2, 2), b=st.floats(-2, 2))
    @settings(max_examples=25, deadline=None)
    def test_loglinear_integrates_to_one(self, a, b):
        d = A.loglinear_density(SQUARE, a, b)
        xs = np.linspace(0, 1, 201)
        ys = np.linspace(-1, 0, 201)
        vals = d.f(xs[:, None], ys[None, :])
        total = np.trapezoid(np.trapezoid(vals, ys, axis=1), xs)
        assert total == pytest.approx(1.0, abs=1e-4)

    def test_product_polynomial_nonnegative_required(self):
        with pytest.raises(A.DomainError):
            A.product_polynomial_density(SQUARE, (1.0, -5.0), (1.0,))


class TestRegion:
    def test_membership_with_diagonal_cut(self):
        r = Region.full(SQUARE).intersect(A.HalfPlane((1, 1), "ge", -0.2))
        assert r.contains(0.5, -0.1)
        assert not r.contains(0.1, -0.9)

    def test_intersect_merges_parallel_constraints(self):
        r = (Region.full(SQUARE)
             .intersect(A.HalfPlane((1, 0), "ge", 0.2))
             .intersect(A.HalfPlane((1, 0), "ge", 0.4)))
        assert len(r.constraints) == 1
        assert not r.contains(0.3, -0.5)
        assert r.contains(0.5, -0.5)

    def test_orthant_constructors(self):
        lr = Region.full(SQUARE).intersect(*lower_right_orthant(SQUARE, 0.5, -0.5))
        assert lr.contains(0.7, -0.8) and not lr.contains(0.3, -0.8)
        assert not lr.contains(0.7, -0.2)
        ur = Region.full(SQUARE).intersect(*upper_right_orthant(SQUARE, 0.5, -0.5))
        assert ur.contains(0.7, -0.2) and not ur.contains(0.7, -0.8)


class TestMonotonicitySignature:
    def test_convention(self):
        # 0 -> free to increase (+1), 1 -> must decrease (-1), interior -> 0.
        assert monotonicity_signature(0.0, 0.0) == (1, 1)
        assert monotonicity_signature(1.0, 1.0) == (-1, -1)
        assert monotonicity_signature(1.0, 0.0) == (-1, 1)
        assert monotonicity_signature(0.5, 1.0) == (0, -1)

    @given(q1=st.floats(0, 1), q2=st.floats(0, 1))
    @settings(max_examples=50, deadline=None)
    def test_signature_values(self, q1, q2):
        sig = monotonicity_signature(q1, q2)
        for q, s in zip((q1, q2), sig):
            assert s == {0.0: 1, 1.0: -1}.get(q, 0)


class TestCanonicalMechanisms:
    def test_ad_tiered_price_constraint(self):
        s = A.TypeSpace(1.0, 2.0, -1.0, 0.0)
        with pytest.raises(A.DomainError):
            A.ad_tiered(s, 1.2, 1.5)    # p_sb > p_g
        with pytest.raises(A.DomainError):
            A.ad_tiered(s, 1.2, 1.1)    # p_sb > x1_lo + x2_hi = 1

    def test_regions_partition(self):
        s = A.TypeSpace(1.0, 2.0, -1.0, 0.0)
        mech = A.ad_tiered(s, 1.2, 0.8)
        regions = mech.regions()
        rng = np.random.default_rng(3)
        for _ in range(200):
            x = (float(rng.uniform(1, 2)), float(rng.uniform(-1, 0)))
            hits = [name for name, r in regions.items() if r.contains(*x)]
            assert len(hits) == 1, (x, hits)

    def test_menu_items_match_regions(self):
        s = A.TypeSpace(1.0, 2.0, -1.0, 0.0)
        mech = A.ad_tiered(s, 1.2, 0.8)
        items = mech.region_items()
        assert (items["W"].q1, items["W"].q2, items["W"].price) == (1.0, 0.0, 1.2)
        assert (items["Y"].q1, items["Y"].q2, items["Y"].price) == (1.0, 1.0, 0.8)
        assert (items["Z"].q1, items["Z"].q2, items["Z"].price) == (0.0, 0.0, 0.0)


class TestDiscretization:
    def test_instance_validation(self):
        with pytest.raises(A.DomainError):
            A.DiscreteInstance((((0.5, -0.2), 0.6), ((1.0, -0.6), 0.6)))
        with pytest.raises(A.DomainError):
            A.DiscreteInstance((((0.5, 0.2), 1.0),))

    @given(n1=st.integers(2, 6), n2=st.integers(2, 6))
    @settings(max_examples=20, deadline=None)
    def test_discretize_weights(self, n1, n2):
        d = A.loglinear_density(SQUARE, 1.0, 1.0)
        inst = A.discretize(d, n1, n2)
        assert inst.n == n1 * n2
        assert sum(w for _, w in inst.points) == pytest.approx(1.0, abs=1e-12)
        for (x1, x2), w in inst.points:
            assert 0.0 <= x1 <= 1.0 and -1.0 <= x2 <= 0.0 and w > 0

    def test_loglinear_cell_ordering(self):
        # f = C exp(-x1 + x2): masses decrease in x1 and increase in x2.
        d = A.loglinear_density(SQUARE, 1.0, 1.0)
        inst = A.discretize(d, 3, 3)
        w = {}
        for (x1, x2), weight in inst.points:
            w[(round(x1, 6), round(x2, 6))] = weight
        xs = sorted({k[0] for k in w})
        ys = sorted({k[1] for k in w})
        for y in ys:
            col = [w[(x, y)] for x in xs]
            assert col == sorted(col, reverse=True)
        for x in xs:
            row = [w[(x, y)] for y in ys]
            assert row == sorted(row)
