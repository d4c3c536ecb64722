"""Price calibration: bisection and Newton root-finding."""

from __future__ import annotations

import math

import pytest
from scipy.optimize import brentq

import adscreen as A

SQUARE = A.TypeSpace(0.0, 1.0, -1.0, 0.0)
BOX = A.TypeSpace(1.0, 2.0, -1.0, 0.0)


class TestGoodOnly:
    def test_square_price(self):
        m = A.build_measure(A.uniform_density(SQUARE), A.constant_payment(0.0))
        res = A.solve_good_only_price(m)
        assert res.prices[0] == pytest.approx(0.5, abs=1e-8)
        assert res.prices[1] is None
        assert max(abs(v) for v in res.residuals.values()) < 1e-7

    @pytest.mark.parametrize("hi", [0.8, 1.0, 1.4])
    def test_matches_independent_root_of_marginal(self, hi):
        s = A.TypeSpace(0.0, hi, -1.0, 0.0)
        m = A.build_measure(A.uniform_density(s), A.constant_payment(0.0))
        res = A.solve_good_only_price(m)
        ref = brentq(lambda t: A.marginal_M(m, None, t), 1e-9, hi * (1 - 1e-9),
                     xtol=1e-12)
        assert res.prices[0] == pytest.approx(ref, abs=1e-7)


class TestSingleBundle:
    def test_box_price(self):
        m = A.build_measure(A.uniform_density(BOX), A.constant_payment(1.5))
        res = A.solve_single_bundle_price(m)
        assert res.prices[0] is None
        assert res.prices[1] == pytest.approx((-3 + math.sqrt(33)) / 6, abs=1e-8)

    def test_no_root_reports_bracket(self):
        # At k = 0 the square is in the good-only regime; the bundle-price
        # bracket has no sign change and the solver must say which bracket.
        m = A.build_measure(A.uniform_density(SQUARE), A.constant_payment(0.0))
        with pytest.raises(A.NoRootError) as exc:
            A.solve_single_bundle_price(m)
        assert "bracket" in str(exc.value)


class TestAdTiered:
    def test_box_prices_and_degenerate_roots(self):
        m = A.build_measure(A.uniform_density(BOX), A.constant_payment(0.5))
        res = A.solve_ad_tiered_prices(m)
        p_g, p_sb = res.prices
        assert p_g == pytest.approx(1.1173130671845022, abs=1e-8)
        assert p_sb == pytest.approx(0.7983347667930659, abs=1e-8)
        # The zero-mass system also has degenerate solutions where the two
        # tiers collapse; they are reported separately, not as the answer.
        for extra in res.extra_roots:
            assert abs(extra[0] - p_g) > 1e-3

    def test_residuals_vanish_at_solution(self):
        m = A.build_measure(A.uniform_density(BOX), A.constant_payment(0.5))
        res = A.solve_ad_tiered_prices(m)
        p_g, p_sb = res.prices
        mech = A.ad_tiered(BOX, p_g, p_sb)
        regions = mech.regions()
        assert A.mu_of_region(m, regions["W"]).total == pytest.approx(0.0, abs=1e-7)
        assert A.mu_of_region(m, regions["Y"]).total == pytest.approx(0.0, abs=1e-7)

    def test_stated_polynomial_system(self):
        m = A.build_measure(A.uniform_density(BOX), A.constant_payment(0.5))
        p1, p2 = A.solve_ad_tiered_prices(m).prices
        assert 1.5 * p1**2 - 4 * p1 + 2 * p2 + 1 == pytest.approx(0.0, abs=1e-8)
        assert (1.5 * p1**2 - 3 * p1 * p2 - 2.5 * p1 + 2 * p2 + 2
                == pytest.approx(0.0, abs=1e-8))
