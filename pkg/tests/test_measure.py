"""Transformed signed measure: decomposition, marginals, identities."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import adscreen as A
from adscreen.domain import Region

SQUARE = A.TypeSpace(0.0, 1.0, -1.0, 0.0)
BOX = A.TypeSpace(1.0, 2.0, -1.0, 0.0)


def _density(space, fam, a, b):
    if fam == "uniform":
        return A.uniform_density(space)
    if fam == "loglinear":
        return A.loglinear_density(space, a, b)
    return A.product_polynomial_density(space, (1.0, abs(a)), (1.0, -abs(b) / 2))


class TestDecomposition:
    def test_box_components_at_half_payment(self):
        # Uniform on [1,2]x[-1,0] with k = 0.5: atom +1 at (1,-1), edge line
        # densities +0.5 (bottom), +0.5 (top), +2 (right), -1 (left),
        # interior -3 uniformly.
        m = A.build_measure(A.uniform_density(BOX), A.constant_payment(0.5))
        bd = A.mu_of_region(m, Region.full(BOX))
        assert bd.atom == pytest.approx(1.0, abs=1e-12)
        assert bd.interior == pytest.approx(-3.0, abs=1e-9)
        edges = bd.edges
        assert edges["bottom"] == pytest.approx(0.5, abs=1e-9)
        assert edges["top"] == pytest.approx(0.5, abs=1e-9)
        assert edges["right"] == pytest.approx(2.0, abs=1e-9)
        assert edges["left"] == pytest.approx(-1.0, abs=1e-9)
        assert bd.total == pytest.approx(0.0, abs=1e-9)

    @given(fam=st.sampled_from(["uniform", "loglinear", "product_polynomial"]),
           a=st.floats(-1.5, 1.5), b=st.floats(-1.5, 1.5),
           k=st.floats(0.0, 2.0))
    @settings(max_examples=25, deadline=None)
    def test_total_mass_zero(self, fam, a, b, k):
        d = _density(SQUARE, fam, a, b)
        m = A.build_measure(d, A.constant_payment(k))
        assert abs(A.mu_total(m)) < 1e-8


class TestMarginal:
    def test_square_cumulative_marginal(self):
        m = A.build_measure(A.uniform_density(SQUARE), A.constant_payment(0.0))
        for t in np.linspace(0.0, 1.0, 12)[:-1]:
            assert A.marginal_M(m, None, float(t)) == pytest.approx(1 - 2 * t, abs=1e-9)
        # The right edge enters the cumulative mass at x1_hi and closes the
        # measure back to zero total mass.
        assert A.marginal_M(m, None, 1.0) == pytest.approx(0.0, abs=1e-9)

    def test_marginal_outside_domain(self):
        m = A.build_measure(A.uniform_density(SQUARE), A.constant_payment(0.0))
        with pytest.raises(A.DomainError):
            A.marginal_M(m, None, 1.5)

    def test_square_hinge_tails(self):
        m = A.build_measure(A.uniform_density(SQUARE), A.constant_payment(0.0))
        for t in np.linspace(0.0, 0.5, 6):
            got = A.hinge_tail_integral(m, None, float(t), 0.5)
            assert got == pytest.approx((t - 0.5) ** 2, abs=1e-8)

    def test_hinge_tail_is_hinge_integral(self):
        # int_t^p M(z) dz  ==  - int (x1 - t)+ dmu over the clip, up to the
        # hinge evaluated at p absorbing the cumulative mass at p.  On the
        # square at the calibrated price both sides reduce to the same
        # number because mu([x1_lo, p] x ...) integrates the hinge exactly.
        m = A.build_measure(A.uniform_density(SQUARE), A.constant_payment(0.0))
        clip = Region.full(SQUARE).intersect(A.HalfPlane((1, 0), "le", 0.5))
        t = 0.2
        tail = A.hinge_tail_integral(m, clip, t, 0.5)

        # The hinge vanishes below its kink, so integrating the smooth part
        # x1 - t over the clipped region {x1 >= t} gives the same number
        # without asking the quadrature to resolve the kink.
        smooth_part = clip.intersect(A.HalfPlane((1, 0), "ge", t))

        def shifted(x1, x2):
            return np.asarray(x1, float) - t

        direct = A.integrate_against(m, smooth_part, shifted).total
        assert tail == pytest.approx(-direct, abs=1e-8)


class TestIntegrationByParts:
    @pytest.mark.parametrize("k", [0.0, 0.5, 1.5])
    def test_polynomial_test_function(self, k):
        d = A.uniform_density(BOX)

        def u(x1, x2):
            x1 = np.asarray(x1, float); x2 = np.asarray(x2, float)
            return 0.3 * x1 * x1 - 0.7 * x1 * x2 + 0.1 * x2

        def grad_u(x1, x2):
            x1 = np.asarray(x1, float); x2 = np.asarray(x2, float)
            return (0.6 * x1 - 0.7 * x2, -0.7 * x1 + 0.1 + 0.0 * x2)

        assert A.ibp_residual(d, A.constant_payment(k), u, grad_u) < 1e-8

    def test_loglinear_density(self):
        d = A.loglinear_density(SQUARE, 0.8, -0.6)

        def u(x1, x2):
            return np.asarray(x1, float) * 2.0 + np.asarray(x2, float) ** 2

        def grad_u(x1, x2):
            return (2.0 + 0.0 * np.asarray(x1, float),
                    2.0 * np.asarray(x2, float))

        assert A.ibp_residual(d, A.constant_payment(0.3), u, grad_u) < 1e-7


class TestRegionMasses:
    def test_diagonal_clip_mass(self):
        # Z region of the bundle price splits the square along x1 + x2 = p;
        # its mass plus the complement's mass must telescope to zero.
        m = A.build_measure(A.uniform_density(SQUARE), A.constant_payment(1.0))
        mech = A.single_bundle(SQUARE, -0.2)
        regions = mech.regions()
        mz = A.mu_of_region(m, regions["Z"]).total
        my = A.mu_of_region(m, regions["Y"]).total
        assert mz + my == pytest.approx(0.0, abs=1e-8)

    @given(x1=st.floats(0.05, 0.95), x2=st.floats(-0.95, -0.05))
    @settings(max_examples=20, deadline=None)
    def test_square_orthant_closed_form(self, x1, x2):
        m = A.build_measure(A.uniform_density(SQUARE), A.constant_payment(0.0))
        from adscreen.domain import lower_right_orthant
        r = Region.full(SQUARE).intersect(*lower_right_orthant(SQUARE, x1, x2))
        got = A.mu_of_region(m, r).total
        assert got == pytest.approx(2 * x1 - 2 * x2 + 3 * x1 * x2 - 1, abs=1e-8)
