"""The transformed signed measure: atom + edge line densities + interior density.

For a density f, payment schedule kappa, and space X the measure is

    mu(A) = [corner in A]
            + int_{dX & A} f(x) ((x + (0, kappa(x))) . n_hat) ds
            - int_{X & A} (grad f(x) . (x + (0, kappa(x))) + (3 + d2 kappa(x)) f(x)) dx

so expected revenue of any IC/IR mechanism equals the integral of its
indirect utility against mu.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .domain import (AdPaymentSchedule, DensityModel, DomainError, HalfPlane,
                     Region, TypeSpace)
from .quadrature import (DEFAULT_SPEC, QuadratureSpec, integrate_1d,
                         integrate_trapezoid)

EDGES = ("bottom", "top", "left", "right")


@dataclass(frozen=True)
class MassBreakdown:
    atom: float
    edges: dict
    interior: float

    @property
    def total(self) -> float:
        return self.atom + sum(self.edges.values()) + self.interior


@dataclass(frozen=True)
class MeasureDecomposition:
    """mu split into its atom, four edge densities, and interior density."""

    density: DensityModel
    payment: AdPaymentSchedule
    atom_weight: float = 1.0

    @property
    def space(self) -> TypeSpace:
        return self.density.space

    # edge densities as functions of the running coordinate ---------------

    def edge_density(self, edge: str) -> Callable:
        s = self.space
        d = self.density
        kap = self.payment.value
        if edge == "bottom":
            return lambda x1: -(s.x2_lo + kap(x1, np.full_like(np.asarray(x1, float), s.x2_lo))) \
                * d.f(x1, np.full_like(np.asarray(x1, float), s.x2_lo))
        if edge == "top":
            return lambda x1: (s.x2_hi + kap(x1, np.full_like(np.asarray(x1, float), s.x2_hi))) \
                * d.f(x1, np.full_like(np.asarray(x1, float), s.x2_hi))
        if edge == "left":
            return lambda x2: -s.x1_lo * d.f(np.full_like(np.asarray(x2, float), s.x1_lo), x2)
        if edge == "right":
            return lambda x2: s.x1_hi * d.f(np.full_like(np.asarray(x2, float), s.x1_hi), x2)
        raise DomainError(f"unknown edge {edge!r}")

    def interior_density(self, x1, x2):
        g1, g2 = self.density.grad(x1, x2)
        kap = self.payment.value(x1, x2)
        dk2 = self.payment.d2(x1, x2)
        f = self.density.f(x1, x2)
        x1 = np.asarray(x1, dtype=float)
        x2 = np.asarray(x2, dtype=float)
        return -(g1 * x1 + g2 * (x2 + kap) + (3.0 + dk2) * f)

    # closed-form constants for the uniform/constant-k case ---------------

    def edge_constant(self, edge: str) -> Optional[float]:
        if self.density.kind != "uniform" or not self.payment.is_constant:
            return None
        s = self.space
        f = self.density.norm_const
        k = self.payment.k
        return {
            "bottom": -(s.x2_lo + k) * f,
            "top": (s.x2_hi + k) * f,
            "left": -s.x1_lo * f,
            "right": s.x1_hi * f,
        }[edge]

    def interior_constant(self) -> Optional[float]:
        if self.density.kind != "uniform" or not self.payment.is_constant:
            return None
        return -3.0 * self.density.norm_const


def build_measure(d: DensityModel, kappa: AdPaymentSchedule) -> MeasureDecomposition:
    kappa.check_bounded(d.space)
    return MeasureDecomposition(d, kappa)


def _edge_levels(space: TypeSpace) -> dict:
    return {"bottom": space.x2_lo, "top": space.x2_hi,
            "left": space.x1_lo, "right": space.x1_hi}


def integrate_against(m: MeasureDecomposition, r: Region, u: Callable,
                      q: QuadratureSpec = DEFAULT_SPEC) -> MassBreakdown:
    """Componentwise integral of u(x1, x2) against mu restricted to r."""
    s = m.space
    corner = s.corner()
    atom = m.atom_weight * float(u(*corner)) if r.contains_corner() else 0.0
    edges = {}
    for edge in EDGES:
        iv = r.edge_interval(edge)
        if iv is None:
            edges[edge] = 0.0
            continue
        dens = m.edge_density(edge)
        if edge in ("bottom", "top"):
            level = _edge_levels(s)[edge]
            g = lambda t: dens(t) * np.asarray(
                u(t, np.full_like(np.asarray(t, float), level)), dtype=float)
        else:
            level = _edge_levels(s)[edge]
            g = lambda t: dens(t) * np.asarray(
                u(np.full_like(np.asarray(t, float), level), t), dtype=float)
        edges[edge] = integrate_1d(g, iv[0], iv[1], q, label=f"{edge} edge")
    interior = 0.0
    for i, trap in enumerate(r.decompose()):
        interior += integrate_trapezoid(
            lambda x1, x2: m.interior_density(x1, x2) * np.asarray(u(x1, x2), dtype=float),
            trap, q, label=f"interior trapezoid {i}")
    return MassBreakdown(atom, edges, interior)


def mu_of_region(m: MeasureDecomposition, r: Region,
                 q: QuadratureSpec = DEFAULT_SPEC) -> MassBreakdown:
    """Signed mu-mass of a region with its per-component breakdown."""
    return integrate_against(m, r, lambda x1, x2: np.ones(np.broadcast(
        np.asarray(x1), np.asarray(x2)).shape), q)


def mu_total(m: MeasureDecomposition, q: QuadratureSpec = DEFAULT_SPEC) -> float:
    """mu(X); vanishes for any normalized density (checked in tests)."""
    return mu_of_region(m, Region.full(m.space), q).total


def slab(space: TypeSpace, x1: float) -> Region:
    """Vertical slab [x1_lo, x1] x [x2_lo, x2_hi]."""
    return Region.full(space).intersect(HalfPlane((1, 0), "le", x1, True))


def marginal_M(m: MeasureDecomposition, region_clip: Optional[Region],
               x1: float, q: QuadratureSpec = DEFAULT_SPEC) -> float:
    """Cumulative x1-marginal M(x1) = mu([x1_lo, x1] x [x2_lo, x2_hi] & clip)."""
    s = m.space
    if not (s.x1_lo - 1e-12 <= x1 <= s.x1_hi + 1e-12):
        raise DomainError("marginal evaluated outside [x1_lo, x1_hi]")
    r = slab(s, x1)
    if region_clip is not None:
        r = r.intersect(*region_clip.constraints)
    return mu_of_region(m, r, q).total


def hinge_tail_integral(m: MeasureDecomposition, clip: Optional[Region],
                        t: float, p: float,
                        q: QuadratureSpec = DEFAULT_SPEC) -> float:
    """Tail integral of the marginal, int_t^p M(z) dz."""
    s = m.space
    if not (s.x1_lo - 1e-12 <= t <= p <= s.x1_hi + 1e-12):
        raise DomainError("need x1_lo <= t <= p <= x1_hi")
    if p - t <= 1e-14:
        return 0.0
    # M is smooth between the clip's breakpoints but kinked at them; a modest
    # fixed tolerance keeps each outer evaluation cheap.
    outer_spec = QuadratureSpec(q.gauss_order, q.max_subdivisions,
                                max(q.abs_tol, 1e-9), 1e-9)

    def M_vec(z):
        z = np.atleast_1d(np.asarray(z, dtype=float))
        return np.array([marginal_M(m, clip, float(zi), q) for zi in z])

    return integrate_1d(M_vec, t, p, outer_spec, label="hinge tail")


def ibp_residual(d: DensityModel, kappa: AdPaymentSchedule,
                 u: Callable, grad_u: Callable,
                 q: QuadratureSpec = DEFAULT_SPEC) -> float:
    """| int u dmu  -  int [(x + v_kappa) . grad u - (u - u(corner))] f dx |.

    Both sides are computed by independent quadrature; u must be C^1 (kinked
    test functions are rejected by contract and must be pre-smoothed).
    """
    m = build_measure(d, kappa)
    s = d.space
    lhs = integrate_against(m, Region.full(s), u, q).total
    u0 = float(u(*s.corner()))

    def rhs_integrand(x1, x2):
        du1, du2 = grad_u(x1, x2)
        kap = kappa.value(x1, x2)
        x1 = np.asarray(x1, dtype=float)
        x2 = np.asarray(x2, dtype=float)
        return (x1 * du1 + (x2 + kap) * du2
                - (np.asarray(u(x1, x2), dtype=float) - u0)) * d.f(x1, x2)

    rhs = sum(integrate_trapezoid(rhs_integrand, trap, q)
              for trap in Region.full(s).decompose())
    return abs(lhs - rhs)
