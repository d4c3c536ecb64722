"""Type spaces, density families, payment schedules, regions, and menus."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .quadrature import DEFAULT_SPEC, QuadratureSpec, Trapezoid, integrate_trapezoid

_EPS = 1e-12


class DomainError(ValueError):
    """A point, price, or parameter violates its domain contract."""


@dataclass(frozen=True)
class TypeSpace:
    """Rectangle [x1_lo, x1_hi] x [x2_lo, x2_hi] with x1 >= 0 and x2 <= 0."""

    x1_lo: float
    x1_hi: float
    x2_lo: float
    x2_hi: float

    def __post_init__(self):
        if not (0 <= self.x1_lo < self.x1_hi):
            raise DomainError("need 0 <= x1_lo < x1_hi")
        if not (self.x2_lo < self.x2_hi <= 0):
            raise DomainError("need x2_lo < x2_hi <= 0")

    def corner(self) -> tuple[float, float]:
        """Lowest type, the point carrying the unit atom."""
        return (self.x1_lo, self.x2_lo)

    @property
    def area(self) -> float:
        return (self.x1_hi - self.x1_lo) * (self.x2_hi - self.x2_lo)

    def contains(self, x1: float, x2: float, tol: float = 0.0) -> bool:
        return (self.x1_lo - tol <= x1 <= self.x1_hi + tol
                and self.x2_lo - tol <= x2 <= self.x2_hi + tol)

    def grid(self, n1: int, n2: int):
        """Cell-center grid as two flat arrays."""
        e1 = np.linspace(self.x1_lo, self.x1_hi, n1 + 1)
        e2 = np.linspace(self.x2_lo, self.x2_hi, n2 + 1)
        c1 = 0.5 * (e1[:-1] + e1[1:])
        c2 = 0.5 * (e2[:-1] + e2[1:])
        g1, g2 = np.meshgrid(c1, c2, indexing="ij")
        return g1.ravel(), g2.ravel()


# ---------------------------------------------------------------------------
# density families


@dataclass(frozen=True)
class DensityModel:
    """Density over a TypeSpace with analytic gradient.

    kind is one of "uniform", "loglinear", "product_polynomial".  The
    normalization constant is always recomputed from the parameters; input
    values are never trusted.
    """

    kind: str
    space: TypeSpace
    a: float = 0.0                       # loglinear decay rate in x1
    b: float = 0.0                       # loglinear growth rate in x2
    coeffs1: tuple = ()                  # product_polynomial factors
    coeffs2: tuple = ()
    norm_const: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "norm_const", 1.0 / self._raw_mass())
        self._check_positive()

    def _raw_mass(self) -> float:
        s = self.space
        if self.kind == "uniform":
            return s.area
        if self.kind == "loglinear":
            return _exp_integral(-self.a, s.x1_lo, s.x1_hi) * \
                _exp_integral(self.b, s.x2_lo, s.x2_hi)
        if self.kind == "product_polynomial":
            p1 = np.polynomial.Polynomial(self.coeffs1).integ()
            p2 = np.polynomial.Polynomial(self.coeffs2).integ()
            return (p1(s.x1_hi) - p1(s.x1_lo)) * (p2(s.x2_hi) - p2(s.x2_lo))
        raise DomainError(f"unknown density kind {self.kind!r}")

    def _check_positive(self, n: int = 60):
        g1, g2 = self.space.grid(n, n)
        if np.min(self.f(g1, g2)) <= 0:
            raise DomainError("density is not strictly positive on the space")

    def f(self, x1, x2):
        x1 = np.asarray(x1, dtype=float)
        x2 = np.asarray(x2, dtype=float)
        c = self.norm_const
        if self.kind == "uniform":
            return np.broadcast_to(c, np.broadcast(x1, x2).shape).copy()
        if self.kind == "loglinear":
            return c * np.exp(-self.a * x1 + self.b * x2)
        p1 = np.polynomial.Polynomial(self.coeffs1)
        p2 = np.polynomial.Polynomial(self.coeffs2)
        return c * p1(x1) * p2(x2)

    def grad(self, x1, x2):
        """Analytic (d f/d x1, d f/d x2)."""
        x1 = np.asarray(x1, dtype=float)
        x2 = np.asarray(x2, dtype=float)
        if self.kind == "uniform":
            z = np.zeros(np.broadcast(x1, x2).shape)
            return z, z.copy()
        if self.kind == "loglinear":
            v = self.f(x1, x2)
            return -self.a * v, self.b * v
        p1 = np.polynomial.Polynomial(self.coeffs1)
        p2 = np.polynomial.Polynomial(self.coeffs2)
        c = self.norm_const
        return c * p1.deriv()(x1) * p2(x2), c * p1(x1) * p2.deriv()(x2)

    def uniform_in_x2(self) -> bool:
        if self.kind == "uniform":
            return True
        if self.kind == "loglinear":
            return self.b == 0.0
        return len([c for c in self.coeffs2[1:] if c != 0.0]) == 0


def _exp_integral(rate: float, lo: float, hi: float) -> float:
    """Integral of exp(rate * t) over [lo, hi].

    Written as exp(rate*lo) * expm1(rate*(hi-lo)) / rate with a series
    fallback so tiny rates stay accurate instead of underflowing to 0/rate.
    """
    span = hi - lo
    z = rate * span
    if abs(z) < 1e-12:
        return span * math.exp(rate * lo) * (1.0 + 0.5 * z)
    return math.exp(rate * lo) * math.expm1(z) / rate


def uniform_density(space: TypeSpace) -> DensityModel:
    return DensityModel("uniform", space)


def loglinear_density(space: TypeSpace, a: float, b: float) -> DensityModel:
    return DensityModel("loglinear", space, a=a, b=b)


def product_polynomial_density(space: TypeSpace, coeffs1, coeffs2) -> DensityModel:
    return DensityModel("product_polynomial", space,
                        coeffs1=tuple(coeffs1), coeffs2=tuple(coeffs2))


def density_eval(d: DensityModel, x: tuple[float, float]):
    """Value and analytic gradient at a single point of the closed space."""
    x1, x2 = x
    if not d.space.contains(x1, x2):
        raise DomainError(f"point {x} outside the type space")
    g1, g2 = d.grad(x1, x2)
    return float(d.f(x1, x2)), (float(g1), float(g2))


# ---------------------------------------------------------------------------
# third-party payment schedules


@dataclass(frozen=True)
class AdPaymentSchedule:
    """kappa(x) paid to the seller when the bad is allocated.

    Constant schedules carry k; general schedules carry the value function
    and its analytic partial derivative in x2.
    """

    kind: str                               # "constant" | "general"
    k: float = 0.0
    value_fn: Optional[Callable] = None
    d2_fn: Optional[Callable] = None

    def __post_init__(self):
        if self.kind == "constant":
            if self.k < 0:
                raise DomainError("constant payment must be nonnegative")
        elif self.kind == "general":
            if self.value_fn is None or self.d2_fn is None:
                raise DomainError("general schedule needs value and d2 functions")
        else:
            raise DomainError(f"unknown payment kind {self.kind!r}")

    @property
    def is_constant(self) -> bool:
        return self.kind == "constant"

    def value(self, x1, x2):
        if self.is_constant:
            return np.broadcast_to(float(self.k), np.broadcast(
                np.asarray(x1), np.asarray(x2)).shape).copy()
        return np.asarray(self.value_fn(np.asarray(x1, dtype=float),
                                        np.asarray(x2, dtype=float)), dtype=float)

    def d2(self, x1, x2):
        if self.is_constant:
            return np.zeros(np.broadcast(np.asarray(x1), np.asarray(x2)).shape)
        return np.asarray(self.d2_fn(np.asarray(x1, dtype=float),
                                     np.asarray(x2, dtype=float)), dtype=float)

    def check_bounded(self, space: TypeSpace, n: int = 60) -> float:
        g1, g2 = space.grid(n, n)
        v = self.value(g1, g2)
        if not np.all(np.isfinite(v)):
            raise DomainError("payment schedule unbounded on the space")
        return float(np.max(np.abs(v)))


def constant_payment(k: float) -> AdPaymentSchedule:
    return AdPaymentSchedule("constant", k=k)


def general_payment(value_fn, d2_fn) -> AdPaymentSchedule:
    return AdPaymentSchedule("general", value_fn=value_fn, d2_fn=d2_fn)


# ---------------------------------------------------------------------------
# regions


@dataclass(frozen=True)
class HalfPlane:
    """normal . x  (<=|>=)  bound, with normal in {(1,0),(0,1),(1,1)}."""

    normal: tuple[int, int]
    sense: str                   # "le" | "ge"
    bound: float
    included: bool = True

    def __post_init__(self):
        if self.normal not in ((1, 0), (0, 1), (1, 1)):
            raise DomainError(f"unsupported constraint normal {self.normal}")
        if self.sense not in ("le", "ge"):
            raise DomainError(f"unsupported sense {self.sense!r}")

    def satisfied(self, x1, x2, tol: float = 1e-12):
        v = self.normal[0] * np.asarray(x1, dtype=float) + \
            self.normal[1] * np.asarray(x2, dtype=float)
        if self.sense == "le":
            return v <= self.bound + tol if self.included else v < self.bound - tol
        return v >= self.bound - tol if self.included else v > self.bound + tol


@dataclass(frozen=True)
class Region:
    """Rectangle intersected with axis-aligned / diagonal half-planes."""

    base: TypeSpace
    constraints: tuple[HalfPlane, ...] = ()

    @staticmethod
    def full(space: TypeSpace) -> "Region":
        return Region(space)

    def intersect(self, *extra: HalfPlane) -> "Region":
        """Add constraints, merging parallel ones of the same sense."""
        merged = {}
        for c in self.constraints + tuple(extra):
            key = (c.normal, c.sense)
            prev = merged.get(key)
            if prev is None:
                merged[key] = c
            else:
                if c.sense == "le":
                    tighter = c if c.bound < prev.bound - _EPS else prev
                    if abs(c.bound - prev.bound) <= _EPS:
                        tighter = HalfPlane(c.normal, c.sense, min(c.bound, prev.bound),
                                            c.included and prev.included)
                else:
                    tighter = c if c.bound > prev.bound + _EPS else prev
                    if abs(c.bound - prev.bound) <= _EPS:
                        tighter = HalfPlane(c.normal, c.sense, max(c.bound, prev.bound),
                                            c.included and prev.included)
                merged[key] = tighter
        return Region(self.base, tuple(merged.values()))

    # -- intervals after folding axis constraints into the base box ---------

    def _axis_interval(self, axis: int) -> tuple[float, float, bool, bool]:
        """(lo, hi, lo_included, hi_included) for the given coordinate."""
        if axis == 0:
            lo, hi = self.base.x1_lo, self.base.x1_hi
            normal = (1, 0)
        else:
            lo, hi = self.base.x2_lo, self.base.x2_hi
            normal = (0, 1)
        lo_inc = hi_inc = True
        for c in self.constraints:
            if c.normal != normal:
                continue
            if c.sense == "le" and c.bound < hi:
                hi, hi_inc = c.bound, c.included
            elif c.sense == "le" and abs(c.bound - hi) <= _EPS:
                hi_inc = hi_inc and c.included
            elif c.sense == "ge" and c.bound > lo:
                lo, lo_inc = c.bound, c.included
            elif c.sense == "ge" and abs(c.bound - lo) <= _EPS:
                lo_inc = lo_inc and c.included
        return lo, hi, lo_inc, hi_inc

    def _diagonals(self, sense: str) -> list[HalfPlane]:
        return [c for c in self.constraints if c.normal == (1, 1) and c.sense == sense]

    def membership(self, x1, x2, tol: float = 1e-12):
        """Vectorized membership respecting boundary-inclusion flags."""
        ok = (np.asarray(x1, dtype=float) >= self.base.x1_lo - tol) \
            & (np.asarray(x1, dtype=float) <= self.base.x1_hi + tol) \
            & (np.asarray(x2, dtype=float) >= self.base.x2_lo - tol) \
            & (np.asarray(x2, dtype=float) <= self.base.x2_hi + tol)
        for c in self.constraints:
            ok = ok & c.satisfied(x1, x2, tol)
        return ok

    def contains(self, x1: float, x2: float, tol: float = 1e-12) -> bool:
        return bool(self.membership(x1, x2, tol))

    def decompose(self) -> list[Trapezoid]:
        """Exact cover by generalized trapezoids with affine x2 bounds."""
        a, b, _, _ = self._axis_interval(0)
        c, d, _, _ = self._axis_interval(1)
        if b <= a + _EPS or d <= c + _EPS:
            return []
        les = [hp.bound for hp in self._diagonals("le")]
        ges = [hp.bound for hp in self._diagonals("ge")]
        breaks = {a, b}
        for p in les + ges:
            for y in (c, d):
                t = p - y
                if a < t < b:
                    breaks.add(t)
        pts = sorted(breaks)
        traps = []
        for lo, hi in zip(pts[:-1], pts[1:]):
            if hi - lo <= _EPS:
                continue
            m = 0.5 * (lo + hi)
            # active affine pieces at the midpoint
            up = (d, 0.0)
            for p in les:
                if p - m < up[0] + up[1] * m:
                    up = (p, -1.0)
            dn = (c, 0.0)
            for p in ges:
                if p - m > dn[0] + dn[1] * m:
                    dn = (p, -1.0)
            if up[0] + up[1] * m > dn[0] + dn[1] * m + _EPS:
                traps.append(Trapezoid(lo, hi, dn[0], dn[1], up[0], up[1]))
        return traps

    @property
    def area(self) -> float:
        return sum(t.area for t in self.decompose())

    def is_empty(self, tol: float = 1e-12) -> bool:
        return self.feasible_point() is None

    def feasible_point(self) -> Optional[tuple[float, float]]:
        """A certified interior-ish point, or None when the region is empty."""
        traps = self.decompose()
        if traps:
            t = max(traps, key=lambda t: t.area)
            m = 0.5 * (t.a + t.b)
            return (m, 0.5 * (t.lower(m) + t.upper(m)))
        # degenerate (zero-area) regions: probe a fine grid of the base box
        g1, g2 = self.base.grid(41, 41)
        for e1 in (self.base.x1_lo, self.base.x1_hi):
            g1 = np.append(g1, np.full(41, e1))
            g2 = np.append(g2, np.linspace(self.base.x2_lo, self.base.x2_hi, 41))
        mask = self.membership(g1, g2)
        idx = np.flatnonzero(mask)
        if idx.size:
            i = idx[0]
            return (float(g1[i]), float(g2[i]))
        return None

    # -- 1-D traces on the rectangle edges -----------------------------------

    def edge_interval(self, edge: str) -> Optional[tuple[float, float]]:
        """Intersection with one edge of the base rectangle.

        Returns the parameter interval (x1 for bottom/top, x2 for left/right)
        or None when the trace has zero length.  A constraint whose boundary
        coincides with the whole edge excludes it when boundary_included is
        False.
        """
        s = self.base
        lo1, hi1, lo1i, hi1i = self._axis_interval(0)
        lo2, hi2, lo2i, hi2i = self._axis_interval(1)
        if edge in ("bottom", "top"):
            level = s.x2_lo if edge == "bottom" else s.x2_hi
            if level < lo2 - _EPS or level > hi2 + _EPS:
                return None
            if abs(level - lo2) <= _EPS and not lo2i:
                return None
            if abs(level - hi2) <= _EPS and not hi2i:
                return None
            a, b = lo1, hi1
            for hp in self._diagonals("le"):
                b = min(b, hp.bound - level)
            for hp in self._diagonals("ge"):
                a = max(a, hp.bound - level)
            return (a, b) if b > a + _EPS else None
        if edge in ("left", "right"):
            level = s.x1_lo if edge == "left" else s.x1_hi
            if level < lo1 - _EPS or level > hi1 + _EPS:
                return None
            if abs(level - lo1) <= _EPS and not lo1i:
                return None
            if abs(level - hi1) <= _EPS and not hi1i:
                return None
            a, b = lo2, hi2
            for hp in self._diagonals("le"):
                b = min(b, hp.bound - level)
            for hp in self._diagonals("ge"):
                a = max(a, hp.bound - level)
            return (a, b) if b > a + _EPS else None
        raise DomainError(f"unknown edge {edge!r}")

    def contains_corner(self) -> bool:
        """Atom membership: the lowest type, judged by the inclusion flags."""
        return self.contains(*self.base.corner())


def region_membership(r: Region, x: tuple[float, float]) -> bool:
    return r.contains(*x)


def lower_right_orthant(space: TypeSpace, x1: float, x2: float) -> tuple[HalfPlane, HalfPlane]:
    """Constraints for [x1, x1_hi] x [x2_lo, x2]."""
    return (HalfPlane((1, 0), "ge", x1), HalfPlane((0, 1), "le", x2))


def upper_right_orthant(space: TypeSpace, x1: float, x2: float) -> tuple[HalfPlane, HalfPlane]:
    """Constraints for [x1, x1_hi] x [x2, x2_hi]."""
    return (HalfPlane((1, 0), "ge", x1), HalfPlane((0, 1), "ge", x2))


# ---------------------------------------------------------------------------
# menus and mechanisms


@dataclass(frozen=True)
class MenuItem:
    q1: float
    q2: float
    price: float

    def __post_init__(self):
        if not (0 <= self.q1 <= 1 and 0 <= self.q2 <= 1):
            raise DomainError("allocations must lie in [0,1]")

    def utility(self, x1, x2):
        return self.q1 * np.asarray(x1, dtype=float) \
            + self.q2 * np.asarray(x2, dtype=float) - self.price


DEFAULT_ITEM = MenuItem(0.0, 0.0, 0.0)


@dataclass(frozen=True)
class Mechanism:
    """A finite menu; the zero default item is always present."""

    items: tuple[MenuItem, ...]

    def __post_init__(self):
        if DEFAULT_ITEM not in self.items:
            raise DomainError("menu must contain the default item ((0,0), 0)")


def menu(*items: MenuItem, ensure_default: bool = True) -> Mechanism:
    out = list(items)
    if ensure_default and DEFAULT_ITEM not in out:
        out.append(DEFAULT_ITEM)
    return Mechanism(tuple(out))


def monotonicity_signature(q1: float, q2: float) -> tuple[int, int]:
    """Admissible test-function directions for an allocation."""
    def sig(a):
        if a == 0.0:
            return 1
        if a == 1.0:
            return -1
        return 0
    return (sig(q1), sig(q2))


@dataclass(frozen=True)
class CanonicalMechanism:
    """Good-Only, Single-Bundle, or Ad-Tiered posted-price menu."""

    kind: str                    # "good_only" | "single_bundle" | "ad_tiered"
    space: TypeSpace
    p_g: Optional[float] = None
    p_sb: Optional[float] = None

    def __post_init__(self):
        s = self.space
        if self.kind == "good_only":
            if self.p_g is None or not (s.x1_lo <= self.p_g <= s.x1_hi):
                raise DomainError("good-only price must lie in [x1_lo, x1_hi]")
        elif self.kind == "single_bundle":
            if self.p_sb is None:
                raise DomainError("single-bundle mechanism needs p_sb")
        elif self.kind == "ad_tiered":
            if self.p_g is None or self.p_sb is None:
                raise DomainError("ad-tiered mechanism needs p_g and p_sb")
            if not (s.x1_lo <= self.p_g <= s.x1_hi):
                raise DomainError("ad-tiered p_g must lie in [x1_lo, x1_hi]")
            if self.p_sb > min(self.p_g, s.x1_lo + s.x2_hi) + _EPS:
                raise DomainError(
                    "ad-tiered variant requires p_sb <= min(p_g, x1_lo + x2_hi)")
        else:
            raise DomainError(f"unknown canonical kind {self.kind!r}")

    def menu(self) -> Mechanism:
        items = [DEFAULT_ITEM]
        if self.kind in ("good_only", "ad_tiered"):
            items.append(MenuItem(1.0, 0.0, self.p_g))
        if self.kind in ("single_bundle", "ad_tiered"):
            items.append(MenuItem(1.0, 1.0, self.p_sb))
        return Mechanism(tuple(items))

    def regions(self) -> dict[str, Region]:
        """Exact Z/W/Y partition with the definitions' boundary conventions.

        Z is the default region; W buys the good alone at p_g; Y buys the
        bundle at p_sb.  Weak inequalities send boundary types to Z.
        """
        full = Region.full(self.space)
        if self.kind == "good_only":
            return {
                "Z": full.intersect(HalfPlane((1, 0), "le", self.p_g, True)),
                "W": full.intersect(HalfPlane((1, 0), "ge", self.p_g, False)),
            }
        if self.kind == "single_bundle":
            return {
                "Z": full.intersect(HalfPlane((1, 1), "le", self.p_sb, True)),
                "Y": full.intersect(HalfPlane((1, 1), "ge", self.p_sb, False)),
            }
        step = self.p_sb - self.p_g
        return {
            "Z": full.intersect(HalfPlane((1, 0), "le", self.p_g, True),
                                HalfPlane((1, 1), "le", self.p_sb, True)),
            "W": full.intersect(HalfPlane((1, 0), "ge", self.p_g, False),
                                HalfPlane((0, 1), "le", step, True)),
            "Y": full.intersect(HalfPlane((1, 1), "ge", self.p_sb, False),
                                HalfPlane((0, 1), "ge", step, False)),
        }

    def region_items(self) -> dict[str, MenuItem]:
        out = {"Z": DEFAULT_ITEM}
        if self.kind in ("good_only", "ad_tiered"):
            out["W"] = MenuItem(1.0, 0.0, self.p_g)
        if self.kind in ("single_bundle", "ad_tiered"):
            out["Y"] = MenuItem(1.0, 1.0, self.p_sb)
        return out


def good_only(space: TypeSpace, p_g: float) -> CanonicalMechanism:
    return CanonicalMechanism("good_only", space, p_g=p_g)


def single_bundle(space: TypeSpace, p_sb: float) -> CanonicalMechanism:
    return CanonicalMechanism("single_bundle", space, p_sb=p_sb)


def ad_tiered(space: TypeSpace, p_g: float, p_sb: float) -> CanonicalMechanism:
    return CanonicalMechanism("ad_tiered", space, p_g=p_g, p_sb=p_sb)


# ---------------------------------------------------------------------------
# discrete instances


@dataclass(frozen=True)
class DiscreteInstance:
    """Finitely many types with positive probabilities summing to one."""

    points: tuple[tuple[tuple[float, float], float], ...]

    def __post_init__(self):
        w = np.array([p for _, p in self.points])
        if np.any(w <= 0):
            raise DomainError("probabilities must be positive")
        if abs(float(w.sum()) - 1.0) > 1e-12:
            raise DomainError("probabilities must sum to one")
        if any(x2 > 0 for (_, x2), _ in self.points):
            raise DomainError("bad-valuations must be nonpositive")

    @property
    def n(self) -> int:
        return len(self.points)

    def xs(self):
        return np.array([x for x, _ in self.points])

    def weights(self):
        return np.array([w for _, w in self.points])


def discretize(d: DensityModel, n1: int, n2: int,
               spec: QuadratureSpec = DEFAULT_SPEC) -> DiscreteInstance:
    """Cell-center grid with exact cell masses, renormalized to sum one."""
    if n1 < 2 or n2 < 2:
        raise DomainError("discretization needs n1, n2 >= 2")
    s = d.space
    e1 = np.linspace(s.x1_lo, s.x1_hi, n1 + 1)
    e2 = np.linspace(s.x2_lo, s.x2_hi, n2 + 1)
    pts = []
    masses = []
    for i in range(n1):
        for j in range(n2):
            trap = Trapezoid(e1[i], e1[i + 1], e2[j], 0.0, e2[j + 1], 0.0)
            m = integrate_trapezoid(d.f, trap, spec, label=f"cell ({i},{j})")
            pts.append((0.5 * (e1[i] + e1[i + 1]), 0.5 * (e2[j] + e2[j + 1])))
            masses.append(m)
    masses = np.array(masses)
    masses /= masses.sum()
    return DiscreteInstance(tuple(((x1, x2), float(w))
                                  for (x1, x2), w in zip(pts, masses)))
