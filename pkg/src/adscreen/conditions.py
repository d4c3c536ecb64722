"""Necessary and sufficient optimality batteries for the canonical menus."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import optimize

from .domain import (AdPaymentSchedule, CanonicalMechanism, DensityModel,
                     DomainError, HalfPlane, Region, TypeSpace, ad_tiered,
                     good_only, monotonicity_signature, single_bundle)
from .measure import (MeasureDecomposition, build_measure, hinge_tail_integral,
                      integrate_against, mu_of_region)
from .quadrature import DEFAULT_SPEC, SHARP_SPEC, QuadratureSpec

MASS_TOL = 1e-6          # numeric zero for mu(region) = 0
SIGN_TOL = 1e-6          # slack tolerance for ">= 0" grid minima
BOUNDARY_TOL = 1e-9      # equality band for scalar price / payment bounds
MM_TOL = 1e-10
PROBE_TOL = 1e-7

PASS, FAIL, BOUNDARY = "pass", "fail", "boundary"


@dataclass(frozen=True)
class ConditionItem:
    condition_id: str
    status: str
    witness: object
    detail: str


@dataclass(frozen=True)
class ConditionReport:
    mechanism: CanonicalMechanism
    items: tuple[ConditionItem, ...]
    verdict: str

    def item(self, condition_id: str) -> ConditionItem:
        for it in self.items:
            if it.condition_id == condition_id:
                return it
        raise KeyError(condition_id)

    def to_dict(self) -> dict:
        mech = {"kind": self.mechanism.kind}
        if self.mechanism.p_g is not None:
            mech["p_g"] = self.mechanism.p_g
        if self.mechanism.p_sb is not None:
            mech["p_sb"] = self.mechanism.p_sb
        return {
            "mechanism": mech,
            "items": [{"id": it.condition_id, "status": it.status,
                       "witness": it.witness, "detail": it.detail}
                      for it in self.items],
            "verdict": self.verdict,
        }


def _verdict(items, necessary_ids) -> str:
    failed = {it.condition_id for it in items if it.status == FAIL}
    if failed & set(necessary_ids):
        return "necessary_failed"
    if failed:
        return "necessary_passed_only"
    return "sufficient_passed"


def _ineq_item(cid, margin, detail) -> ConditionItem:
    """Weak inequality margin >= 0 with a boundary band at equality."""
    if margin < -BOUNDARY_TOL:
        return ConditionItem(cid, FAIL, margin, detail)
    if margin <= BOUNDARY_TOL:
        return ConditionItem(cid, BOUNDARY, margin, detail)
    return ConditionItem(cid, PASS, margin, detail)


def _mass_item(cid, masses: dict, detail) -> ConditionItem:
    worst = max(masses, key=lambda k: abs(masses[k]))
    status = PASS if all(abs(v) <= MASS_TOL for v in masses.values()) else FAIL
    return ConditionItem(cid, status, masses[worst],
                         f"{detail}; worst |mu({worst})| = {abs(masses[worst]):.3g}")


# ---------------------------------------------------------------------------
# MM condition


@dataclass(frozen=True)
class MMReport:
    min_value: float
    argmin: tuple[float, float]
    passed: bool
    closed_form: Optional[float] = None


def _mm_expression(d: DensityModel, kappa: AdPaymentSchedule):
    k_const = kappa.k if kappa.is_constant else None

    def expr(x1, x2):
        g1, g2 = d.grad(x1, x2)
        kap = kappa.value(x1, x2)
        return g1 * np.asarray(x1, float) + g2 * (np.asarray(x2, float) + kap) \
            + 3.0 * d.f(x1, x2)

    return expr, k_const


def check_mm(d: DensityModel, kappa: AdPaymentSchedule,
             grid: tuple[int, int] = (48, 48)) -> MMReport:
    """Minimize grad f . (x + v_kappa) + 3 f over X (grid + local descent)."""
    expr, k = _mm_expression(d, kappa)
    s = d.space
    g1, g2 = s.grid(*grid)
    # include the boundary: the minimum of a linear-times-density expression
    # often sits on a corner
    corners1 = np.array([s.x1_lo, s.x1_lo, s.x1_hi, s.x1_hi])
    corners2 = np.array([s.x2_lo, s.x2_hi, s.x2_lo, s.x2_hi])
    g1 = np.concatenate([g1, corners1])
    g2 = np.concatenate([g2, corners2])
    vals = expr(g1, g2)
    i = int(np.argmin(vals))
    res = optimize.minimize(lambda p: float(expr(p[0], p[1])),
                            x0=[g1[i], g2[i]], method="L-BFGS-B",
                            bounds=[(s.x1_lo, s.x1_hi), (s.x2_lo, s.x2_hi)])
    min_val = min(float(vals[i]), float(res.fun))
    argmin = (float(res.x[0]), float(res.x[1])) if res.fun <= vals[i] \
        else (float(g1[i]), float(g2[i]))

    closed = None
    if d.kind == "uniform" and kappa.is_constant:
        closed = 3.0 * d.norm_const
        min_val = closed
        argmin = s.corner()
    elif d.kind == "loglinear" and kappa.is_constant:
        closed = _mm_loglinear_closed_form(d, k)
    return MMReport(min_val, argmin, min_val >= -MM_TOL, closed)


def _mm_loglinear_closed_form(d: DensityModel, k: float) -> float:
    """Exact min of the MM expression: C e^{-(3+bk)} min h e^h over corners.

    h(x) = 3 + b k - a x1 + b x2 is linear, so its range is spanned at the
    corners; h e^h is unimodal with minimum at h = -1.
    """
    s = d.space
    hs = [3.0 + d.b * k - d.a * x1 + d.b * x2
          for x1 in (s.x1_lo, s.x1_hi) for x2 in (s.x2_lo, s.x2_hi)]
    h_lo, h_hi = min(hs), max(hs)
    if h_lo >= -1.0:
        phi = h_lo * np.exp(h_lo)
    elif h_hi <= -1.0:
        phi = h_hi * np.exp(h_hi)
    else:
        phi = -np.exp(-1.0)
    return float(d.norm_const * np.exp(-(3.0 + d.b * k)) * phi)


def mm_margin_loglinear(d: DensityModel, k: float) -> float:
    """Closed-form sign margin 3 - a*A - b*B + k*b with A = x1_hi and
    B = |x2_lo|; nonnegative implies the interior-mass inequality for the
    log-linear family."""
    s = d.space
    return 3.0 - d.a * s.x1_hi - d.b * abs(s.x2_lo) + k * d.b


# ---------------------------------------------------------------------------
# orthant minima


def _orthant_region(clip: Region, orientation: str, x1: float, x2: float) -> Region:
    if orientation == "lower_right":
        cons = (HalfPlane((1, 0), "ge", x1), HalfPlane((0, 1), "le", x2))
    elif orientation == "upper_right":
        cons = (HalfPlane((1, 0), "ge", x1), HalfPlane((0, 1), "ge", x2))
    else:
        raise DomainError(f"unknown orthant orientation {orientation!r}")
    return clip.intersect(*cons)


def orthant_min(m: MeasureDecomposition, clip: Region, orientation: str,
                q: QuadratureSpec = DEFAULT_SPEC,
                grid: tuple[int, int] = (48, 48)) -> tuple[float, tuple[float, float]]:
    """Minimum of mu(orthant(x) & clip) over an anchor grid, with one

    refinement pass (8x finer locally) around the coarse minimizer."""
    lo1, hi1, _, _ = clip._axis_interval(0)
    lo2, hi2, _, _ = clip._axis_interval(1)
    if hi1 <= lo1 or hi2 <= lo2:
        raise DomainError("orthant scan needs a nonempty clip region")

    def mass(x1, x2):
        return mu_of_region(m, _orthant_region(clip, orientation, x1, x2), q).total

    a1 = np.linspace(lo1, hi1, grid[0])
    a2 = np.linspace(lo2, hi2, grid[1])
    best = (np.inf, (a1[0], a2[0]))
    for x1 in a1:
        for x2 in a2:
            v = mass(float(x1), float(x2))
            if v < best[0]:
                best = (v, (float(x1), float(x2)))

    h1 = (hi1 - lo1) / (grid[0] - 1)
    h2 = (hi2 - lo2) / (grid[1] - 1)
    c1, c2 = best[1]
    f1 = np.linspace(max(lo1, c1 - h1), min(hi1, c1 + h1), 17)
    f2 = np.linspace(max(lo2, c2 - h2), min(hi2, c2 + h2), 17)
    for x1 in f1:
        for x2 in f2:
            v = mass(float(x1), float(x2))
            if v < best[0]:
                best = (v, (float(x1), float(x2)))
    return best


# ---------------------------------------------------------------------------
# hinge-tail scan


def hinge_tail_min(m: MeasureDecomposition, clip: Optional[Region], p: float,
                   q: QuadratureSpec = DEFAULT_SPEC,
                   n: int = 64) -> tuple[float, float]:
    """Minimum over t of int_t^p M(z) dz, coarse scan plus local refinement."""
    s = m.space
    ts = np.linspace(s.x1_lo, p, n)
    vals = [hinge_tail_integral(m, clip, float(t), p, q) for t in ts]
    i = int(np.argmin(vals))
    best = (vals[i], float(ts[i]))
    h = (p - s.x1_lo) / (n - 1)
    for t in np.linspace(max(s.x1_lo, ts[i] - h), min(p, ts[i] + h), 17):
        v = hinge_tail_integral(m, clip, float(t), p, q)
        if v < best[0]:
            best = (v, float(t))
    return best


# ---------------------------------------------------------------------------
# mechanism batteries


def check_good_only(d: DensityModel, kappa: AdPaymentSchedule, p_g: float,
                    q: QuadratureSpec = DEFAULT_SPEC) -> ConditionReport:
    if not kappa.is_constant:
        raise DomainError("the good-only battery needs a constant payment")
    mech = good_only(d.space, p_g)
    m = build_measure(d, kappa)
    regs = mech.regions()
    masses = {name: mu_of_region(m, r, q).total for name, r in regs.items()}
    items = [_mass_item("i", masses, "mu(Z) = mu(W) = 0")]
    items.append(_ineq_item("ii", abs(d.space.x2_hi) - kappa.k,
                            "k <= |x2_hi|"))
    tail_min, tail_arg = hinge_tail_min(m, None, p_g, q)
    items.append(ConditionItem(
        "iii", PASS if tail_min >= -SIGN_TOL else FAIL, (tail_min, tail_arg),
        "min_t int_t^p M >= 0"))
    mm = check_mm(d, kappa)
    items.append(ConditionItem("MM", PASS if mm.passed else FAIL,
                               (mm.min_value, mm.argmin), "MM regularity"))
    o_min, o_arg = orthant_min(m, regs["W"], "lower_right", q)
    items.append(ConditionItem(
        "iv", PASS if o_min >= -SIGN_TOL else FAIL, (o_min, o_arg),
        "lower-right orthant masses on W nonnegative"))
    return ConditionReport(mech, tuple(items),
                           _verdict(items, ("i", "ii", "iii")))


def check_single_bundle(d: DensityModel, kappa: AdPaymentSchedule, p_sb: float,
                        q: QuadratureSpec = DEFAULT_SPEC) -> ConditionReport:
    if not kappa.is_constant:
        raise DomainError("the single-bundle battery needs a constant payment")
    s = d.space
    mech = single_bundle(s, p_sb)
    m = build_measure(d, kappa)
    regs = mech.regions()
    masses = {name: mu_of_region(m, r, q).total for name, r in regs.items()}
    items = [_mass_item("i", masses, "mu(Z) = mu(Y) = 0")]
    k_margin = kappa.k - abs(s.x2_lo)
    price_margin = min(s.x1_hi + s.x2_lo, s.x1_lo + s.x2_hi) - p_sb
    items.append(_ineq_item("ii", min(k_margin, price_margin),
                            "k >= |x2_lo| and price bound"))
    mm = check_mm(d, kappa)
    items.append(ConditionItem("MM", PASS if mm.passed else FAIL,
                               (mm.min_value, mm.argmin), "MM regularity"))
    o_min, o_arg = orthant_min(m, regs["Y"], "upper_right", q)
    items.append(ConditionItem(
        "iii", PASS if o_min >= -SIGN_TOL else FAIL, (o_min, o_arg),
        "upper-right orthant masses on Y nonnegative"))
    return ConditionReport(mech, tuple(items), _verdict(items, ("i", "ii")))


def check_ad_tiered(d: DensityModel, kappa: AdPaymentSchedule,
                    p_g: float, p_sb: float,
                    q: QuadratureSpec = DEFAULT_SPEC) -> ConditionReport:
    if not kappa.is_constant:
        raise DomainError("the ad-tiered battery needs a constant payment")
    mech = ad_tiered(d.space, p_g, p_sb)      # enforces the price constraint
    m = build_measure(d, kappa)
    regs = mech.regions()
    masses = {name: mu_of_region(m, r, q).total for name, r in regs.items()}
    items = [_mass_item("i", masses, "mu(Z) = mu(W) = mu(Y) = 0")]
    tail_min, tail_arg = hinge_tail_min(m, regs["Z"], p_g, q)
    items.append(ConditionItem(
        "ii", PASS if tail_min >= -SIGN_TOL else FAIL, (tail_min, tail_arg),
        "min_t int_t^p M(. & Z) >= 0"))
    mm = check_mm(d, kappa)
    items.append(ConditionItem("MM", PASS if mm.passed else FAIL,
                               (mm.min_value, mm.argmin), "MM regularity"))
    w_min, w_arg = orthant_min(m, regs["W"], "lower_right", q)
    items.append(ConditionItem(
        "iii", PASS if w_min >= -SIGN_TOL else FAIL, (w_min, w_arg),
        "lower-right orthant masses on W nonnegative"))
    y_min, y_arg = orthant_min(m, regs["Y"], "upper_right", q)
    items.append(ConditionItem(
        "iv", PASS if y_min >= -SIGN_TOL else FAIL, (y_min, y_arg),
        "upper-right orthant masses on Y nonnegative"))
    return ConditionReport(mech, tuple(items), _verdict(items, ("i", "ii")))


def check_canonical(d: DensityModel, kappa: AdPaymentSchedule,
                    mech: CanonicalMechanism,
                    q: QuadratureSpec = DEFAULT_SPEC) -> ConditionReport:
    if mech.kind == "good_only":
        return check_good_only(d, kappa, mech.p_g, q)
    if mech.kind == "single_bundle":
        return check_single_bundle(d, kappa, mech.p_sb, q)
    return check_ad_tiered(d, kappa, mech.p_g, mech.p_sb, q)


# ---------------------------------------------------------------------------
# adversarial test-function prober


@dataclass(frozen=True)
class ProbeWitness:
    region: str
    family: str
    parameters: dict
    value: float


def _region_bounds(r: Region) -> tuple[float, float, float, float]:
    lo1, hi1, _, _ = r._axis_interval(0)
    lo2, hi2, _, _ = r._axis_interval(1)
    return lo1, hi1, lo2, hi2


def _layered_integral(m: MeasureDecomposition, r: Region, u: Callable,
                      boundary: float, scale: float, direction: str) -> float:
    """Integrate u d mu|_r with geometric x2-panels resolving a boundary layer.

    direction "below" concentrates mass at x2 = boundary decaying downward;
    "above" decays upward.
    """
    lo1, hi1, lo2, hi2 = _region_bounds(r)
    total = 0.0
    prev = boundary
    j = 1
    while True:
        if direction == "below":
            nxt = boundary - scale * (2.0 ** j - 1.0)
            panel = r.intersect(HalfPlane((0, 1), "ge", max(nxt, lo2)),
                                HalfPlane((0, 1), "le", prev))
            done = nxt <= lo2
        else:
            nxt = boundary + scale * (2.0 ** j - 1.0)
            panel = r.intersect(HalfPlane((0, 1), "le", min(nxt, hi2)),
                                HalfPlane((0, 1), "ge", prev))
            done = nxt >= hi2
        total += integrate_against(m, panel, u, SHARP_SPEC).total
        if done:
            break
        prev = nxt
        j += 1
    return total


def _probe_families(m: MeasureDecomposition, mech: CanonicalMechanism):
    """Yield (region_name, family, params, integral value) for the proof

    families, each admissible for its region's allocation signature."""
    regs = mech.regions()
    items = mech.region_items()
    deltas = (0.1, 0.01, 0.001)
    for name, r in regs.items():
        if r.is_empty():
            continue
        it = items[name]
        v1, v2 = monotonicity_signature(it.q1, it.q2)
        lo1, hi1, lo2, hi2 = _region_bounds(r)
        # x1-concentrating exponential edge families (outer direction is
        # integrated adaptively, no layering needed)
        for delta in deltas:
            if v1 == 1:
                u = lambda x1, x2: np.exp((np.asarray(x1, float) - hi1) / delta)
            else:
                u = lambda x1, x2: np.exp((lo1 - np.asarray(x1, float)) / delta)
            val = integrate_against(m, r, u, SHARP_SPEC).total
            yield name, "x1_edge_exp", {"delta": delta, "sign": v1}, val
        # x2-concentrating families, layered in the inner direction
        for delta in deltas:
            if v2 == 1:
                u = lambda x1, x2: np.exp((np.asarray(x2, float) - hi2) / delta)
                val = _layered_integral(m, r, u, hi2, delta, "below")
            else:
                u = lambda x1, x2: np.exp((lo2 - np.asarray(x2, float)) / delta)
                val = _layered_integral(m, r, u, lo2, delta, "above")
            yield name, "x2_edge_exp", {"delta": delta, "sign": v2}, val
        # corner family from the degenerate-price proof case (Z only)
        if name == "Z":
            width = hi1 - lo1
            for mm in (20.0, 60.0):
                for eps in (0.05 * width, 0.01 * width):
                    u = lambda x1, x2: np.exp(
                        mm * (np.asarray(x1, float) - (hi1 - eps)))
                    val = integrate_against(m, r, u, SHARP_SPEC).total
                    yield name, "corner_exp", {"m": mm, "eps": eps}, val
        # thin-strip families at the interior horizontal boundary (ad-tiered)
        if mech.kind == "ad_tiered" and name in ("W", "Y"):
            step = mech.p_sb - mech.p_g
            for mm in (20.0, 60.0):
                for eps in (0.05, 0.01):
                    if name == "Y":
                        # nonincreasing in x2, peaked on the strip above the step
                        u = lambda x1, x2: np.exp(
                            mm * ((step + eps) - np.asarray(x2, float)))
                        val = _layered_integral(m, r, u, step, 1.0 / mm, "above")
                    else:
                        u = lambda x1, x2: np.exp(
                            mm * (np.asarray(x2, float) - (step - eps)))
                        val = _layered_integral(m, r, u, step, 1.0 / mm, "below")
                    yield name, "strip_exp", {"m": mm, "eps": eps}, val


def adversarial_probe(m: MeasureDecomposition, mech: CanonicalMechanism
                      ) -> Optional[ProbeWitness]:
    """First admissible proof-family test function with a positive integral.

    A positive value refutes optimality (the dominance inequality requires
    every admissible integral to be nonpositive); None means no family in
    the probe set produced a violation.
    """
    for name, family, params, val in _probe_families(m, mech):
        scale = max(1.0, abs(val))
        if val > PROBE_TOL * scale:
            return ProbeWitness(name, family, params, float(val))
    return None


# ---------------------------------------------------------------------------
# regimes and general-kappa edge signs


REGIME_GOOD_ONLY = "good_only"
REGIME_AD_TIERED = "ad_tiered"
REGIME_SINGLE_BUNDLE = "single_bundle"


def classify_regime_uniform(space: TypeSpace, k: float,
                            density: Optional[DensityModel] = None
                            ) -> tuple[str, ...]:
    """Regime labels for densities uniform in the bad dimension.

    Good-Only for k <= |x2_hi|, Ad-Tiered strictly between the thresholds,
    Single-Bundle for k >= |x2_lo|; the upper threshold carries both labels.
    """
    if density is not None and not density.uniform_in_x2():
        raise DomainError("regime classification needs a density uniform in x2")
    hi = abs(space.x2_hi)
    lo = abs(space.x2_lo)
    if k <= hi + BOUNDARY_TOL:
        return (REGIME_GOOD_ONLY,)
    if abs(k - lo) <= BOUNDARY_TOL:
        return (REGIME_AD_TIERED, REGIME_SINGLE_BUNDLE)
    if k < lo:
        return (REGIME_AD_TIERED,)
    return (REGIME_SINGLE_BUNDLE,)


@dataclass(frozen=True)
class EdgeSignReport:
    mech_kind: str
    top_margin: float
    bottom_margin: float
    passed: bool


def check_general_kappa_edges(d: DensityModel, kappa: AdPaymentSchedule,
                              mech_kind: str, n: int = 201) -> EdgeSignReport:
    """Sign checks for the measure's top/bottom edge densities under a

    (possibly non-constant) payment schedule, per mechanism family:
    good-only needs top <= 0 and bottom >= 0; single-bundle the reverse;
    ad-tiered needs both nonnegative.  Margins are minima over an x1-grid.
    """
    m = build_measure(d, kappa)
    s = d.space
    xs = np.linspace(s.x1_lo, s.x1_hi, n)
    top = m.edge_density("top")(xs)
    bottom = m.edge_density("bottom")(xs)
    if mech_kind == "good_only":
        t_margin, b_margin = float(np.min(-top)), float(np.min(bottom))
    elif mech_kind == "single_bundle":
        t_margin, b_margin = float(np.min(top)), float(np.min(-bottom))
    elif mech_kind == "ad_tiered":
        t_margin, b_margin = float(np.min(top)), float(np.min(bottom))
    else:
        raise DomainError(f"unknown mechanism family {mech_kind!r}")
    return EdgeSignReport(mech_kind, t_margin, b_margin,
                          t_margin >= -1e-12 and b_margin >= -1e-12)
