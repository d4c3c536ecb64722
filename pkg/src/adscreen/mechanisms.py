"""Buyer choice, incentive checks, and seller revenue for finite menus."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .domain import (AdPaymentSchedule, CanonicalMechanism, DensityModel,
                     DiscreteInstance, Mechanism, MenuItem, constant_payment)
from .measure import MeasureDecomposition, integrate_against
from .quadrature import DEFAULT_SPEC, QuadratureSpec, integrate_trapezoid

_TIE_TOL = 1e-12


@dataclass(frozen=True)
class ChoiceOutcome:
    item_index: int
    utility: float
    payment: float
    ad_allocated: float


def best_response(menu: Mechanism, x: tuple[float, float],
                  kappa: Optional[AdPaymentSchedule] = None) -> ChoiceOutcome:
    """Utility-maximizing item; utility ties go to the seller-preferred item.

    Among utility-maximizing items the buyer takes the one with the highest
    seller revenue (price plus third-party payment), then the lowest index.
    This reproduces the boundary choices of the worked two-type examples.
    """
    if kappa is None:
        kappa = constant_payment(0.0)
    x1, x2 = x
    utils = np.array([it.utility(x1, x2) for it in menu.items], dtype=float)
    best_u = float(np.max(utils))
    tied = np.flatnonzero(utils >= best_u - _TIE_TOL)
    kap = float(kappa.value(x1, x2))
    revenues = np.array([menu.items[i].price + kap * menu.items[i].q2 for i in tied])
    idx = int(tied[int(np.argmax(revenues))])
    it = menu.items[idx]
    return ChoiceOutcome(idx, float(utils[idx]), it.price, it.q2)


def indirect_utility(menu: Mechanism, x: tuple[float, float]) -> float:
    """u(x) = max over the menu of x . q - p; zero at the lowest type for

    canonical prices, convex, and nondecreasing as a max of affine maps."""
    x1, x2 = x
    return float(max(it.utility(x1, x2) for it in menu.items))


def revenue_continuous(mech: CanonicalMechanism, d: DensityModel,
                       kappa: AdPaymentSchedule,
                       q: QuadratureSpec = DEFAULT_SPEC) -> float:
    """Expected revenue, integrating (price + kappa q2) f per menu region."""
    total = 0.0
    items = mech.region_items()
    for name, region in mech.regions().items():
        it = items[name]
        if it.price == 0.0 and it.q2 == 0.0:
            continue

        def integrand(x1, x2, it=it):
            return (it.price + kappa.value(x1, x2) * it.q2) * d.f(x1, x2)

        for trap in region.decompose():
            total += integrate_trapezoid(integrand, trap, q,
                                         label=f"revenue region {name}")
    return total


def revenue_discrete(menu: Mechanism, inst: DiscreteInstance,
                     kappa: AdPaymentSchedule) -> float:
    """Sum of w(x) (price + kappa(x) q2) under best responses."""
    total = 0.0
    for (x1, x2), w in inst.points:
        c = best_response(menu, (x1, x2), kappa)
        total += w * (c.payment + float(kappa.value(x1, x2)) * c.ad_allocated)
    return total


@dataclass(frozen=True)
class ICViolation:
    x: tuple[float, float]
    x_other: tuple[float, float]
    gain: float


def check_ic_ir(menu: Mechanism, sample: list[tuple[float, float]],
                kappa: Optional[AdPaymentSchedule] = None,
                tol: float = 1e-12) -> list[ICViolation]:
    """Pairwise IC plus IR over a sample of types; empty list means clean.

    Outcomes are recomputed internally as best responses, so a common menu
    is IC by construction; the check is the independent pairwise oracle.
    """
    outcomes = [best_response(menu, x, kappa) for x in sample]
    violations = []
    for i, x in enumerate(sample):
        ui = outcomes[i].utility
        if ui < -tol:
            violations.append(ICViolation(x, x, -ui))
        for j, x_other in enumerate(sample):
            if i == j:
                continue
            it = menu.items[outcomes[j].item_index]
            gain = float(it.utility(*x)) - ui
            if gain > tol:
                violations.append(ICViolation(x, x_other, gain))
    return violations


def revenue_via_measure(mech: CanonicalMechanism, m: MeasureDecomposition,
                        q: QuadratureSpec = DEFAULT_SPEC) -> float:
    """int u dmu over the Z/W/Y partition; u is affine within each region."""
    menu_items = mech.region_items()
    total = 0.0
    for name, region in mech.regions().items():
        it = menu_items[name]
        total += integrate_against(m, region, it.utility, q).total
    return total
