"""Price calibration from the zero-mass equations mu(region) = 0."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .domain import DomainError, ad_tiered, good_only, single_bundle
from .measure import MeasureDecomposition, mu_of_region, marginal_M
from .quadrature import DEFAULT_SPEC, QuadratureSpec

MAX_ITER = 200
ROOT_TOL = 1e-8


class NoRootError(RuntimeError):
    """The zero-mass equation has no sign change on its bracket."""

    def __init__(self, msg, endpoints):
        super().__init__(msg)
        self.endpoints = endpoints


@dataclass(frozen=True)
class CalibrationResult:
    prices: tuple[Optional[float], Optional[float]]   # (p_g, p_sb)
    residuals: dict
    iterations: int
    bracket_or_path: tuple
    extra_roots: tuple = ()


def _bisect(g, lo, hi, tol=ROOT_TOL):
    """Plain bisection with a monotone-shrinking bracket trace."""
    glo, ghi = g(lo), g(hi)
    if abs(glo) <= tol:
        return lo, 0, ((lo, hi),)
    if abs(ghi) <= tol:
        return hi, 0, ((lo, hi),)
    if glo * ghi > 0:
        raise NoRootError(
            f"no sign change on bracket [{lo:.6g}, {hi:.6g}] "
            f"(values {glo:.6g}, {ghi:.6g})", ((lo, glo), (hi, ghi)))
    trace = [(lo, hi)]
    for it in range(1, MAX_ITER + 1):
        mid = 0.5 * (lo + hi)
        gm = g(mid)
        if abs(gm) <= tol or hi - lo < 1e-15:
            return mid, it, tuple(trace)
        if glo * gm < 0:
            hi, ghi = mid, gm
        else:
            lo, glo = mid, gm
        assert hi - lo <= trace[-1][1] - trace[-1][0]
        trace.append((lo, hi))
    raise NoRootError("bisection exceeded the iteration budget",
                      ((lo, g(lo)), (hi, g(hi))))


def solve_good_only_price(m: MeasureDecomposition,
                          q: QuadratureSpec = DEFAULT_SPEC) -> CalibrationResult:
    """Root of g(p) = mu([x1_lo, p] x full) on [x1_lo, x1_hi]."""
    s = m.space

    def g(p):
        return marginal_M(m, None, p, q)

    # stop short of x1_hi: the right-edge line mass enters the cumulative
    # marginal only at the endpoint itself, where M jumps to mu(X) = 0
    hi = s.x1_hi - 1e-9 * (s.x1_hi - s.x1_lo)
    p, iters, trace = _bisect(g, s.x1_lo, hi)
    mech = good_only(s, p)
    mu_w = mu_of_region(m, mech.regions()["W"], q).total
    # mu(X) = 0 makes the second zero-mass equation automatic
    assert abs(mu_w) < 1e-6, mu_w
    return CalibrationResult((p, None), {"mu_Z": abs(g(p)), "mu_W": abs(mu_w)},
                             iters, trace)


def solve_single_bundle_price(m: MeasureDecomposition,
                              q: QuadratureSpec = DEFAULT_SPEC) -> CalibrationResult:
    """Root of h(p) = mu({x1 + x2 <= p}) on the feasible price bracket."""
    s = m.space
    lo = s.x1_lo + s.x2_lo
    hi = min(s.x1_hi + s.x2_lo, s.x1_lo + s.x2_hi)

    def h(p):
        return mu_of_region(m, single_bundle(s, p).regions()["Z"], q).total

    p, iters, trace = _bisect(h, lo, hi)
    mu_y = mu_of_region(m, single_bundle(s, p).regions()["Y"], q).total
    assert abs(mu_y) < 1e-6, mu_y
    return CalibrationResult((None, p), {"mu_Z": abs(h(p)), "mu_Y": abs(mu_y)},
                             iters, trace)


def solve_ad_tiered_prices(m: MeasureDecomposition,
                           q: QuadratureSpec = DEFAULT_SPEC,
                           start: Optional[tuple[float, float]] = None,
                           fd_step: float = 1e-6) -> CalibrationResult:
    """Damped Newton on F(p_g, p_sb) = (mu(W), mu(Y)) with 5x5 multi-start.

    All distinct feasible roots are reported; the primary root is the one
    whose W and Y regions both have positive area (a proper two-tier menu),
    breaking remaining ties by smaller p_g.
    """
    s = m.space

    def feasible(pg, psb):
        return (s.x1_lo <= pg <= s.x1_hi
                and psb <= min(pg, s.x1_lo + s.x2_hi) + 1e-12
                and psb >= s.x1_lo + s.x2_lo - 1e-12)

    def F(pg, psb):
        regs = ad_tiered(s, pg, psb).regions()
        return np.array([mu_of_region(m, regs["W"], q).total,
                         mu_of_region(m, regs["Y"], q).total])

    def newton(pg, psb):
        path = [(pg, psb)]
        fv = F(pg, psb)
        for it in range(1, MAX_ITER + 1):
            if np.max(np.abs(fv)) < ROOT_TOL:
                return (pg, psb), it, path
            J = np.empty((2, 2))
            for col, (dg, db) in enumerate(((fd_step, 0.0), (0.0, fd_step))):
                pg2 = min(pg + dg, s.x1_hi)
                psb2 = min(psb + db, min(pg2, s.x1_lo + s.x2_hi))
                actual = (pg2 - pg, psb2 - psb)[col]
                if abs(actual) < 1e-12:
                    pg2 = pg - dg
                    psb2 = psb - db
                    actual = -fd_step
                J[:, col] = (F(pg2, psb2) - fv) / actual
            try:
                step = np.linalg.solve(J, -fv)
            except np.linalg.LinAlgError:
                return None
            lam = 1.0
            norm0 = np.max(np.abs(fv))
            while lam > 1e-6:
                pg_n = pg + lam * step[0]
                psb_n = psb + lam * step[1]
                if feasible(pg_n, psb_n):
                    fv_n = F(pg_n, psb_n)
                    if np.max(np.abs(fv_n)) < norm0:
                        pg, psb, fv = pg_n, psb_n, fv_n
                        path.append((pg, psb))
                        break
                lam *= 0.5
            else:
                return None
        return None

    if start is not None:
        if not feasible(*start):
            raise DomainError(f"start {start} outside the feasible price set")
        starts = [start]
    else:
        pg_grid = np.linspace(s.x1_lo, s.x1_hi, 7)[1:-1]
        psb_hi = s.x1_lo + s.x2_hi
        psb_lo = s.x1_lo + s.x2_lo
        psb_grid = np.linspace(psb_lo, psb_hi, 7)[1:-1]
        starts = [(pg, psb) for pg in pg_grid for psb in psb_grid
                  if feasible(pg, psb)]

    roots = []
    best_res = np.inf
    for st in starts:
        out = newton(*st)
        if out is None:
            continue
        (pg, psb), iters, path = out
        if not feasible(pg, psb):
            continue
        if any(abs(pg - r[0][0]) < 1e-6 and abs(psb - r[0][1]) < 1e-6
               for r in roots):
            continue
        regs = ad_tiered(s, pg, psb).regions()
        mu_z = mu_of_region(m, regs["Z"], q).total
        assert abs(mu_z) < 1e-6, mu_z
        proper = regs["W"].area > 1e-9 and regs["Y"].area > 1e-9
        roots.append(((pg, psb), iters, tuple(path), abs(mu_z), proper))
        best_res = min(best_res, float(np.max(np.abs(F(pg, psb)))))

    if not roots:
        raise NoRootError(
            f"no convergent start for the ad-tiered system "
            f"(best residual {best_res:.3g})", ())

    roots.sort(key=lambda r: (not r[4], r[0][0]))
    (pg, psb), iters, path, mu_z, _ = roots[0]
    fv = F(pg, psb)
    return CalibrationResult(
        (pg, psb),
        {"mu_W": abs(float(fv[0])), "mu_Y": abs(float(fv[1])), "mu_Z": mu_z},
        iters, path,
        extra_roots=tuple(r[0] for r in roots[1:]))
