"""Exact LP benchmark for discrete instances, plus canonical-menu search."""

from __future__ import annotations

import itertools
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.linalg.blas import dger

from .domain import (AdPaymentSchedule, CanonicalMechanism, DensityModel,
                     DiscreteInstance, DomainError, MenuItem, discretize, menu)
from .mechanisms import revenue_discrete
from .quadrature import DEFAULT_SPEC, QuadratureSpec

FEAS_TOL = 1e-9


class SimplexStallError(RuntimeError):
    def __init__(self, iterations: int):
        super().__init__(f"simplex stalled after {iterations} pivots")
        self.iterations = iterations


@dataclass(frozen=True)
class LPProblem:
    """max c.x  s.t.  A x <= b,  x >= 0, encoding the seller's program.

    Decision variables per type i: q1_i, q2_i and the transfer split
    t_i = tp_i - tn_i (so the reported variable count is 3 per type while
    the tableau carries 4 nonnegative columns).
    """

    inst: DiscreteInstance
    kappa_values: tuple[float, ...]
    c: np.ndarray
    A: np.ndarray
    b: np.ndarray
    n_ic: int
    n_ir: int

    @property
    def n_types(self) -> int:
        return self.inst.n

    @property
    def n_variables(self) -> int:
        return 3 * self.inst.n


@dataclass(frozen=True)
class LPSolution:
    value: float
    q1: np.ndarray
    q2: np.ndarray
    t: np.ndarray
    status: str
    certificate: float
    iterations: int


def _cols(i: int) -> tuple[int, int, int, int]:
    return 4 * i, 4 * i + 1, 4 * i + 2, 4 * i + 3


def build_lp(inst: DiscreteInstance, kappa: AdPaymentSchedule) -> LPProblem:
    n = inst.n
    xs = inst.xs()
    w = inst.weights()
    kv = tuple(float(kappa.value(x1, x2)) for x1, x2 in xs)

    nvar = 4 * n
    n_ic = n * (n - 1)
    n_ir = n
    rows = n_ic + n_ir + 2 * n
    A = np.zeros((rows, nvar))
    b = np.zeros(rows)
    r = 0
    # IC: u_i(j) - u_i(i) <= 0 for all ordered pairs i != j
    for i in range(n):
        x1, x2 = xs[i]
        qi1, qi2, tip, tin = _cols(i)
        for j in range(n):
            if j == i:
                continue
            qj1, qj2, tjp, tjn = _cols(j)
            A[r, qj1] += x1
            A[r, qj2] += x2
            A[r, tjp] -= 1.0
            A[r, tjn] += 1.0
            A[r, qi1] -= x1
            A[r, qi2] -= x2
            A[r, tip] += 1.0
            A[r, tin] -= 1.0
            r += 1
    # IR: t_i - q_i . x_i <= 0
    for i in range(n):
        x1, x2 = xs[i]
        qi1, qi2, tip, tin = _cols(i)
        A[r, tip] = 1.0
        A[r, tin] = -1.0
        A[r, qi1] = -x1
        A[r, qi2] = -x2
        r += 1
    # box: q <= 1
    for i in range(n):
        qi1, qi2, _, _ = _cols(i)
        A[r, qi1] = 1.0
        b[r] = 1.0
        r += 1
        A[r, qi2] = 1.0
        b[r] = 1.0
        r += 1

    c = np.zeros(nvar)
    for i in range(n):
        qi1, qi2, tip, tin = _cols(i)
        c[tip] = w[i]
        c[tin] = -w[i]
        c[qi2] = w[i] * kv[i]
    return LPProblem(inst, kv, c, A, b, n_ic, n_ir)


def _simplex_max(A: np.ndarray, b: np.ndarray, c: np.ndarray,
                 max_iter: Optional[int] = None) -> tuple[np.ndarray, float, int]:
    """Revised simplex for max c.x, A x <= b (b >= 0), x >= 0.

    Starts from the all-slack basis (feasible since b >= 0, so the usual
    phase-one search is a no-op) and keeps the dense basis inverse plus an
    incrementally updated reduced-cost row.  Pricing is Dantzig; ratio-test
    ties are broken lexicographically via the basis-inverse rows, which
    rules out cycling.  The reduced costs are recomputed exactly from the
    basis before optimality is declared, so accumulated drift cannot stop
    the solve early.
    """
    m, n = A.shape
    if np.any(b < 0):
        raise DomainError("simplex expects b >= 0 (slack basis must be feasible)")
    Binv = np.eye(m, order="F")     # Fortran order for the in-place BLAS update
    xB = b.astype(float).copy()
    basis = list(range(n, n + m))
    # reduced costs of [A I] columns, negated objective convention: optimal
    # when z >= 0 everywhere
    z = np.concatenate([-c.astype(float), np.zeros(m)])

    def exact_z():
        cB = np.array([c[j] if j < n else 0.0 for j in basis])
        y = cB @ Binv
        return np.concatenate([-c + y @ A, y])

    def refactor():
        nonlocal Binv, xB
        B = np.empty((m, m), order="F")
        for i, j in enumerate(basis):
            if j < n:
                B[:, i] = A[:, j]
            else:
                B[:, i] = 0.0
                B[j - n, i] = 1.0
        Binv = np.asfortranarray(np.linalg.inv(B))
        xB = Binv @ b

    if max_iter is None:
        max_iter = 50 * (m + n)
    it = 0
    clean = False      # True iff Binv/z were just rebuilt from scratch
    while it < max_iter:
        col = int(np.argmin(z))
        if z[col] >= -FEAS_TOL:
            if clean:
                break
            refactor()                    # remove drift before declaring done
            z = exact_z()
            clean = True
            continue
        # entering column in basis coordinates
        if col < n:
            nz = np.flatnonzero(A[:, col])
            d = Binv[:, nz] @ A[nz, col]
        else:
            d = Binv[:, col - n].copy()
        pos = d > 1e-7
        if not np.any(pos):
            if np.any(d > 1e-11) and not clean:
                refactor()                # tiny pivots: suspect drift first
                z = exact_z()
                clean = True
                continue
            return None, np.inf, it        # unbounded direction
        clean = False
        xBc = np.maximum(xB, 0.0)
        ratios = np.full(m, np.inf)
        ratios[pos] = xBc[pos] / d[pos]
        rmin = ratios.min()
        cand = np.flatnonzero(ratios <= rmin + 1e-9)
        dmax = d[cand].max()
        cand = cand[d[cand] >= 0.9 * dmax]     # stability: large pivots first
        j = 0
        while cand.size > 1 and j < m:         # then lexicographic tie-break
            vals = Binv[cand, j] / d[cand]
            cand = cand[vals <= vals.min() + 1e-12]
            j += 1
        row = int(cand[0])
        piv = d[row]
        Binv[row, :] /= piv
        xB[row] = max(xB[row], 0.0) / piv
        d[row] = 0.0                           # pivot row is already final
        rowvec = Binv[row, :].copy()
        Binv = dger(-1.0, d, rowvec, a=Binv, overwrite_a=1)
        xB -= d * xB[row]
        # update the reduced-cost row with the (new) pivot row of B^-1 [A I]
        pivot_row = np.concatenate([rowvec @ A, rowvec])
        z -= z[col] * pivot_row
        z[col] = 0.0
        basis[row] = col
        it += 1
    else:
        raise SimplexStallError(max_iter)

    x = np.zeros(n + m)
    for i, bi in enumerate(basis):
        x[bi] = max(0.0, xB[i])
    value = float(sum(c[j] * x[j] for j in range(n)))
    return x[:n], value, it


def lp_solve(p: LPProblem) -> LPSolution:
    x, value, iters = _simplex_max(p.A, p.b, p.c)
    if x is None:
        return LPSolution(np.inf, None, None, None, "unbounded", np.inf, iters)
    n = p.n_types
    q1 = np.array([x[_cols(i)[0]] for i in range(n)])
    q2 = np.array([x[_cols(i)[1]] for i in range(n)])
    t = np.array([x[_cols(i)[2]] - x[_cols(i)[3]] for i in range(n)])
    cert = float(max(0.0, np.max(p.A @ x - p.b)))
    return LPSolution(value, q1, q2, t, "optimal", cert, iters)


def lp_optimal_value(inst: DiscreteInstance,
                     kappa: AdPaymentSchedule) -> LPSolution:
    return lp_solve(build_lp(inst, kappa))


# ---------------------------------------------------------------------------
# canonical-menu grid search on discrete instances


def _family_menu(family: str, p_g: Optional[float],
                 p_sb: Optional[float]):
    if family == "good_only":
        return menu(MenuItem(1.0, 0.0, p_g))
    if family == "single_bundle":
        return menu(MenuItem(1.0, 1.0, p_sb))
    if family == "ad_tiered":
        return menu(MenuItem(1.0, 0.0, p_g), MenuItem(1.0, 1.0, p_sb))
    raise DomainError(f"unknown canonical family {family!r}")


def menu_grid_search(inst: DiscreteInstance, kappa: AdPaymentSchedule,
                     family: str, price_grid: Sequence[float]
                     ) -> tuple[tuple[float, ...], float]:
    """Exhaustive search of canonical-family prices over the grid.

    Good-only and single-bundle scan one price; ad-tiered scans pairs with
    p_sb <= p_g.  Ties resolve to the lexicographically lowest prices.
    """
    grid = sorted(set(float(g) for g in price_grid))
    if not grid:
        raise DomainError("menu_grid_search needs a nonempty price grid")
    if family in ("good_only", "single_bundle"):
        combos = [(p,) for p in grid]
    else:
        combos = [(pg, psb) for pg in grid for psb in grid if psb <= pg]
    best_prices, best_rev = None, -np.inf
    for prices in combos:
        if family == "good_only":
            mn = _family_menu(family, prices[0], None)
        elif family == "single_bundle":
            mn = _family_menu(family, None, prices[0])
        else:
            mn = _family_menu(family, prices[0], prices[1])
        rev = revenue_discrete(mn, inst, kappa)
        if rev > best_rev + 1e-12:
            best_prices, best_rev = prices, rev
    return best_prices, best_rev


# ---------------------------------------------------------------------------
# gap tables against the continuous canonical mechanisms


@dataclass(frozen=True)
class GapRow:
    """LP benchmark vs the canonical family on one discretized instance.

    menu_revenue uses the mechanism's given prices; family_best re-optimizes
    the price(s) over the instance's natural candidate grid.  The reported
    gap is lp_value - family_best: it isolates the loss from restricting to
    the mechanism family, net of price-discretization mismatch.
    """

    grid: tuple[int, int]
    lp_value: float
    menu_revenue: float
    family_best: float
    gap: float


def instance_price_grid(inst: DiscreteInstance, family: str) -> list[float]:
    """Candidate prices where some type is indifferent between menu items."""
    xs = inst.xs()
    x1s = sorted({float(x1) for x1, _ in xs})
    sums = sorted({float(x1 + x2) for x1, x2 in xs})
    if family == "good_only":
        return x1s
    if family == "single_bundle":
        return sums
    steps = sorted({float(s - x2) for s in sums for _, x2 in xs})
    return sorted(set(x1s) | set(sums) | set(steps))


def _threads() -> int:
    default = os.cpu_count() or 1
    try:
        return max(1, int(os.environ.get("ADSCREEN_THREADS", default)))
    except ValueError:
        return default


def _gap_for_grid(mech: CanonicalMechanism, d: DensityModel,
                  kappa: AdPaymentSchedule, grid: tuple[int, int],
                  q: QuadratureSpec) -> GapRow:
    inst = discretize(d, grid[0], grid[1], q)
    sol = lp_optimal_value(inst, kappa)
    rev = revenue_discrete(mech.menu(), inst, kappa)
    _, best = menu_grid_search(inst, kappa, mech.kind,
                               instance_price_grid(inst, mech.kind))
    return GapRow(grid, sol.value, rev, best, sol.value - best)


def optimality_gap(mech: CanonicalMechanism, d: DensityModel,
                   kappa: AdPaymentSchedule,
                   grids: Sequence[tuple[int, int]],
                   q: QuadratureSpec = DEFAULT_SPEC) -> list[GapRow]:
    nt = _threads()
    if nt > 1 and len(grids) > 1:
        with ThreadPoolExecutor(max_workers=nt) as ex:
            futs = [ex.submit(_gap_for_grid, mech, d, kappa, tuple(g), q)
                    for g in grids]
            return [f.result() for f in futs]
    return [_gap_for_grid(mech, d, kappa, tuple(g), q) for g in grids]


# ---------------------------------------------------------------------------
# independent brute force for tiny instances


def brute_force_best(inst: DiscreteInstance, kappa: AdPaymentSchedule
                     ) -> tuple[float, list[tuple[float, float, float]]]:
    """Best revenue over deterministic allocations with optimal payments.

    For each assignment of (q1, q2) in {0,1}^2 per type, the revenue-maximal
    IC+IR payments are the componentwise-largest solution of the difference
    constraints t_i - t_j <= (q_i - q_j) . x_i, t_i <= q_i . x_i, found by
    Bellman-Ford style relaxation; assignments whose constraint graph has a
    negative cycle admit no finite payments and are skipped.
    """
    if inst.n > 3:
        raise DomainError("brute force oracle is restricted to n <= 3 types")
    xs = inst.xs()
    w = inst.weights()
    n = inst.n
    best_val, best_assign = -np.inf, None
    for alloc in itertools.product([(0, 0), (1, 0), (0, 1), (1, 1)], repeat=n):
        t = [a[0] * xs[i][0] + a[1] * xs[i][1]
             for i, a in enumerate(alloc)]                       # IR caps
        ok = True
        for _ in range(n + 1):
            changed = False
            for i in range(n):
                for j in range(n):
                    if i == j:
                        continue
                    gap = (alloc[i][0] - alloc[j][0]) * xs[i][0] \
                        + (alloc[i][1] - alloc[j][1]) * xs[i][1]
                    cap = t[j] + gap
                    if t[i] > cap + 1e-15:
                        t[i] = cap
                        changed = True
            if not changed:
                break
        else:
            ok = False                                            # negative cycle
        if not ok:
            continue
        val = sum(w[i] * (t[i] + kappa.value(*xs[i]) * alloc[i][1])
                  for i in range(n))
        if val > best_val:
            best_val = val
            best_assign = [(float(alloc[i][0]), float(alloc[i][1]), float(t[i]))
                           for i in range(n)]
    return float(best_val), best_assign
