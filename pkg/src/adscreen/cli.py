"""Config-driven command line: analyze, verify, calibrate, sweep, oracle."""

from __future__ import annotations

import argparse
import csv
import json
import sys
from typing import Optional

import numpy as np

from . import calibrate as cal
from . import conditions as cond
from .domain import (AdPaymentSchedule, CanonicalMechanism, DensityModel,
                     DiscreteInstance, DomainError, Region, TypeSpace,
                     ad_tiered, constant_payment, general_payment, good_only,
                     loglinear_density, product_polynomial_density,
                     single_bundle, uniform_density)
from .measure import build_measure, integrate_against, mu_total
from .mechanisms import revenue_continuous, revenue_discrete
from .oracle import (lp_optimal_value, menu_grid_search, optimality_gap)
from .quadrature import DEFAULT_SPEC, QuadratureError, QuadratureSpec

EXIT_OK = 0
EXIT_VERIFY_FAIL = 1
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_NO_ROOT = 4


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field path."""


# ---------------------------------------------------------------------------
# deterministic JSON (12 significant digits, stable field order)


def _fmt_float(v: float) -> str:
    if v != v:
        return "NaN"
    if v == float("inf"):
        return "Infinity"
    if v == float("-inf"):
        return "-Infinity"
    if v == 0.0:
        return "0"
    s = format(v, ".12g")
    # keep valid JSON numbers: 1e+06 style exponents are fine, bare ints too
    return s


def dumps(obj, indent: int = 2, _level: int = 0) -> str:
    pad = " " * (indent * _level)
    pad_in = " " * (indent * (_level + 1))
    if obj is None:
        return "null"
    if obj is True:
        return "true"
    if obj is False:
        return "false"
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(float(obj))
    if isinstance(obj, (list, tuple, np.ndarray)):
        items = [dumps(v, indent, _level + 1) for v in obj]
        if not items:
            return "[]"
        return "[\n" + ",\n".join(pad_in + it for it in items) + "\n" + pad + "]"
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad_in}{json.dumps(str(k))}: {dumps(v, indent, _level + 1)}"
                 for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


# ---------------------------------------------------------------------------
# config parsing


def _req(d: dict, key: str, path: str):
    if key not in d:
        raise ConfigError(f"missing field {path}.{key}" if path else
                          f"missing field {key}")
    return d[key]


def _pair(v, path: str) -> tuple[float, float]:
    if not (isinstance(v, (list, tuple)) and len(v) == 2):
        raise ConfigError(f"{path} must be a [lo, hi] pair")
    return float(v[0]), float(v[1])


def parse_space(cfg: dict) -> TypeSpace:
    ts = _req(cfg, "type_space", "")
    x1 = _pair(_req(ts, "x1", "type_space"), "type_space.x1")
    x2 = _pair(_req(ts, "x2", "type_space"), "type_space.x2")
    try:
        return TypeSpace(x1[0], x1[1], x2[0], x2[1])
    except DomainError as e:
        raise ConfigError(f"type_space: {e}") from e


def parse_density(cfg: dict, space: TypeSpace) -> DensityModel:
    dc = _req(cfg, "density", "")
    kind = _req(dc, "kind", "density")
    try:
        if kind == "uniform":
            return uniform_density(space)
        if kind == "loglinear":
            return loglinear_density(space, float(_req(dc, "a", "density")),
                                     float(_req(dc, "b", "density")))
        if kind == "product_polynomial":
            return product_polynomial_density(
                space,
                [float(c) for c in _req(dc, "coeffs1", "density")],
                [float(c) for c in _req(dc, "coeffs2", "density")])
    except DomainError as e:
        raise ConfigError(f"density: {e}") from e
    raise ConfigError(f"density.kind: unknown kind {kind!r}")


def parse_payment(cfg: dict) -> AdPaymentSchedule:
    pc = _req(cfg, "payment", "")
    if "constant" in pc:
        try:
            return constant_payment(float(pc["constant"]))
        except DomainError as e:
            raise ConfigError(f"payment.constant: {e}") from e
    if "general" in pc:
        g = pc["general"]
        if _req(g, "kind", "payment.general") != "affine":
            raise ConfigError("payment.general.kind: only 'affine' supported")
        c0 = float(g.get("c0", 0.0))
        c1 = float(g.get("c1", 0.0))
        c2 = float(g.get("c2", 0.0))

        def value(x1, x2):
            return c0 + c1 * np.asarray(x1, float) + c2 * np.asarray(x2, float)

        def d2(x1, x2):
            return np.full_like(np.asarray(x1, float), c2)

        return general_payment(value, d2)
    raise ConfigError("payment: needs 'constant' or 'general'")


def parse_mechanism(cfg: dict, space: TypeSpace,
                    require_prices: bool = True) -> CanonicalMechanism:
    mc = _req(cfg, "mechanism", "")
    kind = _req(mc, "kind", "mechanism")
    try:
        if kind == "good_only":
            p = float(_req(mc, "p_g", "mechanism")) if require_prices \
                else float(mc.get("p_g", space.x1_hi))
            return good_only(space, p)
        if kind == "single_bundle":
            p = float(_req(mc, "p_sb", "mechanism")) if require_prices \
                else float(mc.get("p_sb", space.x1_lo + space.x2_lo))
            return single_bundle(space, p)
        if kind == "ad_tiered":
            if require_prices:
                pg = float(_req(mc, "p_g", "mechanism"))
                psb = float(_req(mc, "p_sb", "mechanism"))
            else:
                pg = float(mc.get("p_g", space.x1_hi))
                psb = float(mc.get("p_sb", min(pg, space.x1_lo + space.x2_hi)))
            return ad_tiered(space, pg, psb)
    except DomainError as e:
        raise ConfigError(f"mechanism: {e}") from e
    raise ConfigError(f"mechanism.kind: unknown kind {kind!r}")


def parse_quadrature(cfg: dict) -> QuadratureSpec:
    qc = cfg.get("quadrature")
    if qc is None:
        return DEFAULT_SPEC
    try:
        return QuadratureSpec(
            gauss_order=int(qc.get("gauss_order", DEFAULT_SPEC.gauss_order)),
            max_subdivisions=int(qc.get("max_subdivisions",
                                        DEFAULT_SPEC.max_subdivisions)),
            abs_tol=float(qc.get("abs_tol", DEFAULT_SPEC.abs_tol)),
            rel_tol=float(qc.get("rel_tol", DEFAULT_SPEC.rel_tol)))
    except (DomainError, QuadratureError, ValueError) as e:
        raise ConfigError(f"quadrature: {e}") from e


def parse_instance(cfg: dict) -> Optional[DiscreteInstance]:
    ic = cfg.get("instance")
    if ic is None:
        return None
    pts = _req(ic, "points", "instance")
    try:
        return DiscreteInstance(tuple(((float(p[0]), float(p[1])), float(p[2]))
                                      for p in pts))
    except (DomainError, IndexError, TypeError) as e:
        raise ConfigError(f"instance.points: {e}") from e


def load_config(path: str) -> dict:
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except OSError as e:
        raise ConfigError(f"cannot read config: {e}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"config is not valid JSON: {e}") from e
    if not isinstance(cfg, dict):
        raise ConfigError("config root must be a JSON object")
    return cfg


# ---------------------------------------------------------------------------
# report helpers


def _mech_dict(mech: CanonicalMechanism) -> dict:
    out = {"kind": mech.kind}
    if mech.p_g is not None:
        out["p_g"] = mech.p_g
    if mech.p_sb is not None:
        out["p_sb"] = mech.p_sb
    return out


def _witness_json(w):
    if isinstance(w, tuple):
        return [_witness_json(v) for v in w]
    if isinstance(w, (int, float, np.floating)):
        return float(w)
    return w


def _write_csv(path: str, header: list[str], rows: list[list]):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(header)
        for row in rows:
            wr.writerow(["" if v is None else
                         (_fmt_float(v) if isinstance(v, float) else v)
                         for v in row])


# ---------------------------------------------------------------------------
# commands


def cmd_analyze(cfg: dict) -> tuple[dict, int]:
    space = parse_space(cfg)
    d = parse_density(cfg, space)
    kappa = parse_payment(cfg)
    q = parse_quadrature(cfg)
    m = build_measure(d, kappa)
    full = Region.full(space)
    bd = integrate_against(m, full, lambda x1, x2: np.ones_like(
        np.asarray(x1, float)), q)
    xs = np.linspace(space.x1_lo, space.x1_hi, 21)
    report = {
        "type_space": {"x1": [space.x1_lo, space.x1_hi],
                       "x2": [space.x2_lo, space.x2_hi]},
        "density_kind": d.kind,
        "atom_mass": bd.atom,
        "edge_masses": {e: bd.edges[e] for e in
                        ("bottom", "top", "left", "right")},
        "interior_mass": bd.interior,
        "total_mass": bd.total,
        "edge_density_ranges": {},
    }
    for e in ("bottom", "top"):
        vals = m.edge_density(e)(xs)
        report["edge_density_ranges"][e] = [float(np.min(vals)),
                                            float(np.max(vals))]
    ys = np.linspace(space.x2_lo, space.x2_hi, 21)
    for e in ("left", "right"):
        vals = m.edge_density(e)(ys)
        report["edge_density_ranges"][e] = [float(np.min(vals)),
                                            float(np.max(vals))]
    return report, EXIT_OK


def cmd_verify(cfg: dict) -> tuple[dict, int]:
    space = parse_space(cfg)
    d = parse_density(cfg, space)
    kappa = parse_payment(cfg)
    q = parse_quadrature(cfg)
    mech = parse_mechanism(cfg, space, require_prices=True)
    if not kappa.is_constant:
        edge = cond.check_general_kappa_edges(d, kappa, mech.kind)
        report = {
            "mechanism": _mech_dict(mech),
            "general_payment_edge_check": {
                "top_margin": edge.top_margin,
                "bottom_margin": edge.bottom_margin,
                "passed": edge.passed,
            },
            "verdict": "edge_signs_passed" if edge.passed else "necessary_failed",
        }
        return report, EXIT_OK if edge.passed else EXIT_VERIFY_FAIL
    rep = cond.check_canonical(d, kappa, mech, q)
    m = build_measure(d, kappa)
    probe = cond.adversarial_probe(m, mech)
    report = {
        "mechanism": _mech_dict(mech),
        "items": [{"id": it.condition_id, "status": it.status,
                   "witness": _witness_json(it.witness), "detail": it.detail}
                  for it in rep.items],
        "probe_witness": None if probe is None else {
            "region": probe.region, "family": probe.family,
            "parameters": probe.parameters, "value": probe.value},
        "total_mass_residual": mu_total(m, q),
        "verdict": rep.verdict,
    }
    code = EXIT_OK if rep.verdict == "sufficient_passed" else EXIT_VERIFY_FAIL
    return report, code


def cmd_calibrate(cfg: dict) -> tuple[dict, int]:
    space = parse_space(cfg)
    d = parse_density(cfg, space)
    kappa = parse_payment(cfg)
    q = parse_quadrature(cfg)
    if not kappa.is_constant:
        raise ConfigError("payment: calibration needs a constant payment")
    mc = _req(cfg, "mechanism", "")
    kind = _req(mc, "kind", "mechanism")
    m = build_measure(d, kappa)
    if kind == "good_only":
        res = cal.solve_good_only_price(m, q)
        mech = good_only(space, res.prices[0])
    elif kind == "single_bundle":
        res = cal.solve_single_bundle_price(m, q)
        mech = single_bundle(space, res.prices[1])
    elif kind == "ad_tiered":
        res = cal.solve_ad_tiered_prices(m, q)
        mech = ad_tiered(space, res.prices[0], res.prices[1])
    else:
        raise ConfigError(f"mechanism.kind: unknown kind {kind!r}")
    verify_rep = cond.check_canonical(d, kappa, mech, q)
    report = {
        "mechanism": _mech_dict(mech),
        "prices": {"p_g": res.prices[0], "p_sb": res.prices[1]},
        "residuals": {k: v for k, v in sorted(res.residuals.items())},
        "iterations": res.iterations,
        "extra_roots": [list(r) for r in res.extra_roots],
        "revenue": revenue_continuous(mech, d, kappa, q),
        "verify_verdict": verify_rep.verdict,
    }
    return report, EXIT_OK


def _sweep_continuous(cfg: dict, space, d, q, sweep) -> tuple[list[str], list[list]]:
    k_min = float(_req(sweep, "k_min", "sweep"))
    k_max = float(_req(sweep, "k_max", "sweep"))
    steps = int(_req(sweep, "steps", "sweep"))
    header = ["k", "regime", "p_g", "p_sb", "revenue", "error"]
    rows = []
    ks = np.linspace(k_min, k_max, steps) if steps > 0 else []
    labeled = d.uniform_in_x2()
    for k in ks:
        k = float(k)
        try:
            kappa = constant_payment(k)
            m = build_measure(d, kappa)
            regime = "+".join(cond.classify_regime_uniform(space, k)) \
                if labeled else ""
            family = regime.split("+")[0] if labeled else "ad_tiered"
            if family == "good_only":
                res = cal.solve_good_only_price(m, q)
                mech = good_only(space, res.prices[0])
            elif family == "single_bundle":
                res = cal.solve_single_bundle_price(m, q)
                mech = single_bundle(space, res.prices[1])
            else:
                res = cal.solve_ad_tiered_prices(m, q)
                mech = ad_tiered(space, res.prices[0], res.prices[1])
            rev = revenue_continuous(mech, d, kappa, q)
            rows.append([k, regime, res.prices[0], res.prices[1], rev, None])
        except Exception as e:                       # keep sweeping per row
            rows.append([k, "", None, None, None, f"{type(e).__name__}: {e}"])
    return header, rows


def _sweep_instance(cfg: dict, inst: DiscreteInstance,
                    sweep) -> tuple[list[str], list[list]]:
    k_min = float(_req(sweep, "k_min", "sweep"))
    k_max = float(_req(sweep, "k_max", "sweep"))
    steps = int(_req(sweep, "steps", "sweep"))
    header = ["k", "rev_good_only", "rev_single_bundle", "rev_ad_tiered",
              "best_family", "error"]
    xs = inst.xs()
    x1s = sorted({x1 for x1, _ in xs})
    sums = sorted({x1 + x2 for x1, x2 in xs})
    pg_grid = sorted(set(x1s) | {s - x2 for s in sums for _, x2 in xs})
    rows = []
    ks = np.linspace(k_min, k_max, steps) if steps > 0 else []
    for k in ks:
        k = float(k)
        try:
            kappa = constant_payment(k)
            _, r_go = menu_grid_search(inst, kappa, "good_only", x1s)
            _, r_sb = menu_grid_search(inst, kappa, "single_bundle", sums)
            _, r_at = menu_grid_search(inst, kappa, "ad_tiered",
                                       sorted(set(pg_grid) | set(sums)))
            revs = {"good_only": r_go, "single_bundle": r_sb,
                    "ad_tiered": r_at}
            best = max(sorted(revs), key=lambda f: revs[f])
            rows.append([k, r_go, r_sb, r_at, best, None])
        except Exception as e:
            rows.append([k, None, None, None, "", f"{type(e).__name__}: {e}"])
    return header, rows


def cmd_sweep(cfg: dict, csv_path: Optional[str]) -> tuple[dict, int]:
    sweep = cfg.get("sweep")
    if sweep is None:
        raise ConfigError("missing field sweep")
    inst = parse_instance(cfg)
    if inst is not None:
        header, rows = _sweep_instance(cfg, inst, sweep)
    else:
        space = parse_space(cfg)
        d = parse_density(cfg, space)
        q = parse_quadrature(cfg)
        header, rows = _sweep_continuous(cfg, space, d, q, sweep)
    if csv_path:
        _write_csv(csv_path, header, rows)
    report = {
        "columns": header,
        "rows": [[("" if v is None else v) for v in row] for row in rows],
    }
    return report, EXIT_OK


def cmd_oracle(cfg: dict, csv_path: Optional[str]) -> tuple[dict, int]:
    oc = cfg.get("oracle")
    if oc is None:
        raise ConfigError("missing field oracle")
    kappa = parse_payment(cfg)
    inst = parse_instance(cfg)
    if inst is not None:
        sol = lp_optimal_value(inst, kappa)
        report = {
            "lp_value": sol.value,
            "lp_status": sol.status,
            "lp_certificate": sol.certificate,
        }
        rows = []
        header = ["grid", "lp_value", "menu_revenue", "gap"]
        if "mechanism" in cfg:
            lo1 = min(x1 for x1, _ in inst.xs())
            hi1 = max(x1 for x1, _ in inst.xs())
            if hi1 <= lo1:
                hi1 = lo1 + 1e-9
            lo2 = min(x2 for _, x2 in inst.xs())
            hi2 = min(max(x2 for _, x2 in inst.xs()), 0.0)
            if lo2 >= hi2:
                lo2 = hi2 - 1e-9
            space = TypeSpace(lo1, hi1, lo2, hi2)
            mech = parse_mechanism(cfg, space, require_prices=True)
            rev = revenue_discrete(mech.menu(), inst, kappa)
            report["menu_revenue"] = rev
            report["gap"] = sol.value - rev
            rows.append([f"{inst.n} types", sol.value, rev, sol.value - rev])
        else:
            rows.append([f"{inst.n} types", sol.value, None, None])
        if csv_path:
            _write_csv(csv_path, header, rows)
        return report, EXIT_OK
    space = parse_space(cfg)
    d = parse_density(cfg, space)
    q = parse_quadrature(cfg)
    mech = parse_mechanism(cfg, space, require_prices=True)
    grids = [tuple(int(v) for v in g) for g in _req(oc, "grids", "oracle")]
    table = optimality_gap(mech, d, kappa, grids, q)
    gaps = [row.gap for row in table]
    report = {
        "mechanism": _mech_dict(mech),
        "rows": [{"grid": list(row.grid), "lp_value": row.lp_value,
                  "menu_revenue": row.menu_revenue,
                  "family_best": row.family_best, "gap": row.gap}
                 for row in table],
        "gaps_weakly_decreasing": all(g2 <= g1 + 1e-9 for g1, g2
                                      in zip(gaps, gaps[1:])),
    }
    if csv_path:
        _write_csv(csv_path, ["grid_n1", "grid_n2", "lp_value",
                              "menu_revenue", "family_best", "gap"],
                   [[row.grid[0], row.grid[1], row.lp_value,
                     row.menu_revenue, row.family_best, row.gap]
                    for row in table])
    return report, EXIT_OK


# ---------------------------------------------------------------------------
# entry point


def main(argv: Optional[list[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="adscreen",
        description="Verification and calibration toolkit for screening "
                    "with ads and third-party payments.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("verify", "calibrate", "sweep", "oracle", "analyze"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True)
        p.add_argument("--csv", default=None)
    args = parser.parse_args(argv)

    try:
        cfg = load_config(args.config)
        if args.command == "verify":
            report, code = cmd_verify(cfg)
        elif args.command == "calibrate":
            report, code = cmd_calibrate(cfg)
        elif args.command == "sweep":
            report, code = cmd_sweep(cfg, args.csv)
        elif args.command == "oracle":
            report, code = cmd_oracle(cfg, args.csv)
        else:
            report, code = cmd_analyze(cfg)
    except ConfigError as e:
        print(dumps({"error": "config", "message": str(e)}))
        return EXIT_CONFIG
    except cal.NoRootError as e:
        print(dumps({"error": "no_root", "message": str(e),
                     "endpoints": list(e.endpoints)}))
        return EXIT_NO_ROOT
    except (QuadratureError, DomainError, ArithmeticError) as e:
        print(dumps({"error": "numeric", "message": str(e)}))
        return EXIT_NUMERIC

    print(dumps(report))
    return code


if __name__ == "__main__":
    sys.exit(main())
