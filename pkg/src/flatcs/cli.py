"""Command-line entry point: ``flatcs <command> --scenario FILE``.

Every command emits one JSON report (sorted keys, no timestamps, so the
same scenario gives byte-identical output whatever ``FLATCS_THREADS`` is)
and exits 0 exactly when every record in it passed.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .flat import (
    FlatContext,
    FlatOptions,
    FlatSearchError,
    TwistedField,
    degree_flat,
    find_flat_connection,
    gauge_change_check,
    log_csv,
)
from .gauge import (
    IDENTITIES,
    CSContext,
    GaugeError,
    covariant_derivative_0form,
    cs_finite_difference,
    cs_functional,
    cs_gradient_pairing,
    sample_points,
    verify_identity,
)
from .groupfields import OracleError, brouwer_degree_oracle, degree_trivial, maurer_cartan_data
from .jets import CHUNK
from .scenario import Scenario, ScenarioError, load_scenario

COMMANDS = ("verify", "cs", "degree", "grad", "flatten", "normalize")

#: Statement behind every non-identity record; identity records use the registry in gauge.py.
ANCHORS = {
    "cs": "CS(A) = int_T3 cs(A), cs(A) = <(F_A + F_0) ^ B> - 1/6 <B ^ [B ^ B]>, B = A - A_0",
    "degree": "deg u = int_T3 u*Theta with the normalised inner product",
    "oracle": "deg u = sum of sign det(u^-1 du) over the preimages of a regular value",
    "gradient": "dCS_A(a) = 2 int <F_A ^ a> = d/dt CS(A + t a) at t = 0",
    "gauge_orbit": "dCS_A(d_A X) = 0",
    "gauge_change": "CS(phi*A) - CS(A) = deg phi",
    "flat": "R(A) = int sum_{a<b} <F_ab, F_ab> reaches zero",
    "volume": "int_SU(2) 1 = 2 pi^2 (Haar measure of the unit 3-sphere)",
    "theta_integral": "int_SU(2) Theta = -4 pi^2 at unit scale",
    "theta_integral_chart": "int_SU(2) Theta = -4 pi^2 at unit scale (pullback through a chart)",
    "lambda_star": "lambda* = 1 / (4 pi^2) makes the degree of the identity map 1",
}

DEFAULT_TOL = {
    "cs": 1e-9,
    "degree": 1e-6,
    "oracle": 0.0,
    "gradient": 1e-6,
    "gauge_orbit": 1e-8,
    "gauge_change": 1e-6,
    "flat": 1e-10,
    "volume": 1e-9,
    "theta_integral": 1e-9,
    "theta_integral_chart": 1e-9,
    "lambda_star": 1e-9,
}
DEFAULT_REGULAR_VALUE = (0.3, 0.5, -0.2, 0.1)
EXTRA_CHECKS = ("gauge_change",)


class UsageError(ValueError):
    pass


# -- records -------------------------------------------------------------------------------

def _clean(v):
    if v is None:
        return None
    v = float(v)
    return v if math.isfinite(v) else repr(v)


def record(name: str, value, tolerance: float | None, passed: bool, anchor: str | None = None,
           residual=None, error: str | None = None, **extra) -> dict:
    out = {"name": name, "anchor": anchor if anchor is not None else ANCHORS[name], "value": _clean(value),
           "tolerance": _clean(tolerance), "passed": bool(passed)}
    if residual is not None:
        out["residual"] = _clean(residual)
    if error is not None:
        out["error"] = error
    for k, v in extra.items():
        out[k] = _clean(v) if isinstance(v, (float, np.floating)) else v
    return out


def _tol(flags, name: str) -> float:
    return flags.tol if flags.tol is not None else DEFAULT_TOL[name]


def _expect(sc: Scenario | None, name: str):
    if sc is None:
        return None
    return dict(sc.expected).get(name)


def _value_record(sc, flags, name: str, value: float, **extra) -> dict:
    """A computed value: passes when finite and, if the scenario states one, equal to the expected value."""
    tol = _tol(flags, name)
    want = _expect(sc, name)
    if want is None:
        return record(name, value, None, math.isfinite(value), **extra)
    diff = abs(value - want)
    return record(name, value, tol, diff <= tol, residual=diff, expected=want, **extra)


# -- commands --------------------------------------------------------------------------------

def _require(sc: Scenario, *names: str):
    missing = [n for n in names if not sc.has(n)]
    if missing:
        raise UsageError(f"scenario {sc.id!r} needs field(s) {', '.join(missing)}")


def _cs_context(sc: Scenario, grid: int) -> CSContext:
    ref = sc.field("A0").value if sc.has("A0") else None
    return CSContext(sc.spec, sc.dim, ref, grid)


def _flat_context(sc: Scenario, grid: int) -> FlatContext:
    from .flat import HolonomyData

    hol = sc.holonomy or HolonomyData.trivial(sc.spec)
    ctx = FlatContext(hol, grid)
    if sc.has("A0"):
        ctx = FlatContext(hol, grid, ctx.cs_context().with_spec(sc.field("A0").value), ctx.spec)
    return ctx


def _applicable(sc: Scenario) -> list[str]:
    names = []
    for name, check in IDENTITIES.items():
        if check.exact_dim is not None and sc.dim != check.exact_dim:
            continue
        if sc.dim < check.min_dim:
            continue
        if all(k == "n" or sc.has(k) for k in check.needs):
            names.append(name)
    return names


def cmd_verify(sc: Scenario, flags) -> list[dict]:
    names = list(sc.checks) or _applicable(sc)
    fields = sc.values()
    points = sample_points(sc.dim)
    out = []
    for name in names:
        if name in EXTRA_CHECKS:
            out.append(_gauge_change(sc, flags))
            continue
        if name not in IDENTITIES:
            raise UsageError(f"unknown check {name!r}; known: {', '.join(sorted(IDENTITIES) + list(EXTRA_CHECKS))}")
        check = IDENTITIES[name]
        tol = flags.tol if flags.tol is not None else check.tolerance
        try:
            res = verify_identity(name, fields, sc.dim, points)
        except (GaugeError, ValueError) as exc:
            out.append(record(name, None, tol, False, anchor=check.anchor, error=str(exc)))
            continue
        out.append(record(name, res, tol, res < tol, anchor=check.anchor, residual=res))
    return out


def _gauge_change(sc: Scenario, flags) -> dict:
    _require(sc, "A", "u")
    if sc.dim != 3:
        raise UsageError("gauge_change needs T^3")
    ctx = _flat_context(sc, flags.grid or sc.grid)
    hol = ctx.holonomy
    A = TwistedField(sc.field("A").value, hol, "gauge")
    u = TwistedField(sc.field("u").value, hol, "group")
    chk = gauge_change_check(A, u, ctx)
    tol = _tol(flags, "gauge_change")
    return record("gauge_change", chk.lhs, tol, chk.difference < tol, residual=chk.difference,
                  degree=chk.rhs, cs_before=chk.cs_before, cs_after=chk.cs_after)


def cmd_cs(sc: Scenario, flags) -> list[dict]:
    _require(sc, "A")
    if sc.dim != 3:
        raise UsageError("the Chern-Simons functional is computed on T^3")
    ctx = _cs_context(sc, flags.grid or sc.grid)
    return [_value_record(sc, flags, "cs", cs_functional(sc.field("A").value, ctx))]


def cmd_degree(sc: Scenario, flags) -> list[dict]:
    _require(sc, "u")
    if sc.dim != 3:
        raise UsageError("the degree is computed on T^3")
    grid = flags.grid or sc.grid
    u = sc.field("u").value
    twisted = sc.holonomy is not None and not sc.holonomy.is_trivial
    if twisted:
        value = degree_flat(TwistedField(u, sc.holonomy, "group"), _flat_context(sc, grid))
    else:
        value = degree_trivial(u, N=grid)
    tol = _tol(flags, "degree")
    nearest = round(value)
    want = _expect(sc, "degree")
    target = nearest if want is None else want
    diff = abs(value - target)
    out = [record("degree", value, tol, diff <= tol, residual=diff, nearest_integer=int(nearest))]
    if flags.oracle:
        if twisted:
            raise UsageError("the preimage-counting oracle needs trivial holonomy")
        q = np.array(flags.regular_value if flags.regular_value is not None else DEFAULT_REGULAR_VALUE, float)
        q = q / np.linalg.norm(q)
        try:
            res = brouwer_degree_oracle(u, q)
        except OracleError as exc:
            out.append(record("oracle", None, 0.0, False, error=str(exc), regular_value=q.tolist()))
        else:
            out.append(record("oracle", res.degree, 0.0, res.degree == nearest and diff <= tol,
                              residual=abs(res.degree - value), preimages=len(res.signs),
                              min_abs_det=float(res.min_abs_det), regular_value=q.tolist()))
    return out


def cmd_grad(sc: Scenario, flags) -> list[dict]:
    _require(sc, "A", "a")
    if sc.dim != 3:
        raise UsageError("the gradient pairing is computed on T^3")
    ctx = _cs_context(sc, flags.grid or sc.grid)
    A, a = sc.field("A").value, sc.field("a").value
    pairing = cs_gradient_pairing(A, a, ctx)
    fd = cs_finite_difference(A, a, ctx)
    tol = _tol(flags, "gradient")
    out = [record("gradient", pairing, tol, abs(pairing - fd) < tol, residual=abs(pairing - fd), finite_difference=fd)]
    if sc.has("X"):
        direction = covariant_derivative_0form(ctx.with_spec(A), ctx.with_spec(sc.field("X").value))
        orbit = cs_gradient_pairing(A, direction, ctx)
        tol = _tol(flags, "gauge_orbit")
        out.append(record("gauge_orbit", orbit, tol, abs(orbit) < tol, residual=abs(orbit)))
    return out


def cmd_flatten(sc: Scenario, flags) -> list[dict]:
    from .flat import HolonomyData

    _require(sc, "A")
    if sc.dim != 3:
        raise UsageError("the flat-connection search runs on T^3")
    hol = sc.holonomy or HolonomyData.trivial(sc.spec)
    tol = _tol(flags, "flat")
    opts = FlatOptions(tol=tol, max_iters=flags.max_iters, bandwidth=flags.bandwidth)
    A = TwistedField(sc.field("A").value, hol, "gauge")
    try:
        result = find_flat_connection(A, opts=opts)
        R, ok, err = result.residual(), True, None
    except FlatSearchError as exc:
        R, ok, err = exc.residual, False, str(exc)
    if flags.log:
        Path(flags.log).write_text(log_csv(opts.log))
    iters = opts.log[-1][0] if opts.log else 0
    return [record("flat", R, tol, ok and R < tol, residual=R, error=err, iterations=int(iters),
                   initial_residual=opts.log[0][1] if opts.log else None)]


def cmd_normalize(sc, flags) -> list[dict]:
    data = maurer_cartan_data()
    targets = {
        "volume": (data.volume, 2 * math.pi**2),
        "theta_integral": (data.theta_integral, -4 * math.pi**2),
        "theta_integral_chart": (data.theta_integral_chart, -4 * math.pi**2),
        "lambda_star": (data.lambda_star, 1 / (4 * math.pi**2)),
    }
    out = []
    for name, (value, want) in targets.items():
        tol = _tol(flags, name)
        out.append(record(name, value, tol, abs(value - want) <= tol, residual=abs(value - want), expected=want))
    return out


HANDLERS = {"verify": cmd_verify, "cs": cmd_cs, "degree": cmd_degree, "grad": cmd_grad,
            "flatten": cmd_flatten, "normalize": cmd_normalize}


def run(command: str, scenario: Scenario | None, flags) -> dict:
    """Execute ``command`` and return the report (a JSON-ready dict)."""
    if command not in HANDLERS:
        raise UsageError(f"unknown command {command!r}")
    records = HANDLERS[command](scenario, flags)
    grid = None if command == "normalize" else (flags.grid or scenario.grid)
    report = {
        "artifact": {"name": "flatcs", "version": __version__},
        "command": command,
        "scenario": scenario.id if scenario is not None else None,
        "quadrature": {"grid": grid, "summation": f"math.fsum per {CHUNK}-point chunk, then over chunks"},
        "records": records,
        "passed": all(r["passed"] for r in records),
    }
    if scenario is not None and scenario.warnings:
        report["warnings"] = [str(w) for w in scenario.warnings]
    return report


def report_json(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True) + "\n"


# -- argument parsing ------------------------------------------------------------------------

def _regular_value(text: str) -> list[float]:
    try:
        parts = [float(p) for p in text.replace(" ", "").split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError("give four comma-separated numbers")
    if len(parts) != 4 or not any(parts):
        raise argparse.ArgumentTypeError("give four comma-separated numbers, not all zero")
    return parts


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="flatcs", description="Chern-Simons, degree and flatness checks on the 3-torus.")
    p.add_argument("--version", action="version", version=f"flatcs {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--scenario", required=name != "normalize", help="scenario JSON file")
        s.add_argument("--grid", type=int, default=None, help="quadrature points per axis (overrides the scenario)")
        s.add_argument("--json", dest="json_out", default=None, help="also write the report to this file")
        s.add_argument("--tol", type=float, default=None, help="override every tolerance")
        if name == "degree":
            s.add_argument("--oracle", action="store_true", help="cross-check by counting preimages")
            s.add_argument("--regular-value", type=_regular_value, default=None, metavar="W,X,Y,Z")
        if name == "flatten":
            s.add_argument("--bandwidth", type=int, default=4)
            s.add_argument("--max-iters", type=int, default=10_000)
            s.add_argument("--log", default=None, help="write the iteration log (CSV) here")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    flags = parser.parse_args(argv)
    for attr, default in (("oracle", False), ("regular_value", None), ("bandwidth", 4), ("max_iters", 10_000), ("log", None)):
        if not hasattr(flags, attr):
            setattr(flags, attr, default)
    scenario = None
    if flags.scenario is not None:
        path = Path(flags.scenario)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            print(f"flatcs: cannot read {path}: {exc.strerror}", file=sys.stderr)
            return 2
        try:
            scenario = load_scenario(text, source=path.name)
        except ScenarioError as exc:
            print(f"flatcs: {exc.diagnostic}", file=sys.stderr)
            return 2
        for w in scenario.warnings:
            print(f"flatcs: warning: {w}", file=sys.stderr)
    try:
        report = run(flags.command, scenario, flags)
    except UsageError as exc:
        print(f"flatcs: {exc}", file=sys.stderr)
        return 2
    text = report_json(report)
    sys.stdout.write(text)
    if flags.json_out:
        Path(flags.json_out).write_text(text)
    return 0 if report["passed"] else 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
