"""Scenario-driven command line: ``run``, ``check``, ``suite``, ``zoo``.

Exit codes: 0 all checks hold, 1 some check fails, 2 usage or parse error,
3 engine error.
"""

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass, field, replace

import numpy as np

from . import diagnostics as dg
from . import suite as suite_mod
from .domains import make_domain
from .engines import EpsSchedule, Scheme, Trace, _atomic_write, mann_run, picard_run, read_trace, regularized_solve, write_trace
from .errors import (
    DimensionMismatchError,
    DomainEscapeError,
    InsufficientDataError,
    NonConvergenceError,
    NotInLambdaError,
    ValidationError,
)
from .operators import EpsilonBand, local_nonexpansiveness_probe, make_operator, zoo
from .space import Point, basis, zero
from .verdict import Status, TailWindow, Verdict, dumps

SEED_ENV = "OPIALITER_SEED"

SCENARIO_FIELDS = (
    "mode", "domain", "operator", "scheme", "x0", "max_iter", "stop_tol", "probes",
    "declared_weak_limit", "window", "tolerances", "checks", "seed",
)
REQUIRED_FIELDS = ("domain", "operator", "scheme", "x0", "max_iter")
DEFAULT_TOLERANCES = {"ar": 1e-8, "lambda": 1e-9, "opial": 1e-6, "margin": 1e-9, "residual": 1e-8, "fejer": 1e-12}
DEFAULT_CHECKS = ("ar", "residual", "lambda", "opial")
CHECK_PARAMS = {
    "ar": set(),
    "residual": set(),
    "lambda": set(),
    "opial": set(),
    "sharp": set(),
    "fejer": {"y", "eta"},
    "flat": {"delta"},
    "local": {"epsilon", "samples"},
    "regularized": set(),
}
N_DEFAULT_PROBES = 5


class ScenarioError(ValidationError):
    pass


@dataclass
class Scenario:
    source: dict
    dim: int
    domain: object
    operator: object
    scheme: Scheme
    x0: Point
    max_iter: int
    stop_tol: float
    probes: list
    declared_weak_limit: Point
    window: TailWindow
    tolerances: dict
    checks: list
    seed: int
    inner_max: int = 10_000
    inner_tol: float = 1e-12
    anchor: Point = None


@dataclass
class RunReport:
    scenario: dict
    seed: int
    trace: dict
    verdicts: list
    artifacts: dict = field(default_factory=dict)

    @property
    def failed(self):
        return any(v.status is Status.FAILS for v in self.verdicts)

    def to_json(self):
        return {
            "scenario": self.scenario,
            "seed": self.seed,
            "trace": self.trace,
            "verdicts": [v.to_json() for v in self.verdicts],
            "artifacts": self.artifacts,
        }


# -------------------------------------------------------------------- parsing


def _point(doc, dim, name):
    try:
        return Point.from_json(doc, dim)
    except (ValidationError, DimensionMismatchError, TypeError, ValueError) as exc:
        raise ScenarioError(f"bad point ({exc})", name) from None


def _parse_checks(doc):
    if doc is None:
        return [{"name": c} for c in DEFAULT_CHECKS]
    if not isinstance(doc, list):
        raise ScenarioError("must be a list", "checks")
    out = []
    for item in doc:
        spec = {"name": item} if isinstance(item, str) else item
        if not isinstance(spec, dict) or "name" not in spec:
            raise ScenarioError("each check is a name or an object with 'name'", "checks")
        name = spec["name"]
        if name not in CHECK_PARAMS:
            raise ScenarioError(f"unknown check {name!r}; expected one of {sorted(CHECK_PARAMS)}", "checks")
        extra = set(spec) - {"name"} - CHECK_PARAMS[name]
        if extra:
            raise ScenarioError(f"unknown {name} parameters {sorted(extra)}", "checks")
        out.append(spec)
    names = [c["name"] for c in out]
    if len(set(names)) != len(names):
        raise ScenarioError("each check may be requested once", "checks")
    return out


def parse_scenario(doc):
    """Validate a scenario document and build its objects."""
    if not isinstance(doc, dict):
        raise ScenarioError("scenario must be a JSON object", "scenario")
    extra = set(doc) - set(SCENARIO_FIELDS)
    if extra:
        raise ScenarioError(f"unknown scenario fields {sorted(extra)}", sorted(extra)[0])
    for f in REQUIRED_FIELDS:
        if f not in doc:
            raise ScenarioError(f"missing required field {f!r}", f)

    mode = doc.get("mode")
    if mode is None:
        dim = len(doc["x0"]) if isinstance(doc["x0"], list) else doc["x0"].get("dim") if isinstance(doc["x0"], dict) else None
    elif mode == "sparse" or (isinstance(mode, dict) and mode.get("kind") == "sparse" and set(mode) == {"kind"}):
        dim = None
    elif isinstance(mode, dict) and mode.get("kind") == "dense" and set(mode) == {"kind", "dim"}:
        dim = mode["dim"]
        if not isinstance(dim, int) or dim < 1:
            raise ScenarioError("dense dim must be a positive integer", "mode")
    else:
        raise ScenarioError('expected "sparse", {"kind": "sparse"} or {"kind": "dense", "dim": d}', "mode")

    x0 = _point(doc["x0"], dim, "x0")
    if dim is not None and x0.dim is None:
        x0 = Point(x0.coords, dim)
    try:
        domain = make_domain(doc["domain"], dim)
    except ValidationError as exc:
        raise ScenarioError(str(exc), "domain") from None
    try:
        operator = make_operator(doc["operator"], dim)
    except ValidationError as exc:
        raise ScenarioError(str(exc), "operator") from None

    scheme_doc = doc["scheme"]
    if isinstance(scheme_doc, str):
        scheme_doc = {"kind": scheme_doc}
    if not isinstance(scheme_doc, dict) or "kind" not in scheme_doc:
        raise ScenarioError("scheme needs a 'kind'", "scheme")
    kind = scheme_doc["kind"]
    allowed = {
        "picard": {"kind"},
        "mann": {"kind", "tau"},
        "regularized": {"kind", "eps0", "rho", "count", "z", "inner_max", "inner_tol"},
    }
    if kind not in allowed:
        raise ScenarioError(f"unknown scheme {kind!r}", "scheme")
    if set(scheme_doc) - allowed[kind]:
        raise ScenarioError(f"unknown {kind} fields {sorted(set(scheme_doc) - allowed[kind])}", "scheme")
    extra_kw = {}
    try:
        if kind == "picard":
            scheme = Scheme("picard")
        elif kind == "mann":
            tau = float(scheme_doc["tau"])
            if not 0.0 < tau < 1.0:
                raise ScenarioError(f"tau {tau} outside (0, 1)", "scheme.tau")
            scheme = Scheme("mann", tau=tau)
        else:
            sched = EpsSchedule(float(scheme_doc["eps0"]), float(scheme_doc["rho"]), int(scheme_doc["count"]))
            scheme = Scheme("regularized", schedule=sched)
            extra_kw["inner_max"] = int(scheme_doc.get("inner_max", 10_000))
            extra_kw["inner_tol"] = float(scheme_doc.get("inner_tol", 1e-12))
            if "z" in scheme_doc:
                extra_kw["anchor"] = _point(scheme_doc["z"], dim, "scheme.z")
    except KeyError as exc:
        raise ScenarioError(f"missing {exc.args[0]!r}", f"scheme.{exc.args[0]}") from None
    except ValidationError as exc:
        raise ScenarioError(str(exc), getattr(exc, "field", "scheme")) from None
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"bad value ({exc})", "scheme") from None

    max_iter = doc["max_iter"]
    if not isinstance(max_iter, int) or isinstance(max_iter, bool) or max_iter < 1:
        raise ScenarioError("must be a positive integer", "max_iter")
    stop_tol = doc.get("stop_tol", 0.0)
    if not isinstance(stop_tol, (int, float)) or not stop_tol >= 0 or not math.isfinite(stop_tol):
        raise ScenarioError("must be a finite number >= 0", "stop_tol")

    probes = [_point(p, dim, "probes") for p in doc.get("probes") or []]
    limit = doc.get("declared_weak_limit")
    limit = _point(limit, dim, "declared_weak_limit") if limit is not None else None

    window = doc.get("window")
    if window is not None:
        if not isinstance(window, dict) or set(window) != {"burn_in", "window"}:
            raise ScenarioError('expected {"burn_in": int, "window": int}', "window")
        try:
            window = TailWindow(int(window["burn_in"]), int(window["window"]))
        except ValueError as exc:
            raise ScenarioError(str(exc), "window") from None

    tolerances = dict(DEFAULT_TOLERANCES)
    tol_doc = doc.get("tolerances") or {}
    if not isinstance(tol_doc, dict):
        raise ScenarioError("must be an object", "tolerances")
    for k, v in tol_doc.items():
        if k not in DEFAULT_TOLERANCES:
            raise ScenarioError(f"unknown tolerance {k!r}", f"tolerances.{k}")
        if not isinstance(v, (int, float)) or not v > 0 or not math.isfinite(v):
            raise ScenarioError("tolerances must be finite and > 0", f"tolerances.{k}")
        tolerances[k] = float(v)
    if "residual" not in tol_doc and "ar" in tol_doc:
        tolerances["residual"] = tolerances["ar"]

    checks_doc = doc.get("checks")
    if checks_doc is None and kind == "regularized":
        checks_doc = ["regularized"]
    checks = _parse_checks(checks_doc)

    seed = doc.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool):
        raise ScenarioError("must be an integer", "seed")

    if domain.gap(x0) > 1e-9:
        raise ScenarioError("x0 lies outside the domain", "x0")

    return Scenario(doc, dim, domain, operator, scheme, x0, max_iter, float(stop_tol), probes, limit,
                    window, tolerances, checks, seed, **extra_kw)


def load_scenario(path):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario ({exc.strerror})", "path") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"line {exc.lineno} column {exc.colno}: {exc.msg}", "json") from None
    return doc


# -------------------------------------------------------------------- running


def _default_probes(sc, seed):
    if sc.probes:
        return sc.probes
    try:
        rows = sc.domain.sample_rows(np.random.default_rng(seed), N_DEFAULT_PROBES)
        return [Point.from_array(r) for r in rows]
    except NotImplementedError:
        support = sorted(sc.x0.coords) or [1]
        return [zero()] + [basis(k) for k in support[: N_DEFAULT_PROBES - 1]]


def _lambda_all(trace, probes, w, tol):
    witnesses = []
    ok = True
    window = w
    for i, z in enumerate(probes):
        v = dg.lambda_membership(trace, z, w, tol)
        window = v.window
        ok = ok and v.holds
        witnesses += [(f"spread[{i}]", v.witness("spread")), (f"dist_hi[{i}]", v.witness("dist_hi"))]
        if v.holds:
            witnesses.append((f"psi[{i}]", dg.psi_estimate(trace, z, w, tol)))
    status = Status.HOLDS if ok else Status.FAILS
    if not probes:
        status = Status.INCONCLUSIVE
        witnesses = [("probes", 0.0)]
    return Verdict("lambda", status, tol, window, witnesses)


def _limit_for(trace, declared, tol):
    return declared if declared is not None else dg.detect_limit(trace, tol)


def run_checks(trace, checks, *, operator=None, domain=None, probes=(), limit=None,
               window=None, tolerances=None, seed=0, extra=None):
    """Evaluate the requested checks on ``trace``; returns ``(verdicts, plot_series)``."""
    tol = dict(DEFAULT_TOLERANCES)
    tol.update(tolerances or {})
    verdicts = []
    series = {}
    for spec in checks:
        name = spec["name"]
        if name == "ar":
            verdicts.append(dg.ar_check(trace, window, tol["ar"]))
            series["ar"] = [("step", dg.ar_profile(trace))]
        elif name == "residual":
            verdicts.append(dg.residual_check(trace, window, tol["residual"]))
            series["residual"] = [("residual", dg.residual_profile(trace))]
        elif name == "lambda":
            verdicts.append(_lambda_all(trace, probes, window, tol["lambda"]))
            series["lambda"] = [(f"probe[{i}]", trace.distances_to(z)) for i, z in enumerate(probes)]
        elif name == "opial":
            lim = _limit_for(trace, limit, tol["ar"])
            if lim is None:
                verdicts.append(Verdict("opial", Status.INCONCLUSIVE, tol["margin"], window, [("no_limit", 1.0)]))
            else:
                verdicts.append(dg.opial_probe(trace, lim, probes, window, tol["margin"], tol["lambda"], tol["opial"]))
                series["opial"] = [("limit", trace.distances_to(lim))]
        elif name == "fejer":
            y = spec.get("y")
            if y is not None:
                y = _point(y, trace.dim, "checks.fejer.y")
            else:
                fps = operator.fixed_points(domain) if operator is not None else []
                y = fps[0] if fps else _limit_for(trace, limit, tol["ar"])
            if y is None:
                verdicts.append(Verdict("fejer", Status.INCONCLUSIVE, tol["fejer"], None, [("no_reference", 1.0)]))
                continue
            eta = spec.get("eta")
            verdicts.append(dg.fejer_monitor(trace, y, eta, tol["fejer"]))
            series["fejer"] = [("distance", trace.distances_to(y))]
        elif name == "sharp":
            lim = _limit_for(trace, limit, tol["ar"])
            if operator is None or lim is None:
                verdicts.append(Verdict("sharp", Status.INCONCLUSIVE, tol["margin"], window,
                                        [("no_operator", float(operator is None)), ("no_limit", float(lim is None))]))
                continue
            verdicts.append(dg.sharp_check(operator, trace.points, lim, window, tol["margin"]))
        elif name == "flat":
            if operator is None or domain is None:
                raise ScenarioError("flat needs an operator and a domain", "checks")
            delta = float(spec.get("delta", 0.5))
            verdicts.append(dg.flat_check(operator, trace, delta, domain.diameter(), window, tol["margin"]))
        elif name == "local":
            if operator is None or domain is None:
                raise ScenarioError("local needs an operator and a domain", "checks")
            band = EpsilonBand(float(spec.get("epsilon", 0.5)))
            v = local_nonexpansiveness_probe(operator, domain, band, int(spec.get("samples", 1000)), seed)
            verdicts.append(replace(v, check="local"))
        elif name == "regularized":
            if extra is None or "regularized" not in extra:
                raise ScenarioError("regularized check needs the regularized scheme", "checks")
            verdicts.append(replace(extra["regularized"], check="regularized"))
    return verdicts, series


def _effective_seed(seed):
    env = os.environ.get(SEED_ENV)
    if env is None or env.strip() == "":
        return seed
    try:
        return int(env)
    except ValueError:
        raise ScenarioError(f"{SEED_ENV} must be an integer", SEED_ENV) from None


def execute(sc):
    """Run the engine of a parsed scenario; returns ``(trace, extra)``."""
    extra = {}
    kind = sc.scheme.kind
    if kind == "picard":
        trace = picard_run(sc.operator, sc.x0, sc.domain, sc.max_iter, sc.stop_tol)
    elif kind == "mann":
        trace = mann_run(sc.operator, sc.scheme.tau, sc.x0, sc.domain, sc.max_iter, sc.stop_tol)
    else:
        anchor = sc.anchor if sc.anchor is not None else sc.domain.centre_point()
        pairs, verdict = regularized_solve(sc.operator, anchor, sc.domain, sc.scheme.schedule,
                                           sc.inner_max, sc.inner_tol)
        trace = Trace.from_points([p for p, _ in pairs], operator=sc.operator,
                                  scheme=sc.scheme, domain=sc.domain, stop_reason="schedule")
        extra["regularized"] = verdict
    if sc.declared_weak_limit is not None:
        trace.declared_weak_limit = sc.declared_weak_limit
    return trace, extra


def _plot_text(rows):
    lines = ["step,series,value"]
    for label, values in rows:
        for k, v in enumerate(values):
            lines.append(f"{k},{label},{format(float(v), '.17g')}")
    return "\n".join(lines) + "\n"


def _write_outputs(report, trace, series, out_dir, plot_data):
    os.makedirs(out_dir, exist_ok=True)
    trace_name = "trace.csv" if trace.dim is not None else "trace.jsonl"
    write_trace(trace, os.path.join(out_dir, trace_name))
    report.artifacts["trace"] = trace_name
    if plot_data:
        names = []
        for check, rows in series.items():
            name = f"plot_{check}.csv"
            _atomic_write(os.path.join(out_dir, name), _plot_text(rows))
            names.append(name)
        report.artifacts["plot_data"] = names
    report.artifacts["report"] = "report.json"
    _atomic_write(os.path.join(out_dir, "report.json"), dumps(report.to_json()))


def run_scenario(path, out_dir, plot_data=False):
    """Load, run and check a scenario file; writes trace and report into ``out_dir``."""
    doc = load_scenario(path)
    sc = parse_scenario(doc)
    seed = _effective_seed(sc.seed)
    trace, extra = execute(sc)
    probes = _default_probes(sc, seed)
    verdicts, series = run_checks(
        trace, sc.checks, operator=sc.operator, domain=sc.domain, probes=probes,
        limit=sc.declared_weak_limit, window=sc.window, tolerances=sc.tolerances, seed=seed, extra=extra,
    )
    report = RunReport(doc, seed, trace.summary(), verdicts)
    _write_outputs(report, trace, series, out_dir, plot_data)
    return report


def check_trace(trace_path, checks, params=None):
    """Run diagnostics on an exported trace file without re-running any engine.

    ``params`` may hold ``probes``, ``limit``, ``window``, ``tolerances``,
    ``operator`` and ``domain`` (spec documents or built objects) and ``seed``.
    """
    params = dict(params or {})
    try:
        trace = read_trace(trace_path)
    except OSError as exc:
        raise ScenarioError(f"cannot read trace ({exc.strerror})", "trace") from None
    op = params.get("operator")
    if isinstance(op, dict):
        op = make_operator(op, trace.dim)
    dom = params.get("domain")
    if isinstance(dom, dict):
        dom = make_domain(dom, trace.dim)
    probes = [p if isinstance(p, Point) else _point(p, trace.dim, "probes") for p in params.get("probes", [])]
    limit = params.get("limit")
    if limit is not None and not isinstance(limit, Point):
        limit = _point(limit, trace.dim, "limit")
    checks = _parse_checks([c if isinstance(c, (str, dict)) else str(c) for c in checks])
    seed = _effective_seed(params.get("seed", 0))
    verdicts, _ = run_checks(
        trace, checks, operator=op, domain=dom, probes=probes, limit=limit,
        window=params.get("window"), tolerances=params.get("tolerances"), seed=seed,
    )
    return RunReport({"trace": os.fspath(trace_path), "checks": [c["name"] for c in checks]},
                     seed, trace.summary(), verdicts)


def run_suite(json_flag=False, out=None, cases=None):
    out = out or sys.stdout
    verdicts = suite_mod.run_all(cases)
    if json_flag:
        out.write(dumps([v.to_json() for v in verdicts]))
    else:
        for v in verdicts:
            out.write(f"{v.check:40s} {v.status.value}\n")
    return 0 if all(v.holds for v in verdicts) else 1


# ------------------------------------------------------------------ frontend


def _json_arg(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise argparse.ArgumentTypeError(f"invalid JSON: {exc.msg}") from None


def _build_parser():
    p = argparse.ArgumentParser(prog="opialiter", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a scenario file")
    r.add_argument("scenario")
    r.add_argument("-o", "--out", required=True, help="output directory")
    r.add_argument("--plot-data", action="store_true", help="write per-check (step, value) CSV files")
    r.add_argument("--json", action="store_true", help="print the report JSON")

    c = sub.add_parser("check", help="run diagnostics on an exported trace")
    c.add_argument("trace")
    c.add_argument("--checks", required=True, help="comma-separated check names")
    c.add_argument("--probe", action="append", type=_json_arg, default=[], help="probe point (JSON); repeatable")
    c.add_argument("--limit", type=_json_arg, help="declared limit (JSON point)")
    c.add_argument("--y", type=_json_arg, help="Fejer reference point (JSON)")
    c.add_argument("--eta", type=_json_arg, help="Fejer tolerance sequence (JSON list)")
    c.add_argument("--delta", type=float, default=0.5)
    c.add_argument("--operator", type=_json_arg, help="operator spec (JSON), for flat/sharp")
    c.add_argument("--domain", type=_json_arg, help="domain spec (JSON), for flat/local")
    c.add_argument("--burn-in", type=int)
    c.add_argument("--window", type=int)
    c.add_argument("--tol", action="append", default=[], metavar="NAME=VALUE", help="override a tolerance")
    c.add_argument("--json", action="store_true")

    s = sub.add_parser("suite", help="run the built-in example catalog")
    s.add_argument("--json", action="store_true")

    sub.add_parser("zoo", help="list the operator catalog")
    return p


def _print_verdicts(report, out):
    for v in report.verdicts:
        wit = ", ".join(f"{n}={val:.6g}" for n, val in v.witnesses[:4])
        out.write(f"{v.check:12s} {v.status.value:14s} {wit}\n")


def _cmd_check(args):
    checks = []
    for name in (n.strip() for n in args.checks.split(",")):
        if not name:
            continue
        spec = {"name": name}
        if name == "fejer":
            if args.y is not None:
                spec["y"] = args.y
            if args.eta is not None:
                spec["eta"] = args.eta
        if name == "flat":
            spec["delta"] = args.delta
        checks.append(spec)
    params = {"probes": args.probe, "limit": args.limit, "operator": args.operator, "domain": args.domain}
    if args.window is not None or args.burn_in is not None:
        if args.window is None or args.burn_in is None:
            raise ScenarioError("give both --burn-in and --window", "window")
        params["window"] = TailWindow(args.burn_in, args.window)
    tols = {}
    for item in args.tol:
        key, _, val = item.partition("=")
        if key not in DEFAULT_TOLERANCES:
            raise ScenarioError(f"unknown tolerance {key!r}", "tol")
        tols[key] = float(val)
    params["tolerances"] = tols
    return check_trace(args.trace, checks, params)


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    out = sys.stdout
    try:
        if args.command == "zoo":
            for kind, fields, desc in zoo():
                out.write(f"{kind:20s} params: {', '.join(fields) or '-':24s} {desc}\n")
            return 0
        if args.command == "suite":
            return run_suite(args.json, out)
        if args.command == "run":
            report = run_scenario(args.scenario, args.out, args.plot_data)
        else:
            report = _cmd_check(args)
    except (ValidationError, DimensionMismatchError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2
    except (DomainEscapeError, NonConvergenceError, InsufficientDataError, NotInLambdaError) as exc:
        sys.stderr.write(f"engine error: {exc}\n")
        return 3
    if args.json:
        out.write(dumps(report.to_json()))
    else:
        s = report.trace
        out.write(f"trace: {s['length']} points, stop reason {s['stop_reason']}, "
                  f"final residual {s['final_residual']:.3e}\n")
        _print_verdicts(report, out)
    return 1 if report.failed else 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
