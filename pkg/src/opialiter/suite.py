"""Named, deterministic reproductions of the worked examples and counterexamples.

Each case builds its sequence or run, measures a handful of quantities and
compares them against values frozen into :data:`CASES`.
"""

import math
from dataclasses import dataclass

import numpy as np

from .diagnostics import (
    ar_check,
    fejer_monitor,
    flat_check,
    lambda_membership,
    opial_probe,
    psi_estimate,
    sharp_check,
)
from .domains import ball
from .engines import Trace, mann_run, picard_run
from .errors import UnknownCaseError
from .operators import Identity, Projection, make_operator
from .space import Point, basis, inner_product, norm, zero
from .verdict import Status, TailWindow, Verdict

N = 200
WINDOW = TailWindow(burn_in=N // 2, window=N // 2)
ROOT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class Expectation:
    quantity: str
    value: object  # float, or a status string
    tol: float = 1e-12

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tolerance must be > 0")

    def matches(self, observed):
        if isinstance(self.value, str):
            return observed == self.value
        return abs(float(observed) - float(self.value)) <= self.tol


@dataclass(frozen=True)
class NamedCase:
    key: str
    description: str
    expected: tuple
    build: object


def _status(v):
    return v.status.value


# -------------------------------------------------------------------- builders


def _lambda_empty():
    # e_n for even n, 2 e_n for odd n, n = 1..N
    xs = [basis(n) if n % 2 == 0 else 2.0 * basis(n) for n in range(1, N + 1)]
    tr = Trace.from_points(xs, xs)
    norms = [norm(x) for x in xs]
    z = basis(1) + basis(2)
    nz2 = norm(z) ** 2
    worst = 0.0
    for x in xs:
        lhs = norm(x - z) ** 2
        worst = max(
            worst,
            abs(lhs - (norm(x) ** 2 - 2.0 * inner_product(x, z) + nz2)),
            abs(lhs - (norm(x) ** 2 + inner_product(z - 2.0 * x, z))),
        )
    out = {
        "norm_values_exact": float(set(norms) == {1.0, 2.0}),
        "norm_lo": min(norms),
        "norm_hi": max(norms),
        "norm_sq_hi": max(norms) ** 2,
        "polarization_residual": worst,
    }
    for name, p in (("0", zero()), ("e1", basis(1)), ("e1+e2", z)):
        out[f"lambda[{name}]"] = _status(lambda_membership(tr, p, WINDOW))
    return out


def _two_accumulation_points():
    xs = [basis(n) if n % 2 == 0 else basis(1) for n in range(1, N + 1)]
    tr = Trace.from_points(xs, xs)
    e1 = basis(1)
    even = [norm(e1 - x) for n, x in enumerate(xs, 1) if n % 2 == 0]
    odd = [norm(e1 - x) for n, x in enumerate(xs, 1) if n % 2 == 1]
    return {
        "even_dev_from_sqrt2": max(abs(d - ROOT2) for d in even),
        "odd_max": max(odd),
        "norm_dev_from_1": max(abs(norm(x) - 1.0) for x in xs),
        "lambda[0]": _status(lambda_membership(tr, zero(), WINDOW)),
        "lambda[e1]": _status(lambda_membership(tr, e1, WINDOW)),
        "psi[0]": psi_estimate(tr, zero(), WINDOW),
    }


def _sharp_discontinuous():
    f = make_operator({"kind": "half_radial"})
    ys = [basis(n) for n in range(1, N + 1)]
    v = sharp_check(f, ys, zero(), WINDOW)
    tiny = 1e-300 * basis(1)
    return {
        "image_gap_e5": norm(f(basis(5)) - f(zero())),
        "liminf_image_gap": v.witness("liminf_image_gap"),
        "liminf_gap": v.witness("liminf_gap"),
        "sharp": _status(v),
        "jump_at_zero": norm(f(tiny)) - norm(f(zero())),
    }


def _rotation_picard_vs_mann():
    f = make_operator({"kind": "rotation", "theta": math.pi / 2})
    dom = ball([0.0, 0.0], 1.0)
    x0 = Point.dense(1.0, 0.0)
    pic = picard_run(f, x0, dom, N)
    man = mann_run(f, 0.5, x0, dom, N)
    steps = pic.step_norms()
    norms = np.linalg.norm(man.xs, axis=1)
    k = np.arange(51)
    closed = 2.0 ** (-k / 2.0)
    return {
        "picard_step_dev": float(np.max(np.abs(steps - ROOT2))),
        "picard_ar": _status(ar_check(pic)),
        "mann_ar": _status(ar_check(man)),
        "mann_norm_rel_dev": float(np.max(np.abs(norms[:51] - closed) / closed)),
        "mann_limit_norm": float(norms[-1]),
        "mann_final_residual": man.final_residual(),
        "mann_fejer": _status(fejer_monitor(man, zero(2))),
    }


def _orthonormal_opial():
    xs = [basis(n) for n in range(1, N + 1)]
    tr = Trace.from_points(xs, xs)
    v = opial_probe(tr, zero(), [basis(1), zero()], WINDOW)
    return {
        "liminf_limit": v.witness("liminf_limit"),
        "liminf_e1": v.witness("liminf_probe[0]"),
        "skipped": v.witness("skipped"),
        "opial": _status(v),
    }


def _contraction_rate():
    f = make_operator({"kind": "affine_contraction", "scale": 0.5, "shift": [0.5, 0.0]})
    tr = picard_run(f, Point.dense(0.0, 0.0), ball([1.0, 0.0], 2.0), 100, 1e-12)
    err = np.linalg.norm(tr.xs - np.array([1.0, 0.0]), axis=1)
    k = np.arange(min(41, len(tr)))
    closed = 2.0 ** (-k.astype(float))
    return {
        "rate_rel_dev": float(np.max(np.abs(err[k] - closed) / closed)),
        "steps": float(len(tr) - 1),
        "stopped_on_tolerance": float(tr.stop_reason == "tolerance"),
    }


def _flat_nonexpansive():
    dom = ball([0.0, 0.0], 2.0)
    ops = [
        Identity(),
        make_operator({"kind": "rotation", "theta": 1.0}),
        Projection(ball([0.0, 0.0], 1.0)),
    ]
    x0 = Point.dense(1.5, 0.5)
    statuses = set()
    for f in ops:
        for tr in (picard_run(f, x0, dom, N), mann_run(f, 0.5, x0, dom, N)):
            statuses.add(_status(flat_check(f, tr, 0.5, dom.diameter())))
    return {"all_not_triggered": float(statuses == {Status.NOT_TRIGGERED.value})}


CASES = {
    c.key: c
    for c in (
        NamedCase(
            "remark-3.1b-lambda-empty",
            "x_n = e_n (even n), 2 e_n (odd n): weakly null, yet no distance sequence converges",
            (
                Expectation("norm_values_exact", 1.0),
                Expectation("norm_lo", 1.0),
                Expectation("norm_hi", 2.0),
                Expectation("norm_sq_hi", 4.0),
                Expectation("polarization_residual", 0.0),
                Expectation("lambda[0]", "fails"),
                Expectation("lambda[e1]", "fails"),
                Expectation("lambda[e1+e2]", "fails"),
            ),
            _lambda_empty,
        ),
        NamedCase(
            "two-accumulation-points",
            "x_n = e_n (even n), e_1 (odd n): 0 is in Lambda, e_1 is not",
            (
                Expectation("even_dev_from_sqrt2", 0.0),
                Expectation("odd_max", 0.0),
                Expectation("norm_dev_from_1", 0.0),
                Expectation("lambda[0]", "holds"),
                Expectation("lambda[e1]", "fails"),
                Expectation("psi[0]", 1.0, 1e-9),
            ),
            _two_accumulation_points,
        ),
        NamedCase(
            "sharp-discontinuous",
            "half-radial map along e_n -> 0: image gaps 1/2 against gaps 1",
            (
                Expectation("image_gap_e5", 0.5),
                Expectation("liminf_image_gap", 0.5, 1e-9),
                Expectation("liminf_gap", 1.0, 1e-9),
                Expectation("sharp", "holds"),
                Expectation("jump_at_zero", 0.5),
            ),
            _sharp_discontinuous,
        ),
        NamedCase(
            "rotation-picard-vs-mann",
            "quarter turn from (1,0): Picard circles forever, the tau = 1/2 relaxation converges to 0",
            (
                Expectation("picard_step_dev", 0.0),
                Expectation("picard_ar", "fails"),
                Expectation("mann_ar", "holds"),
                Expectation("mann_norm_rel_dev", 0.0),
                Expectation("mann_limit_norm", 0.0, 1e-8),
                Expectation("mann_final_residual", 0.0, 1e-8),
                Expectation("mann_fejer", "holds"),
            ),
            _rotation_picard_vs_mann,
        ),
        NamedCase(
            "orthonormal-opial",
            "x_n = e_n with declared weak limit 0, probe e_1: lim inf 1 < sqrt 2",
            (
                Expectation("liminf_limit", 1.0, 1e-9),
                Expectation("liminf_e1", ROOT2, 1e-9),
                Expectation("skipped", 1.0),
                Expectation("opial", "holds"),
            ),
            _orthonormal_opial,
        ),
        NamedCase(
            "contraction-geometric-rate",
            "x -> x/2 + (1/2, 0) from 0: error exactly 2^-n, tolerance stop within 45 steps",
            (
                Expectation("rate_rel_dev", 0.0),
                Expectation("steps", 40.0, 0.5),
                Expectation("stopped_on_tolerance", 1.0),
            ),
            _contraction_rate,
        ),
        NamedCase(
            "nonexpansive-flat-not-triggered",
            "the expansion premise never fires for identity, rotation or projection",
            (Expectation("all_not_triggered", 1.0),),
            _flat_nonexpansive,
        ),
    )
}


def run_case(key, cases=None):
    cases = CASES if cases is None else cases
    if key not in cases:
        raise UnknownCaseError(key, cases)
    case = cases[key]
    observed = case.build()
    witnesses = []
    mismatches = 0
    for exp in case.expected:
        obs = observed[exp.quantity]
        ok = exp.matches(obs)
        mismatches += not ok
        if isinstance(exp.value, str):
            witnesses.append((exp.quantity + "==" + exp.value, float(ok)))
        else:
            witnesses.append((exp.quantity, float(obs)))
    witnesses.append(("mismatches", float(mismatches)))
    status = Status.HOLDS if mismatches == 0 else Status.FAILS
    return Verdict(key, status, max(e.tol for e in case.expected), None, witnesses)


def run_all(cases=None):
    cases = CASES if cases is None else cases
    return [run_case(k, cases) for k in cases]
