import dataclasses
import io
import json
import math

import pytest

from opialiter.cli import run_suite
from opialiter.errors import UnknownCaseError
from opialiter.suite import CASES, Expectation, run_all, run_case


def test_every_case_holds():
    for v in run_all():
        assert v.holds, (v.check, v.witnesses)


def test_keys_unique_and_tolerances_positive():
    assert len(CASES) == len(set(CASES)) == 7
    for case in CASES.values():
        assert all(e.tol > 0 for e in case.expected)
        assert case.description


def test_unknown_key_lists_available():
    with pytest.raises(UnknownCaseError) as info:
        run_case("no-such-case")
    assert "two-accumulation-points" in str(info.value)
    with pytest.raises(KeyError):
        run_case("no-such-case")


def test_lambda_empty_values():
    obs = CASES["remark-3.1b-lambda-empty"].build()
    assert obs["norm_lo"] == 1.0 and obs["norm_hi"] == 2.0
    assert obs["norm_sq_hi"] == 4.0
    assert obs["polarization_residual"] <= 1e-12
    assert {obs[k] for k in ("lambda[0]", "lambda[e1]", "lambda[e1+e2]")} == {"fails"}


def test_two_accumulation_values():
    obs = CASES["two-accumulation-points"].build()
    assert obs["even_dev_from_sqrt2"] <= 1e-12
    assert obs["odd_max"] == 0.0
    assert obs["lambda[0]"] == "holds" and obs["lambda[e1]"] == "fails"
    assert obs["psi[0]"] == 1.0


def test_sharp_values():
    obs = CASES["sharp-discontinuous"].build()
    assert abs(obs["image_gap_e5"] - 0.5) <= 1e-12
    assert obs["liminf_image_gap"] == 0.5 and obs["liminf_gap"] == 1.0


def test_rotation_values():
    obs = CASES["rotation-picard-vs-mann"].build()
    assert obs["picard_step_dev"] <= 1e-12
    assert obs["picard_ar"] == "fails" and obs["mann_ar"] == "holds"
    assert obs["mann_limit_norm"] <= 1e-8


def test_corrupted_expectation_fails():
    case = CASES["sharp-discontinuous"]
    bad = dataclasses.replace(case, expected=(Expectation("image_gap_e5", 0.75),))
    cases = dict(CASES, **{case.key: bad})
    v = run_case(case.key, cases)
    assert v.status.value == "fails"
    assert v.witness("mismatches") == 1.0
    assert run_suite(False, io.StringIO(), cases) == 1


def test_run_suite_text_and_json():
    out = io.StringIO()
    assert run_suite(False, out) == 0
    lines = out.getvalue().splitlines()
    assert len(lines) == len(CASES)
    assert all(line.split()[-1] == "holds" for line in lines)
    out = io.StringIO()
    assert run_suite(True, out) == 0
    docs = json.loads(out.getvalue())
    assert [d["check"] for d in docs] == list(CASES)
    assert all(d["status"] == "holds" for d in docs)
    for d in docs:
        assert all(math.isfinite(w["value"]) for w in d["witnesses"])


def test_expectation_validation():
    with pytest.raises(ValueError):
        Expectation("x", 1.0, 0.0)
