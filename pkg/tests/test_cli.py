import json
import math
import os
import shutil
from pathlib import Path

import pytest

from opialiter.cli import check_trace, main, parse_scenario, run_scenario
from opialiter.errors import ValidationError

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"

MANN = {
    "mode": {"kind": "dense", "dim": 2},
    "domain": {"kind": "ball", "radius": 1.0},
    "operator": {"kind": "rotation", "theta": 1.5707963267948966},
    "scheme": {"kind": "mann", "tau": 0.5},
    "x0": [1.0, 0.0],
    "max_iter": 200,
    "checks": ["ar", {"name": "fejer", "y": [0.0, 0.0]}, "opial"],
}
CONTRACTION = {
    "domain": {"kind": "ball", "center": [1.0, 0.0], "radius": 2.0},
    "operator": {"kind": "affine_contraction", "scale": 0.5, "shift": [0.5, 0.0]},
    "scheme": "picard",
    "x0": [0.0, 0.0],
    "max_iter": 100,
    "stop_tol": 1e-12,
    "window": {"burn_in": 10, "window": 10},
}
PICARD_ROT = dict(MANN, scheme="picard", checks=["ar"])


def write(tmp_path, doc, name="s.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return p


def statuses(report):
    return {v.check: v.status.value for v in report.verdicts}


def test_mann_rotation_scenario(tmp_path):
    rep = run_scenario(write(tmp_path, MANN), tmp_path / "out")
    assert statuses(rep) == {"ar": "holds", "fejer": "holds", "opial": "holds"}
    assert rep.trace["stop_reason"] == "max_iter"
    assert rep.trace["final_residual"] <= 1e-8
    assert (tmp_path / "out" / "report.json").exists()
    assert (tmp_path / "out" / "trace.csv").exists()
    assert rep.artifacts == {"trace": "trace.csv", "report": "report.json"}


def test_contraction_scenario(tmp_path):
    rep = run_scenario(write(tmp_path, CONTRACTION), tmp_path / "out")
    assert rep.trace["stop_reason"] == "tolerance"
    lim = rep.trace["final_point"]
    assert math.hypot(lim[0] - 1.0, lim[1]) <= 1e-10
    # default checks
    assert [v.check for v in rep.verdicts] == ["ar", "residual", "lambda", "opial"]


def test_missing_x0_names_field(tmp_path):
    doc = dict(MANN)
    del doc["x0"]
    with pytest.raises(ValidationError, match="x0"):
        run_scenario(write(tmp_path, doc), tmp_path / "out")


@pytest.mark.parametrize("patch,field", [
    ({"colour": 1}, "colour"),
    ({"scheme": {"kind": "mann", "tau": 1.5}}, "scheme.tau"),
    ({"tolerances": {"ar": 0.0}}, "tolerances.ar"),
    ({"tolerances": {"arr": 1e-8}}, "tolerances.arr"),
    ({"x0": [3.0, 0.0]}, "x0"),
    ({"x0": [1.0, 0.0, 0.0]}, "x0"),
    ({"max_iter": 0}, "max_iter"),
    ({"checks": ["ar", "wobble"]}, "checks"),
    ({"checks": ["ar", "ar"]}, "checks"),
    ({"mode": "dense"}, "mode"),
    ({"window": {"burn_in": 1}}, "window"),
])
def test_invalid_scenarios_name_field(patch, field):
    doc = dict(MANN, **patch)
    with pytest.raises(ValidationError) as info:
        parse_scenario(doc)
    assert info.value.field == field


def test_json_syntax_error_reports_line(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text('{\n  "x0": [1,\n}')
    assert main(["run", str(p), "-o", str(tmp_path / "o")]) == 2


def test_exit_codes(tmp_path, capsys):
    assert main(["run", str(write(tmp_path, MANN)), "-o", str(tmp_path / "a")]) == 0
    assert main(["run", str(write(tmp_path, PICARD_ROT, "p.json")), "-o", str(tmp_path / "b")]) == 1
    doc = dict(MANN, operator={"kind": "scaling", "c": 2.0}, x0=[0.3, 0.0], scheme="picard")
    assert main(["run", str(write(tmp_path, doc, "e.json")), "-o", str(tmp_path / "c")]) == 3
    assert "x_2" in capsys.readouterr().err
    with pytest.raises(SystemExit) as info:
        main(["frobnicate"])
    assert info.value.code == 2


def test_regularized_scenario(tmp_path):
    doc = {
        "domain": {"kind": "ball", "radius": 1.0},
        "operator": {"kind": "rotation", "theta": 1.5707963267948966},
        "scheme": {"kind": "regularized", "eps0": 0.1, "rho": 0.5, "count": 8},
        "x0": [0.0, 0.0],
        "max_iter": 1,
    }
    rep = run_scenario(write(tmp_path, doc), tmp_path / "out")
    assert statuses(rep) == {"regularized": "holds"}
    assert rep.trace["length"] == 8


def test_sparse_scenario(tmp_path):
    rep = run_scenario(SCENARIOS / "sparse_half_radial.json", tmp_path / "out")
    assert rep.artifacts["trace"] == "trace.jsonl"
    assert all(v.holds for v in rep.verdicts)


def test_every_shipped_scenario_runs(tmp_path):
    for p in sorted(SCENARIOS.glob("*.json")):
        rep = run_scenario(p, tmp_path / p.stem)
        names = [v.check for v in rep.verdicts]
        assert len(names) == len(set(names))


def test_echo_is_lossless(tmp_path):
    p = write(tmp_path, MANN)
    run_scenario(p, tmp_path / "out")
    report = json.loads((tmp_path / "out" / "report.json").read_text())
    assert report["scenario"] == MANN


def test_report_is_byte_deterministic(tmp_path):
    p = SCENARIOS / "projection_box_mann.json"
    run_scenario(p, tmp_path / "a", plot_data=True)
    run_scenario(p, tmp_path / "b", plot_data=True)
    for name in os.listdir(tmp_path / "a"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_seed_env_override(tmp_path, monkeypatch):
    doc = dict(MANN, checks=["lambda"], seed=1)
    p = write(tmp_path, doc)
    base = run_scenario(p, tmp_path / "a")
    monkeypatch.setenv("OPIALITER_SEED", "99")
    other = run_scenario(p, tmp_path / "b")
    assert base.seed == 1 and other.seed == 99
    assert base.verdicts[0].witnesses != other.verdicts[0].witnesses
    monkeypatch.setenv("OPIALITER_SEED", "x")
    with pytest.raises(ValidationError):
        run_scenario(p, tmp_path / "c")


def test_plot_data(tmp_path):
    run_scenario(write(tmp_path, MANN), tmp_path / "out", plot_data=True)
    text = (tmp_path / "out" / "plot_ar.csv").read_text().splitlines()
    assert text[0] == "step,series,value"
    assert len(text) == 201


def test_check_trace_examples(tmp_path):
    run_scenario(write(tmp_path, PICARD_ROT), tmp_path / "p")
    rep = check_trace(tmp_path / "p" / "trace.csv", ["ar"])
    v = rep.verdicts[0]
    assert v.status.value == "fails"
    assert v.witness("step_lo") == pytest.approx(math.sqrt(2), abs=1e-12)
    assert v.witness("step_hi") == pytest.approx(math.sqrt(2), abs=1e-12)

    run_scenario(write(tmp_path, CONTRACTION, "c.json"), tmp_path / "c")
    rep = check_trace(tmp_path / "c" / "trace.csv", ["lambda"],
                      {"probes": [[1.0, 0.0]], "window": None})
    v = rep.verdicts[0]
    assert v.holds
    assert v.witness("psi[0]") == pytest.approx(0.0, abs=1e-9)

    run_scenario(write(tmp_path, MANN, "m.json"), tmp_path / "m")
    rep = check_trace(tmp_path / "m" / "trace.csv", [{"name": "fejer", "y": [0.0, 0.0]}])
    assert rep.verdicts[0].holds


def test_check_subcommand(tmp_path, capsys):
    run_scenario(write(tmp_path, MANN), tmp_path / "m")
    trace = str(tmp_path / "m" / "trace.csv")
    assert main(["check", trace, "--checks", "ar,fejer", "--y", "[0, 0]", "--json"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert [v["check"] for v in doc["verdicts"]] == ["ar", "fejer"]
    assert main(["check", trace, "--checks", "ar", "--burn-in", "500", "--window", "10"]) == 3
    assert main(["check", trace, "--checks", "ar", "--tol", "bogus=1"]) == 2
    assert main(["check", str(tmp_path / "missing.csv"), "--checks", "ar"]) == 2


def test_zoo_and_suite_subcommands(capsys):
    assert main(["zoo"]) == 0
    out = capsys.readouterr().out
    assert "half_radial" in out and "affine_contraction" in out
    assert main(["suite"]) == 0
    assert main(["suite", "--json"]) == 0


def test_console_script_installed():
    assert shutil.which("opialiter") is not None
