import json
import math
import os
import subprocess
import sys
from importlib import resources

import pytest

from flatcs import __version__
from flatcs.cli import main

SCENARIOS = resources.files("flatcs").joinpath("scenarios")


def bundled(name):
    return str(SCENARIOS.joinpath(name))


def write(tmp_path, doc, name="s.json"):
    p = tmp_path / name
    p.write_text(doc if isinstance(doc, str) else json.dumps(doc))
    return str(p)


def run_main(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, (json.loads(out.out) if out.out.strip() else None), out.err


def test_verify_passes_on_the_identity_scenario(capsys, tmp_path):
    target = tmp_path / "report.json"
    code, report, _ = run_main(capsys, "verify", "--scenario", bundled("su2_identities.json"), "--json", str(target))
    assert code == 0 and report["passed"]
    assert report["artifact"] == {"name": "flatcs", "version": __version__}
    names = [r["name"] for r in report["records"]]
    assert "bianchi" in names and "flat_gauge_change_density" in names and "transgression_4d" not in names
    assert all(r["anchor"] for r in report["records"])
    assert json.loads(target.read_text()) == report


def test_cs_matches_the_stated_value(capsys):
    code, report, _ = run_main(capsys, "cs", "--scenario", bundled("abelian_cs.json"))
    rec = report["records"][0]
    assert code == 0 and rec["expected"] == pytest.approx(4 * math.pi**3)
    assert rec["value"] == pytest.approx(4 * math.pi**3, abs=1e-9)


def test_failing_checks_exit_with_one(capsys, tmp_path):
    doc = {"group": "u1", "dim": 3, "fields": {"A": "i*sin(x)*dy + i*cos(x)*dz"}, "expected": {"cs": 1.0}}
    code, report, _ = run_main(capsys, "cs", "--scenario", write(tmp_path, doc))
    assert code == 1 and not report["passed"]
    assert report["records"][0]["value"] == pytest.approx(8 * math.pi**3, rel=1e-12)


def test_verify_reports_inapplicable_identities(capsys, tmp_path):
    doc = {"group": "su2", "dim": 3, "checks": ["flat_gauge_change_density"],
           "fields": {"A": "sin(y)*i*dx", "A0": "sin(z)*i*dx + cos(x)*j*dy", "u": "qexp([sin(x), 0, 0])"}}
    code, report, _ = run_main(capsys, "verify", "--scenario", write(tmp_path, doc))
    assert code == 1 and "flat reference" in report["records"][0]["error"]


def test_grad_and_gauge_orbit(capsys):
    code, report, _ = run_main(capsys, "grad", "--scenario", bundled("su2_identities.json"))
    assert code == 0 and [r["name"] for r in report["records"]] == ["gradient", "gauge_orbit"]


def test_degree_of_a_small_field_is_zero(capsys, tmp_path):
    doc = {"group": "su2", "dim": 3, "grid": 12, "fields": {"u": "qexp([0.3*sin(x), 0.2*cos(y), 0.1])"}}
    code, report, _ = run_main(capsys, "degree", "--scenario", write(tmp_path, doc), "--oracle")
    assert code == 0
    deg, oracle = report["records"]
    assert deg["nearest_integer"] == 0 and oracle["value"] == 0 and oracle["preimages"] == 0


def test_flatten_writes_a_log(capsys, tmp_path):
    doc = {"group": "su2", "dim": 3, "holonomy": {"angles": [["pi/2"], [0], [0]]},
           "fields": {"A": "[0.5 + 0.002*sin(y), 0.001*cos(0.5*x), 0]*dx + [0.001*cos(z), 0, 0.002*cos(0.5*x)]*dy"}}
    log = tmp_path / "log.csv"
    code, report, _ = run_main(capsys, "flatten", "--scenario", write(tmp_path, doc), "--bandwidth", "2",
                               "--log", str(log))
    rec = report["records"][0]
    assert code == 0 and rec["value"] < 1e-10
    lines = log.read_text().splitlines()
    assert lines[0] == "iteration,residual,step" and len(lines) == rec["iterations"] + 2


def test_normalize_needs_no_scenario(capsys):
    code, report, _ = run_main(capsys, "normalize")
    assert code == 0 and report["scenario"] is None
    values = {r["name"]: r["value"] for r in report["records"]}
    assert values["lambda_star"] == pytest.approx(1 / (4 * math.pi**2))


def test_usage_and_diagnostic_errors_exit_with_two(capsys, tmp_path):
    code, report, err = run_main(capsys, "verify", "--scenario", write(tmp_path, '{"group": "su2", "dim": 3, "fields": {"A": "i*dx +"}}', "bad.json"))
    assert code == 2 and report is None and "fields.A:1:" in err
    code, _, err = run_main(capsys, "verify", "--scenario", str(tmp_path / "missing.json"))
    assert code == 2 and "cannot read" in err
    doc = {"group": "su2", "dim": 3, "fields": {"A": "i*dx"}, "checks": ["no_such_check"]}
    code, _, err = run_main(capsys, "verify", "--scenario", write(tmp_path, doc))
    assert code == 2 and "unknown check" in err
    code, _, err = run_main(capsys, "degree", "--scenario", write(tmp_path, doc))
    assert code == 2 and "needs field" in err
    with pytest.raises(SystemExit) as exc:
        main(["degree", "--scenario", "x.json", "--regular-value", "1,2"])
    assert exc.value.code == 2


def test_radial_warning_goes_to_stderr(capsys, tmp_path):
    doc = {"group": "su2", "dim": 3, "checks": ["bianchi"], "fields": {"A": "0.1*r*i*dx"}}
    code, report, err = run_main(capsys, "verify", "--scenario", write(tmp_path, doc))
    assert "warning" in err and report["warnings"]


def _cli(args, threads):
    env = dict(os.environ, FLATCS_THREADS=str(threads))
    return subprocess.run([sys.executable, "-m", "flatcs.cli", *args], capture_output=True, env=env, check=False)


def test_reports_are_byte_identical_across_thread_counts():
    args = ["verify", "--scenario", bundled("su2_identities.json")]
    one, four = _cli(args, 1), _cli(args, 4)
    assert one.returncode == four.returncode == 0
    assert one.stdout == four.stdout
