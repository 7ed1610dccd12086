import json
import math
from pathlib import Path

import pytest

from finslerlab import cli

from conftest import finsleroid_doc

GOLDEN = Path(__file__).parent / "golden" / "finsleroid_axis_pair_all.json"


def run(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_report_schema(capsys):
    code, out, _ = run(capsys, "check", "--spec", "bundled:euclidean", "--suite", "identities",
                       "--samples", "5")
    rep = json.loads(out)
    assert code == 0 and rep["version"] == 1 and rep["suite"] == "identities"
    assert set(rep) == {"version", "suite", "spec_digest", "seed", "checks", "status", "pass", "wall_time"}
    for c in rep["checks"]:
        assert set(c) == {"name", "anchor", "samples", "skipped", "max_residual", "tolerance",
                          "bound", "pass", "status"}
    assert rep["pass"] == all(c["pass"] for c in rep["checks"])


def test_euclidean_all_passes_with_exact_zeros():
    rep = cli.run_suite("all", cli.load_spec("bundled:euclidean"), samples=10)
    assert rep["status"] == "pass"
    vanish = {c["name"]: c for c in rep["checks"]}["riemannian_landsberg_berwald_vanish"]
    assert vanish["max_residual"] <= 1e-12


def test_mismatched_axis_reports_hypothesis_not_established(capsys):
    code, out, _ = run(capsys, "check", "--spec", "bundled:mismatched_axis", "--suite", "rigidity",
                       "--samples", "20")
    rep = json.loads(out)
    assert code == 0
    assert rep["status"] == "hypothesis_not_established" and rep["pass"] is False
    hyp = {c["name"]: c for c in rep["checks"]}["hypothesis_contracted_berwald"]
    assert hyp["max_residual"] > 1e-3
    assert any(c["status"] == "hypothesis_not_established" for c in rep["checks"])
    assert not any(c["status"] == "fail" for c in rep["checks"])


def test_residual_failure_exits_one(capsys):
    # a tolerance scale this small turns round-off into failures
    code, out, _ = run(capsys, "check", "--spec", "bundled:finsleroid", "--suite", "identities",
                       "--samples", "3", "--tol-scale", "1e-12")
    assert code == 1 and json.loads(out)["status"] == "fail"


@pytest.mark.parametrize("argv", [
    ["nonsense"],
    ["check", "--spec", "bundled:euclidean", "--suite", "bogus"],
    ["check", "--spec", "/nonexistent/spec.json", "--suite", "all"],
    ["check", "--spec", "bundled:no_such_spec", "--suite", "all"],
    ["eval", "--spec", "bundled:euclidean", "--x", "0,0", "--y", "1,0,0"],
    ["riccati", "--K", "4", "--fstar", "1"],
    ["check", "--spec", "bundled:finsleroid_2d", "--suite", "rigidity"],
    ["compare", "--spec", "bundled:finsleroid_2d"],
    ["check", "--spec", "bundled:euclidean", "--suite", "all", "--tol-scale", "0"],
])
def test_usage_and_spec_errors_exit_two(capsys, argv):
    assert run(capsys, *argv)[0] == 2


def test_two_dimensional_message(capsys):
    _, _, err = run(capsys, "check", "--spec", "bundled:finsleroid_2d", "--suite", "rigidity")
    assert "dimension" in err


def test_bad_spec_file_exits_two(capsys, tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(finsleroid_doc(charge=2.5)))
    code, _, err = run(capsys, "check", "--spec", str(path), "--suite", "identities")
    assert code == 2 and "charge" in err


def test_spec_file_roundtrip(capsys, tmp_path):
    path = tmp_path / "f.json"
    path.write_text(json.dumps(finsleroid_doc(charge=0.5)))
    code, out, _ = run(capsys, "eval", "--spec", str(path), "--x", "0,0,0", "--y", "0.2,0.5,0.3",
                       "--tensor", "cartan")
    assert code == 0 and "C" in json.loads(out)["tensors"]


def test_eval_tensor_choices(capsys):
    for tensor in ("g", "cartan", "spray", "berwald", "landsberg", "pack"):
        code, out, _ = run(capsys, "eval", "--spec", "bundled:finsleroid", "--x", "0.1,0,0",
                           "--y", "0.2,0.5,0.3", "--tensor", tensor)
        assert code == 0 and json.loads(out)["tensors"]


def test_riccati_command(capsys):
    code, out, _ = run(capsys, "riccati", "--K", "1.6", "--fstar", "2", "--format", "table")
    assert code == 0 and "riccati_closed_form" in out


def test_compare_command(capsys):
    code, out, _ = run(capsys, "compare", "--spec", "bundled:finsleroid_axis_pair", "--grid", "21")
    rep = json.loads(out)
    assert code == 0 and rep["status"] == "pass"


@pytest.mark.parametrize("quantity", ["indicatrix-curvature", "gram1", "gram2", "b-contraction"])
def test_sweep_command(capsys, quantity):
    code, out, _ = run(capsys, "sweep", "--spec", "bundled:finsleroid_axis_pair", "--quantity",
                       quantity, "--samples", "20", "--seed", "3")
    stats = json.loads(out)["sweep"]
    assert code == 0 and stats["samples"] + stats["skipped"] == 20
    assert stats["min"] <= stats["mean"] <= stats["max"]


def test_list_specs(capsys):
    code, out, _ = run(capsys, "list-specs")
    assert code == 0 and "finsleroid_axis_pair" in out.split()


def test_determinism(capsys):
    argv = ["check", "--spec", "bundled:conformal_finsleroid", "--suite", "all", "--samples", "10",
            "--seed", "7"]
    a = cli.strip_timing(json.loads(run(capsys, *argv)[1]))
    b = cli.strip_timing(json.loads(run(capsys, *argv)[1]))
    assert a == b
    c = cli.strip_timing(json.loads(run(capsys, *argv[:-1], "8")[1]))
    assert c != a


def residuals_match(new, old, tol):
    if new == old:
        return True
    if math.isnan(new) or math.isnan(old):
        return False
    # round-off sized residuals may move between platforms
    tiny = 1e-3 * tol
    if abs(new) <= tiny and abs(old) <= tiny:
        return True
    return abs(new - old) <= 1e-6 * max(abs(new), abs(old))


def golden_diff(report, golden):
    problems = []
    for key in ("version", "suite", "spec_digest", "seed", "status", "pass"):
        if report[key] != golden[key]:
            problems.append(f"{key}: {report[key]!r} != {golden[key]!r}")
    names = [c["name"] for c in report["checks"]]
    if names != [c["name"] for c in golden["checks"]]:
        problems.append("check list differs")
        return problems
    for new, old in zip(report["checks"], golden["checks"]):
        for key in ("anchor", "samples", "skipped", "tolerance", "bound", "pass", "status"):
            if new[key] != old[key]:
                problems.append(f"{new['name']}.{key}: {new[key]!r} != {old[key]!r}")
        if not residuals_match(new["max_residual"], old["max_residual"], old["tolerance"]):
            problems.append(f"{new['name']}.max_residual: {new['max_residual']!r} vs {old['max_residual']!r}")
    return problems


def test_golden_report():
    golden = json.loads(GOLDEN.read_text())
    report = cli.strip_timing(cli.run_suite("all", cli.load_spec("bundled:finsleroid_axis_pair")))
    assert golden_diff(report, golden) == []
    assert report["status"] == "pass"


@pytest.mark.parametrize("suite", ["identities", "conformal"])
def test_two_dimensional_suites_still_run(suite):
    rep = cli.run_suite(suite, cli.load_spec("bundled:finsleroid_2d"), samples=200, seed=5)
    assert rep["status"] == "pass"
