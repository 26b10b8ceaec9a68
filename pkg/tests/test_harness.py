import json

import pytest

from spectral_forrelation import harness
from spectral_forrelation.harness import (
    COVERAGE,
    EXPERIMENT_COVERS,
    EXPERIMENT_IDS,
    BoundReport,
    Check,
    ExperimentConfig,
    cli,
    run_experiment,
)
from spectral_forrelation.hypercube import ContractError

CHEAP = {
    "E2": dict(n=1, ell=1, T=1, trials=3),
    "E3": dict(n=2, ell=3, r=3),
    "E4": dict(),
    "E5": dict(),
    "E6": dict(n=2, ell=4, r=2, o=1, d=1),
    "E8": dict(),
}


@pytest.fixture(scope="module")
def cheap_reports():
    return {e: run_experiment(ExperimentConfig(e, **kw)) for e, kw in CHEAP.items()}


def test_e2_smallest_case_passes(cheap_reports):
    assert cheap_reports["E2"].passed


def test_e6_small_case_passes(cheap_reports):
    assert cheap_reports["E6"].passed


@pytest.mark.parametrize("experiment", ["E3", "E4", "E5", "E8"])
def test_cheap_defaults_pass(cheap_reports, experiment):
    report = cheap_reports[experiment]
    assert report.passed, report.failures()


def test_e7_passes():
    report = run_experiment(ExperimentConfig("E7", trials=2000))
    assert report.passed, report.failures()


def test_e9_is_informational():
    report = run_experiment(ExperimentConfig("E9", n=8, ell=8, trials=50))
    assert report.passed is None and report.informational
    assert all(c.kind == "info" for c in report.checks)
    assert report.text().startswith("E9 INFO")


def test_coverage_table_is_well_formed():
    assert len(COVERAGE) == 30
    for item, ids in COVERAGE.items():
        assert ids and set(ids) <= set(EXPERIMENT_IDS), item
    for e in EXPERIMENT_IDS:
        assert EXPERIMENT_COVERS[e], f"{e} covers nothing"
    covered = {item for items in EXPERIMENT_COVERS.values() for item in items}
    assert covered == set(COVERAGE)


def test_check_names_map_to_coverage(cheap_reports):
    for e, report in cheap_reports.items():
        prefixes = {c.name.split(":")[0] for c in report.checks}
        assert prefixes <= set(COVERAGE), prefixes - set(COVERAGE)
        assert prefixes == set(EXPERIMENT_COVERS[e]), e


def test_reports_are_reproducible():
    a = run_experiment(ExperimentConfig("E2", seed=4, trials=4)).record()
    b = run_experiment(ExperimentConfig("E2", seed=4, trials=4)).record()
    a.pop("runtime")
    b.pop("runtime")
    assert json.dumps(a, sort_keys=True) == json.dumps(b, sort_keys=True)


def test_sampler_reports_are_reproducible():
    cfg = ExperimentConfig("E7", n=8, ell=8, trials=300, seed=3)
    a, b = run_experiment(cfg).record(), run_experiment(cfg).record()
    assert a["checks"] == b["checks"]


def test_seed_changes_results():
    a = run_experiment(ExperimentConfig("E2", seed=1, trials=2)).record()["checks"]
    b = run_experiment(ExperimentConfig("E2", seed=2, trials=2)).record()["checks"]
    assert a != b


def test_check_kinds():
    assert Check("x", 1.0, 1.0).passed
    assert not Check("x", 1.1, 1.0).passed
    assert Check("x", 1.0, 0.5, "geq").passed
    assert Check("x", 1.0 + 1e-13, 1.0, "eq", 1e-12).passed
    assert not Check("x", 1.1, 1.0, "eq", 1e-12).passed


def test_report_failures_and_text():
    report = BoundReport("E5", [Check("a:b", 2.0, 1.0), Check("a:c", 0.5, 1.0)], 0.1, 0, {}, False, [])
    assert report.passed is False and [c.name for c in report.failures()] == ["a:b"]
    assert report.text().startswith("E5 FAIL")


def test_config_defaults_and_caps():
    cfg = ExperimentConfig("E5").resolved()
    assert (cfg.n, cfg.ell, cfg.v, cfg.r, cfg.o) == (2, 4, 2, 2, 0)
    with pytest.raises(ContractError):
        ExperimentConfig("E2", n=5).resolved()
    with pytest.raises(ContractError):
        ExperimentConfig("E5", r=-1).resolved()
    with pytest.raises(ContractError):
        ExperimentConfig("E5", kappa=0.0).resolved()
    with pytest.raises(ContractError):
        ExperimentConfig("E10").resolved()


def test_gen_then_forrelation(tmp_path, capsys):
    path = tmp_path / "inst.json"
    assert cli(["gen", "--n", "10", "--ell", "16", "--kappa", "0.1", "--seed", "7", "--out", str(path)]) == 0
    assert cli(["forrelation", str(path)]) == 0
    assert "alpha =" in capsys.readouterr().out
    assert cli(["forrelation", str(path), "--format", "record"]) == 0
    record = json.loads(capsys.readouterr().out)
    assert 0 < record["alpha"] <= 1


def test_gen_is_seeded(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    cli(["gen", "--n", "6", "--ell", "5", "--seed", "3", "--out", str(a)])
    cli(["gen", "--n", "6", "--ell", "5", "--seed", "3", "--out", str(b)])
    assert a.read_text() == b.read_text()


def test_verify_strong_exit_codes(tmp_path, capsys):
    path = tmp_path / "inst.json"
    cli(["gen", "--n", "6", "--ell", "4", "--seed", "1", "--out", str(path)])
    code = cli(["verify-strong", str(path), "--v", "2", "--format", "record"])
    record = json.loads(capsys.readouterr().out)
    assert code == (0 if record["is_strong"] else 1)


def test_verify_e2_exits_zero(capsys):
    assert cli(["verify", "E2", "--n", "2", "--ell", "2", "--T", "2", "--trials", "20", "--seed", "1"]) == 0
    assert capsys.readouterr().out.startswith("E2 PASS")


def test_verify_writes_record(tmp_path):
    out = tmp_path / "e5.jsonl"
    assert cli(["verify", "E5", "--format", "record", "--out", str(out)]) == 0
    record = json.loads(out.read_text())
    assert record["experiment"] == "E5" and record["pass"] is True


def test_unknown_flag_exits_two(capsys):
    assert cli(["verify", "E2", "--bogus", "1"]) == 2
    assert "error" in capsys.readouterr().err


def test_missing_command_exits_two():
    assert cli([]) == 2


def test_cap_violation_exits_two(capsys):
    assert cli(["verify", "E2", "--n", "9"]) == 2
    assert "exceeds cap" in capsys.readouterr().err


def test_bad_instance_file_exits_two(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"n": 3}')
    assert cli(["forrelation", str(bad)]) == 2
    assert cli(["forrelation", str(tmp_path / "missing.json")]) == 2


def test_help_exits_zero(capsys):
    assert cli(["--help"]) == 0


def test_module_entry_point():
    import subprocess
    import sys

    proc = subprocess.run([sys.executable, "-m", "spectral_forrelation", "verify", "E6"], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.startswith("E6 PASS")


def test_bound_helpers():
    assert harness.complement_overlap_bound(2, 4, 4) > 1
    assert harness.sampling_upper_bound(2, 2, 10, 16) > 1
