import json

import pytest

from smooth_cruiser.__main__ import run_cli


def _run(capsys, *argv):
    code = run_cli(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_solve_reports_value_table(capsys):
    code, out, _ = _run(capsys, "solve", "--env", "chain:5", "--unregularized")
    assert code == 0
    report = json.loads(out)
    assert len(report["V"]) == 5
    assert len(report["Q"][0]) == 2
    assert report["residual"] <= 1e-10
    assert report["regularization_gap"] <= report["regularization_gap_bound"] + 1e-9
    assert out.endswith("}\n")


def test_complexity_csv(capsys):
    code, out, _ = _run(capsys, "complexity")
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == (
        "epsilon,simulated,bound_lemma,bound_sparse,predicted_calls,"
        "simulated_log10,bound_lemma_log10,bound_sparse_log10,predicted_calls_log10"
    )
    assert len(lines) == 41


def test_complexity_json_points(capsys):
    code, out, _ = _run(capsys, "complexity", "--points", "5", "--format", "json")
    assert code == 0
    rows = json.loads(out)
    assert len(rows) == 5
    assert rows[0]["bound_lemma"] is None


def test_complexity_ceiling_depth(capsys, caplog):
    argv = ("complexity", "--points", "8", "--format", "json")
    code, out, _ = _run(capsys, *argv, "--depth-rounding", "ceil")
    assert code == 0
    rows = json.loads(out)
    assert all(row["bound_lemma"] is None for row in rows)
    assert "bound_lemma" in caplog.text
    for row in rows[:2]:
        assert row["simulated"] == row["bound_sparse"]


def test_lambda_sweep_csv(capsys):
    code, out, _ = _run(capsys, "lambda-sweep", "--points", "6")
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "lambda,epsilon,calls,sparse_calls,ratio,condition_violated"
    assert len(lines) == 7
    assert lines[1].endswith(",false")


def test_plan_counts_and_seed(capsys):
    argv = ("plan", "--env", "chain:5", "--epsilon", "1.0", "--n-scale", "0.001")
    code, out, _ = _run(capsys, *argv, "--seed", "7", "--exact")
    assert code == 0
    report = json.loads(out)
    assert report["oracle_calls"] == report["predicted_calls"] == 4488
    assert report["seed"] == 7
    assert report["v_exact"] is not None
    _, again, _ = _run(capsys, *argv, "--seed", "7", "--exact")
    assert again == out


def test_plan_output_file_is_byte_identical(capsys, tmp_path):
    paths = [tmp_path / "a.json", tmp_path / "b.json"]
    for path in paths:
        code, out, _ = _run(
            capsys,
            "plan",
            "--env",
            "chain:5",
            "--epsilon",
            "0.5",
            "--n-scale",
            "0.001",
            "--noisy-rewards",
            "--out",
            str(path),
        )
        assert code == 0
        assert out == ""
    assert paths[0].read_bytes() == paths[1].read_bytes()


def test_consistency_with_runs_file(capsys, tmp_path):
    runs = tmp_path / "runs.csv"
    code, out, _ = _run(
        capsys,
        "consistency",
        "--env",
        "chain:5",
        "--epsilon",
        "0.35",
        "--n-sim",
        "50",
        "--seed",
        "3",
        "--runs-out",
        str(runs),
    )
    assert code == 0
    report = json.loads(out)
    assert report["n_sim"] == 50
    assert report["runs"] is None
    lines = runs.read_text().splitlines()
    assert lines[0] == "run_index,output"
    assert len(lines) == 51


def test_consistency_degenerate_accuracy(capsys):
    code, _, err = _run(capsys, "consistency", "--env", "chain:5", "--epsilon", "50")
    assert code == 2
    assert err.startswith("error: degenerate_run:")


@pytest.mark.parametrize(
    "argv",
    [
        ("solve", "--env", "chain:5", "--gamma", "1.5"),
        ("plan", "--env", "chain:5", "--epsilon", "0"),
        ("solve", "--env", "chain:5", "-K", "4"),
    ],
)
def test_invalid_arguments_exit_two(capsys, argv):
    code, out, err = _run(capsys, *argv)
    assert code == 2
    assert out == ""
    assert err.startswith("error: invalid_argument:")


@pytest.mark.parametrize(
    "argv",
    [
        ("teleport",),
        ("solve", "--env", "torus:3"),
        ("plan", "--env", "chain:5"),
    ],
)
def test_usage_errors_exit_two(capsys, argv):
    code, _, err = _run(capsys, *argv)
    assert code == 2
    assert err.startswith("error: usage:")


def test_condition_violation_is_reported(capsys):
    code, _, err = _run(
        capsys,
        "plan",
        "--env",
        "chain:5",
        "--epsilon",
        "1.0",
        "--gamma",
        "0.001",
        "--lambda",
        "100",
        "--delta-prime",
        "0.9",
    )
    assert code == 2
    assert err.startswith("error: invalid_configuration:")


def test_help_exits_cleanly(capsys):
    code, out, _ = _run(capsys, "--help")
    assert code == 0
    assert "consistency" in out


def test_selftest_passes(capsys):
    code, out, _ = _run(capsys, "selftest")
    assert code == 0
    assert out.splitlines()[-1] == "14/14 checks passed"


def test_selftest_json(capsys):
    code, out, _ = _run(capsys, "selftest", "--format", "json")
    assert code == 0
    checks = json.loads(out)
    assert {c["name"] for c in checks} >= {"oracle_determinism", "clip_contraction"}
    assert all(c["passed"] for c in checks)


def test_selftest_detects_wrong_reference(capsys):
    code, out, _ = _run(capsys, "selftest", "--corrupt", "softmax_weight=0.5")
    assert code == 1
    assert "FAIL softmax_weight" in out


def test_selftest_rejects_unknown_override(capsys):
    code, _, err = _run(capsys, "selftest", "--corrupt", "nonsense=1")
    assert code == 2
    assert "invalid_argument" in err


def test_seed_from_environment(capsys, monkeypatch):
    monkeypatch.setenv("SMOOTHCRUISER_SEED", "5")
    argv = ("plan", "--env", "chain:5", "--epsilon", "9.0", "--n-scale", "0.01")
    code, out, _ = _run(capsys, *argv)
    assert code == 0
    assert json.loads(out)["seed"] == 5
    _, out, _ = _run(capsys, *argv, "--seed", "2")
    assert json.loads(out)["seed"] == 2


def test_bad_environment_setting(capsys, monkeypatch):
    monkeypatch.setenv("SMOOTHCRUISER_WORKERS", "zero")
    code, _, err = _run(capsys, "solve", "--env", "chain:5")
    assert code == 2
    assert "SMOOTHCRUISER_WORKERS" in err
