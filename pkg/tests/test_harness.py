import csv
import io
import math

import pytest

from accnest import cli, harness
from accnest.errors import ConfigError
from accnest.harness import ExperimentConfig, run_experiment

SMALL_BOWL = {"n": "40", "tau": "1.0"}
SMALL_RIDGE = {"m": "60", "n": "90", "sigma_max": "20"}


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_trace_header_and_rows(tmp_path):
    out = tmp_path / "t.csv"
    res = run_experiment(ExperimentConfig("bowl", "adaptive1", params=SMALL_BOWL, out=str(out)))
    rows = read_csv(out)
    assert rows[0] == ["k", "grad_calls", "alpha", "fallback", "f_gap", "x_err", "time_ns"]
    assert len(rows) - 1 == len(res.trace)
    assert rows[1][2] == "" and rows[1][1] == "0"
    calls = [int(r[1]) for r in rows[1:]]
    assert calls == sorted(calls)
    assert {r[3] for r in rows[1:]} <= {"0", "1"}


def test_summary_counts_match_first_crossing(tmp_path):
    res = run_experiment(ExperimentConfig("ridge", "nmul", params=SMALL_RIDGE))
    for thr in harness.F_THRESHOLDS:
        first = next(r for r in res.trace if r.f_gap < thr)
        assert res.summary[f"calls_f{thr:.0e}"] == first.grad_calls
    first = next(r for r in res.trace if r.x_err <= 1e-8)
    assert res.summary["calls_x1e-08"] == first.grad_calls


def test_not_reached_is_empty():
    res = run_experiment(ExperimentConfig("bowl", "nmul", params=SMALL_BOWL, max_grad_calls=5))
    assert res.summary["calls_f1e-12"] == ""
    assert "calls_x1e-08" not in res.summary


def test_no_timing_is_byte_identical(tmp_path):
    paths = [tmp_path / "a.csv", tmp_path / "b.csv"]
    for p in paths:
        assert cli.main(["run", "--problem", "ridge", "--method", "adaptive2", "--seed", "4",
                         "--set", "m=60", "--set", "n=90", "--no-timing", "--out", str(p)]) == 0
    a, b = (p.read_bytes() for p in paths)
    assert a == b
    assert all(line.endswith(b",0") for line in a.splitlines()[1:])


def test_trajectory_projection_bowl(tmp_path):
    traj = tmp_path / "traj.csv"
    res = run_experiment(ExperimentConfig("bowl", "adaptive3", params=SMALL_BOWL,
                                          traj=str(traj)))
    rows = read_csv(traj)
    assert rows[0] == ["k", "x1", "x40"]
    start = 1.0 / math.sqrt(40)
    assert float(rows[1][1]) == pytest.approx(start, rel=1e-15)
    assert float(rows[1][2]) == pytest.approx(start, rel=1e-15)
    # one row per recorded iterate, k = 0..K
    assert len(rows) - 1 == len(res.trace)
    assert abs(float(rows[-1][1])) < 1e-5 and abs(float(rows[-1][2])) < 1e-5


def test_trajectory_coordinates_checked():
    with pytest.raises(ConfigError):
        harness.trajectory_projection([[0.0, 1.0]], 1, 3)
    with pytest.raises(ConfigError):
        harness.trajectory_projection([], 1, 1)


def test_quadratic_bound_column():
    res = run_experiment(ExperimentConfig("quadratic", "nmul", params={"n": "50"},
                                          seed=2, max_grad_calls=2000))
    assert res.summary["bound_violations"] == 0


def test_cgls_runs_on_quadratic_and_ridge():
    for problem, params in [("quadratic", {"n": "30", "kappa": "100"}), ("ridge", SMALL_RIDGE)]:
        res = run_experiment(ExperimentConfig(problem, "cgls", params=params))
        steps = [r.grad_calls for r in res.trace]
        assert steps == list(range(len(steps)))
        assert res.summary["calls_f1e-12"] != ""


def test_compare_picks_best_restart():
    cfgs = [ExperimentConfig("bowl", m, params=SMALL_BOWL, max_grad_calls=3000)
            for m in ("nmul", "nl", "adaptive1")]
    rows, results = harness.compare(cfgs)
    nl_row = rows[1]
    singles = []
    for p in harness.NL_RESTARTS:
        r = run_experiment(ExperimentConfig("bowl", "nl", restart_period=p, params=SMALL_BOWL,
                                            max_grad_calls=3000))
        singles.append(harness._rank_key(r, "f_gap"))
    assert harness._rank_key(results[1], "f_gap") == min(singles)
    assert nl_row["restart"] in (10, 100, 1000, "")
    text = harness.compare_csv(rows)
    assert text.splitlines()[0] == ",".join(harness.COMPARE_HEADER)


def test_compare_rejects_mismatch():
    a = ExperimentConfig("bowl", "nmul", params=SMALL_BOWL)
    with pytest.raises(ConfigError):
        harness.compare([a, ExperimentConfig("ridge", "nmul")])
    with pytest.raises(ConfigError):
        harness.compare([a, ExperimentConfig("bowl", "nl", params={"n": "41"})])
    with pytest.raises(ConfigError):
        harness.compare([a])


@pytest.mark.parametrize("cfg", [
    ExperimentConfig("bowl", "cgls"),
    ExperimentConfig("circle", "nmul"),
    ExperimentConfig("bowl", "adaptive9"),
    ExperimentConfig("bowl", "nl", restart_period=0),
    ExperimentConfig("bowl", "nmul", params={"kappa": "3"}),
])
def test_config_errors(cfg):
    with pytest.raises(ConfigError):
        cfg.validate()


def test_cli_exit_codes(tmp_path, capsys):
    assert cli.main(["run", "--problem", "bowl", "--method", "cgls"]) == cli.EXIT_CONFIG
    assert cli.main(["run", "--problem", "bowl", "--set", "n=abc"]) == cli.EXIT_CONFIG
    assert cli.main(["run", "--config", str(tmp_path / "missing.cfg")]) == cli.EXIT_CONFIG
    assert cli.main([]) == cli.EXIT_CONFIG
    assert cli.main(["run", "--problem", "bowl", "--set", "n=20", "--set", "tau=-1"]) \
        == cli.EXIT_CONFIG
    capsys.readouterr()


def test_cli_divergence_exit_code(monkeypatch):
    from accnest.errors import DivergenceError

    def boom(cfg):
        raise DivergenceError("blew up")

    monkeypatch.setattr(harness, "run_experiment", boom)
    assert cli.main(["run", "--problem", "bowl"]) == cli.EXIT_DIVERGED


def test_cli_config_file_and_overrides(tmp_path, capsys):
    cfg = tmp_path / "exp.cfg"
    cfg.write_text("# small bowl\nproblem = bowl\nmethod = nmul\nn = 30\ntau = 2\n"
                   "max-grad-calls = 50\n")
    assert cli.main(["run", "--config", str(cfg), "--method", "adaptive4"]) == 0
    line = capsys.readouterr().out.strip()
    fields = dict(kv.split("=", 1) for kv in line.split())
    assert fields["method"] == "adaptive4" and fields["problem"] == "bowl"
    assert int(fields["grad_calls"]) <= 50


def test_cli_compare_and_eta(tmp_path, capsys):
    out = tmp_path / "cmp.csv"
    assert cli.main(["compare", "--problem", "bowl", "--set", "n=30", "--set", "tau=1",
                     "--methods", "nmul,adaptive1", "--out", str(out)]) == 0
    rows = list(csv.DictReader(io.StringIO(out.read_text())))
    assert [r["method"] for r in rows] == ["nmul", "adaptive1"]
    assert int(rows[1]["calls_f1e-12"]) < int(rows[0]["calls_f1e-12"])
    assert cli.main(["eta", "--rho", "0.01", "--d", "1", "--samples", "5"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "alpha,eta" and len(lines) == 6
    assert float(lines[1].split(",")[1]) == pytest.approx(-0.01)
