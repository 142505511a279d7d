import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from delayed_oco.cli import main
from delayed_oco.core import BallDomain, RunConfig
from delayed_oco.data import Example, write_libsvm
from delayed_oco.experiment import ExperimentSpec, emit_plots, read_meta, run_experiment, timing_report
from delayed_oco.learners import make_learner
from delayed_oco.oracles import ftal_decisions
from delayed_oco.simulation import SimulationEngine
from delayed_oco.synthetic import quadratic_losses


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def toy_libsvm(path, count=260, n=6, seed=0):
    rng = np.random.default_rng(seed)
    w = rng.normal(size=n)
    examples = []
    for _ in range(count):
        x = rng.normal(size=n)
        examples.append(Example(np.arange(1, n + 1), x, 1 if x @ w >= 0 else -1))
    with open(path, "w") as fh:
        write_libsvm(examples, fh)


def test_cli_synthetic_outputs(tmp_path, capsys):
    out = tmp_path / "runs"
    code = main(["--algo", "ftdl", "aftdl", "dda", "--rounds", "120", "--agents", "2", "--dmax", "5",
                 "--lambda", "0.5", "--seed", "1", "2", "--out", str(out), "--dump-decisions"])
    assert code == 0
    assert "final_loss" in capsys.readouterr().out
    metrics = read_csv(out / "metrics.csv")
    assert metrics[0] == ["dataset", "algo", "scenario", "seed", "final_loss", "regret", "acc", "per_round_sec"]
    assert len(metrics) == 1 + 3 * 2
    run_dir = out / "synthetic-M2-d5-aftdl-s1"
    assert read_csv(run_dir / "trace.csv")[0] == ["round", "active_agent", "feedback_count", "inst_loss", "cum_loss"]
    assert read_csv(run_dir / "regret.csv")[0] == ["round", "regret", "bound_thm1", "bound_thm2"]
    assert np.loadtxt(run_dir / "decisions.csv", delimiter=",").shape == (120, 5)
    meta = read_meta(run_dir / "run_meta")
    for key in ("seed", "w_max", "G", "schedule_sha256", "max_delay", "lambda", "num_agents", "horizon"):
        assert key in meta
    assert (out / "cumloss_synthetic_M2-d5.png").is_file()
    assert (out / "cumloss_synthetic_M2-d5.csv").is_file()
    regret_csv = read_csv(out / "regret_synthetic-M2-d5-ftdl-s1.csv")
    assert all(row[3] == "1" for row in regret_csv[1:])
    assert (out / "timing.csv").is_file() and (out / "machine_meta").is_file()


def test_run_meta_reproduces_run(tmp_path):
    spec = ExperimentSpec(datasets=("synthetic",), algorithms=("aftdl",), horizon=80, num_agents=3,
                          max_delay=9, lam=0.3, seeds=(4,), out_dir=tmp_path, plots=False)
    first = run_experiment(spec).runs[0]
    meta = read_meta(tmp_path / first.run_id / "run_meta")
    again = ExperimentSpec(datasets=(meta["dataset"],), algorithms=(meta["algo"],), horizon=int(meta["horizon"]),
                           num_agents=int(meta["num_agents"]), max_delay=int(meta["max_delay"]),
                           lam=float(meta["lambda"]), radius=float(meta["radius"]), seeds=(int(meta["seed"]),))
    second = run_experiment(again).runs[0]
    assert np.array_equal(first.trace.decisions, second.trace.decisions)
    assert second.meta["schedule_sha256"] == meta["schedule_sha256"]


def test_cli_toy_libsvm_via_manifest(tmp_path):
    toy_libsvm(tmp_path / "toy.txt")
    (tmp_path / "m.json").write_text(json.dumps({"toy": {"path": "toy.txt", "examples": 260, "features": 6}}))
    out = tmp_path / "runs"
    code = main(["--dataset", "toy", "--manifest", str(tmp_path / "m.json"), "--rounds", "200", "--test-size", "50",
                 "--agents", "2", "--dmax", "10", "--out", str(out)])
    assert code == 0
    rows = read_csv(out / "metrics.csv")[1:]
    assert {r[1] for r in rows} == {"aftdl", "dda"}
    assert all(0.0 <= float(r[6]) <= 1.0 for r in rows)
    meta = read_meta(out / "toy-M2-d10-aftdl-s0" / "run_meta")
    assert float(meta["G"]) == pytest.approx(0.01 + float(meta["w_max"]))


def test_cli_missing_dataset_and_bad_algo(tmp_path, capsys):
    assert main(["--dataset", "a9a", "--data-dir", str(tmp_path), "--out", str(tmp_path / "o")]) == 2
    assert "Download" in capsys.readouterr().err
    assert main(["--algo", "sgd", "--out", str(tmp_path / "o")]) == 2


def test_module_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "delayed_oco", "--rounds", "30", "--no-plots", "--out", str(tmp_path)],
                         capture_output=True, text=True)
    assert res.returncode == 0, res.stderr
    assert (tmp_path / "metrics.csv").is_file()


def test_preset_values():
    spec = ExperimentSpec.preset("paper-20agent")
    assert (spec.num_agents, spec.max_delay, spec.lam, spec.radius, spec.horizon) == (20, 1000, 0.01, 1.0, 8000)
    assert tuple(spec.datasets) == ("ijcnn1", "w8a", "phishing", "a9a")
    assert tuple(spec.algorithms) == ("aftdl", "dda")
    assert ExperimentSpec.preset("paper-2agent").max_delay == 100


def test_cli_reproduces_ftal(tmp_path):
    out = tmp_path / "ftal"
    assert main(["--algo", "aftdl", "--dataset", "synthetic", "--d", "1", "--agents", "1", "--rounds", "150",
                 "--lambda", "0.5", "--seed", "3", "--dump-decisions", "--no-plots", "--out", str(out)]) == 0
    got = np.loadtxt(out / "synthetic-M1-d1-aftdl-s3" / "decisions.csv", delimiter=",")
    losses = quadratic_losses(150, 5, 0.5, seed=3)
    ref = ftal_decisions(losses, BallDomain(5, 1.0), 0.5)
    assert np.max(np.linalg.norm(got - ref, axis=1)) <= 1e-10


def _trace(T=40, seed=0):
    cfg = RunConfig(2, T, 3, 0.5, BallDomain(2, 1.0), seed=seed)
    return SimulationEngine(cfg, quadratic_losses(T, 2, 0.5, seed), make_learner("aftdl", cfg)).run()


def test_emit_plots_contract(tmp_path):
    png = emit_plots([("aftdl", _trace()), ("dda", _trace(seed=1))], tmp_path / "fig", title="toy")
    assert png.is_file() and png.stat().st_size > 0
    rows = read_csv(tmp_path / "fig.csv")
    assert rows[0] == ["round", "aftdl", "dda"] and len(rows) == 41
    with pytest.raises(ValueError):
        emit_plots([], tmp_path / "empty")
    assert not (tmp_path / "empty.png").exists() and not (tmp_path / "empty.csv").exists()


def test_timing_report_keys_and_repeatability():
    spec = ExperimentSpec(datasets=("synthetic",), algorithms=("aftdl", "dda"), horizon=60, max_delay=4, lam=0.5)
    a, b = run_experiment(spec), run_experiment(spec)
    table = timing_report(a)
    assert set(table) == {("synthetic", "M2-d4", "aftdl"), ("synthetic", "M2-d4", "dda")}
    assert all(v > 0 for v in table.values())
    for ra, rb in zip(a.runs, b.runs):
        assert np.array_equal(ra.trace.feedback_count, rb.trace.feedback_count)
        assert ra.trace.delivered == rb.trace.delivered
