"""Experiment orchestration: datasets x algorithms x seeds -> traces, metrics, plots."""

from __future__ import annotations

import csv
import hashlib
import logging
import platform
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from delayed_oco.core import BallDomain, FeedbackMode, RunConfig, RunTrace, generate_delay_schedule
from delayed_oco.data import DATASETS, ExperimentDataset, compute_budget, load_dataset, sample_and_split
from delayed_oco.learners import LEARNERS, make_learner
from delayed_oco.oracles import RegretReport, offline_optimum, regret_curve, test_accuracy
from delayed_oco.simulation import SimulationEngine
from delayed_oco.synthetic import hinge_dataset, quadratic_losses

log = logging.getLogger(__name__)

__all__ = [
    "ExperimentResult",
    "ExperimentSpec",
    "MetricsRow",
    "PRESETS",
    "RunResult",
    "emit_plots",
    "run_experiment",
    "run_single",
    "timing_report",
]

BENCHMARK_DATASETS = ("ijcnn1", "w8a", "phishing", "a9a")
PRESETS = {
    "paper-2agent": {"num_agents": 2, "max_delay": 100},
    "paper-20agent": {"num_agents": 20, "max_delay": 1000},
}
MODE_OF = {"ftdl": FeedbackMode.FULL_LOSS, "aftdl": FeedbackMode.SURROGATE, "dda": FeedbackMode.GRADIENT}


@dataclass
class ExperimentSpec:
    datasets: Sequence[str] = BENCHMARK_DATASETS
    algorithms: Sequence[str] = ("aftdl", "dda")
    num_agents: int = 2
    max_delay: int = 100
    horizon: int = 8000
    test_size: int = 2000
    lam: float = 0.01
    radius: float = 1.0
    seeds: Sequence[int] = (0,)
    out_dir: Path | None = None
    scenario: str | None = None
    data_dir: Path | None = None
    manifest: dict | None = None
    synthetic_kind: str = "quadratic"
    synthetic_dim: int = 5
    activation_policy: str = "round-robin"
    dump_decisions: bool = False
    dump_aggregates: bool = False
    plots: bool = True

    def __post_init__(self) -> None:
        unknown = [a for a in self.algorithms if a not in LEARNERS]
        if unknown:
            raise ValueError(f"unknown algorithm(s) {unknown}; choose from {sorted(LEARNERS)}")
        if self.synthetic_kind not in ("quadratic", "hinge"):
            raise ValueError("synthetic_kind must be 'quadratic' or 'hinge'")
        if self.scenario is None:
            self.scenario = f"M{self.num_agents}-d{self.max_delay}"

    @classmethod
    def preset(cls, name: str, **overrides) -> ExperimentSpec:
        if name not in PRESETS:
            raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
        kwargs = {"scenario": name, **PRESETS[name]}
        kwargs.update(overrides)
        return cls(**kwargs)


@dataclass
class MetricsRow:
    dataset: str
    algo: str
    scenario: str
    seed: int
    final_loss: float
    regret: float
    acc: float
    per_round_sec: float


@dataclass
class RunResult:
    dataset: str
    algo: str
    scenario: str
    seed: int
    trace: RunTrace
    report: RegretReport
    accuracy: float
    G: float
    w_max: float
    meta: dict
    aggregates: list = field(default_factory=list)

    @property
    def run_id(self) -> str:
        return f"{self.dataset}-{self.scenario}-{self.algo}-s{self.seed}"

    def metrics(self) -> MetricsRow:
        return MetricsRow(
            self.dataset,
            self.algo,
            self.scenario,
            self.seed,
            float(self.trace.cumulative_loss[-1]),
            self.report.final,
            self.accuracy,
            float(self.trace.round_seconds.mean()),
        )


@dataclass
class ExperimentResult:
    spec: ExperimentSpec
    runs: list[RunResult] = field(default_factory=list)

    @property
    def metrics(self) -> list[MetricsRow]:
        return [r.metrics() for r in self.runs]

    def get(self, dataset: str, algo: str, seed: int | None = None) -> RunResult:
        for r in self.runs:
            if r.dataset == dataset and r.algo == algo and (seed is None or r.seed == seed):
                return r
        raise KeyError((dataset, algo, seed))


@dataclass
class _Problem:
    losses: list
    dataset: ExperimentDataset | None
    w_max: float
    G: float
    meta: dict


def _problem(spec: ExperimentSpec, name: str, seed: int, cache: dict) -> _Problem:
    T, lam, R = spec.horizon, spec.lam, spec.radius
    if name == "synthetic":
        if spec.synthetic_kind == "quadratic":
            losses = quadratic_losses(T, spec.synthetic_dim, lam, seed)
            a_max = max(float(np.linalg.norm(loss.anchor)) for loss in losses)
            return _Problem(losses, None, a_max, lam * (R + a_max), {"synthetic": "quadratic", "anchor_max": a_max})
        ds = hinge_dataset(T, spec.synthetic_dim, seed, test=spec.test_size)
        w_max, G = compute_budget(ds, lam, R)
        return _Problem(ds.hinge_losses(lam), ds, w_max, G, {"synthetic": "hinge"})
    if name not in cache:
        cache[name] = load_dataset(name, spec.data_dir, spec.manifest)
    examples, n = cache[name]
    ds = sample_and_split(examples, n, total=T + spec.test_size, train=T, seed=seed, name=name)
    w_max, G = compute_budget(ds, lam, R)
    digest = hashlib.sha256(np.ascontiguousarray(ds.sample_indices, dtype="<i8").tobytes()).hexdigest()
    return _Problem(ds.hinge_losses(lam), ds, w_max, G, {"w_max_scope": "sample", "sample_sha256": digest})


def run_single(spec: ExperimentSpec, problem: _Problem, algo: str, seed: int, dataset: str) -> RunResult:
    n = problem.losses[0].dimension
    config = RunConfig(
        num_agents=spec.num_agents,
        horizon=spec.horizon,
        max_delay=spec.max_delay,
        strong_convexity=spec.lam,
        domain=BallDomain(n, spec.radius),
        seed=seed,
        activation_policy=spec.activation_policy,
        feedback_mode=MODE_OF[algo],
    )
    schedule = generate_delay_schedule(config)
    engine = SimulationEngine(
        config,
        problem.losses,
        make_learner(algo, config, G=problem.G),
        schedule=schedule,
        record_aggregates=spec.dump_aggregates,
    )
    trace = engine.run()
    x_star = offline_optimum(problem.losses, config.domain)
    report = regret_curve(trace, problem.losses, x_star, d=spec.max_delay, G=problem.G, lam=spec.lam, R=spec.radius)
    acc = float("nan")
    if problem.dataset is not None and len(problem.dataset.test_X):
        acc = test_accuracy(trace.decisions[-1], problem.dataset.test_X, problem.dataset.test_y)
    meta = {
        "dataset": dataset,
        "algo": algo,
        "scenario": spec.scenario,
        "seed": seed,
        "num_agents": spec.num_agents,
        "max_delay": spec.max_delay,
        "horizon": spec.horizon,
        "lambda": spec.lam,
        "radius": spec.radius,
        "dimension": n,
        "feedback_mode": config.feedback_mode.value,
        "activation_policy": config.activation_policy.value,
        "rng": "numpy PCG64 / SeedSequence(seed, spawn_key=crc32(stream))",
        "w_max": problem.w_max,
        "G": problem.G,
        "schedule_sha256": schedule.digest(),
        "delivered": trace.delivered,
        "delivered_after_horizon": trace.delivered_after_horizon,
        "payload_vectors": trace.payload_vectors,
        "count_order_violations": trace.count_order_violations,
        "final_loss": float(trace.cumulative_loss[-1]),
        "regret": report.final,
        "acc": acc,
        "per_round_sec": float(trace.round_seconds.mean()),
        **problem.meta,
        **_machine(),
    }
    return RunResult(dataset, algo, spec.scenario, seed, trace, report, acc, problem.G, problem.w_max, meta, engine.aggregates)


def _machine() -> dict:
    return {
        "python": sys.version.split()[0],
        "numpy": np.__version__,
        "platform": platform.platform(),
        "machine": platform.machine(),
        "processor": platform.processor() or "unknown",
    }


def run_experiment(spec: ExperimentSpec) -> ExperimentResult:
    result = ExperimentResult(spec)
    cache: dict = {}
    for name in spec.datasets:
        if name != "synthetic" and name not in DATASETS and not (spec.manifest and name in spec.manifest):
            raise ValueError(f"unknown dataset {name!r}")
        for seed in spec.seeds:
            problem = _problem(spec, name, seed, cache)
            for algo in spec.algorithms:
                log.info("running %s / %s / %s / seed %d", name, algo, spec.scenario, seed)
                run = run_single(spec, problem, algo, seed, name)
                result.runs.append(run)
                if spec.out_dir is not None:
                    _write_run(run, Path(spec.out_dir), spec)
    if spec.out_dir is not None:
        out = Path(spec.out_dir)
        write_metrics(result.metrics, out / "metrics.csv")
        write_timing(timing_report(result), out / "timing.csv")
        if spec.plots:
            _write_plots(result, out)
    return result


def _write_run(run: RunResult, out: Path, spec: ExperimentSpec) -> None:
    d = out / run.run_id
    d.mkdir(parents=True, exist_ok=True)
    run.trace.to_csv(d / "trace.csv")
    run.report.to_csv(d / "regret.csv")
    write_meta(run.meta, d / "run_meta")
    if spec.dump_decisions:
        run.trace.decisions_to_csv(d / "decisions.csv")
    if spec.dump_aggregates:
        with open(d / "aggregates.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["round", "agent", "sum_norm", "count"])
            for t, i, norm, count in run.aggregates:
                w.writerow([t, i, repr(norm), count])


def write_meta(meta: dict, path: Path) -> None:
    with open(path, "w") as fh:
        for key, value in meta.items():
            fh.write(f"{key}={value}\n")


def read_meta(path: str | Path) -> dict[str, str]:
    out = {}
    for line in Path(path).read_text().splitlines():
        if line.strip():
            key, _, value = line.partition("=")
            out[key] = value
    return out


def write_metrics(rows: Sequence[MetricsRow], path: Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["dataset", "algo", "scenario", "seed", "final_loss", "regret", "acc", "per_round_sec"])
        for r in rows:
            w.writerow([r.dataset, r.algo, r.scenario, r.seed, repr(r.final_loss), repr(r.regret), repr(r.acc), repr(r.per_round_sec)])


def timing_report(result: ExperimentResult) -> dict[tuple[str, str, str], float]:
    """Mean wall seconds per round (decision + feedback absorption), by
    (dataset, scenario, algorithm), averaged over seeds."""
    acc: dict[tuple[str, str, str], list[float]] = {}
    for r in result.runs:
        acc.setdefault((r.dataset, r.scenario, r.algo), []).append(float(r.trace.round_seconds.mean()))
    return {k: float(np.mean(v)) for k, v in acc.items()}


def write_timing(table: dict, path: Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["dataset", "scenario", "algo", "per_round_sec"])
        for (ds, sc, algo), sec in sorted(table.items()):
            w.writerow([ds, sc, algo, repr(sec)])
    write_meta(_machine(), path.with_name("machine_meta"))


def emit_plots(traces: Sequence[tuple[str, RunTrace]], path: str | Path, title: str = "") -> Path:
    """Overlay cumulative-loss curves; writes ``<path>.png`` and ``<path>.csv``."""
    if not traces:
        raise ValueError("emit_plots needs at least one trace")
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    path = Path(path)
    T = traces[0][1].horizon
    if any(tr.horizon != T for _, tr in traces):
        raise ValueError("traces have different horizons")
    path.parent.mkdir(parents=True, exist_ok=True)
    cols = {label: tr.cumulative_loss for label, tr in traces}
    with open(path.with_suffix(".csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["round", *cols])
        for t in range(T):
            w.writerow([t + 1, *(repr(float(c[t])) for c in cols.values())])
    fig, ax = plt.subplots(figsize=(6, 4))
    for label, curve in cols.items():
        ax.plot(np.arange(1, T + 1), curve, label=label)
    ax.set_xlabel("round")
    ax.set_ylabel("cumulative loss")
    ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    png = path.with_suffix(".png")
    fig.savefig(png, dpi=120)
    plt.close(fig)
    return png


def emit_regret_plot(run: RunResult, path: str | Path) -> Path:
    """Regret against its theoretical envelope; the CSV carries a ``within_bound`` column."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    path = Path(path)
    bound = run.report.bound_ftdl if run.algo == "ftdl" else run.report.bound_aftdl
    within = run.report.regret <= bound
    with open(path.with_suffix(".csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["round", "regret", "bound", "within_bound"])
        for t in range(len(bound)):
            w.writerow([t + 1, repr(float(run.report.regret[t])), repr(float(bound[t])), int(within[t])])
    fig, ax = plt.subplots(figsize=(6, 4))
    t = np.arange(1, len(bound) + 1)
    ax.plot(t, run.report.regret, label=f"{run.algo} regret")
    ax.plot(t, bound, "--", label="bound")
    ax.set_xlabel("round")
    ax.set_ylabel("regret")
    ax.set_yscale("symlog")
    ax.legend()
    fig.tight_layout()
    png = path.with_suffix(".png")
    fig.savefig(png, dpi=120)
    plt.close(fig)
    return png


def _write_plots(result: ExperimentResult, out: Path) -> None:
    groups: dict[tuple[str, str], dict[str, list[RunTrace]]] = {}
    for r in result.runs:
        groups.setdefault((r.dataset, r.scenario), {}).setdefault(r.algo, []).append(r.trace)
    for (dataset, scenario), by_algo in groups.items():
        traces = []
        for algo, runs in by_algo.items():
            # seed-averaged cumulative loss, shown through a trace-shaped record
            mean = np.mean([tr.inst_loss for tr in runs], axis=0)
            traces.append((algo, replace(runs[0], inst_loss=mean)))
        emit_plots(traces, out / f"cumloss_{dataset}_{scenario}", title=f"{dataset} ({scenario})")
    for r in result.runs:
        if r.dataset == "synthetic" and r.algo in ("ftdl", "aftdl"):
            emit_regret_plot(r, out / f"regret_{r.run_id}")
