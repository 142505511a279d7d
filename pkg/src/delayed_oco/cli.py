"""``delayed-oco`` command line front end."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from delayed_oco.data import read_manifest
from delayed_oco.experiment import BENCHMARK_DATASETS, PRESETS, ExperimentSpec, run_experiment


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="delayed-oco",
        description="Simulate delayed multi-agent online learning (FTDL, A-FTDL, DDA).",
    )
    p.add_argument("--dataset", nargs="+", default=None,
                   help=f"dataset name(s): {', '.join(BENCHMARK_DATASETS)} or synthetic (default: all four with --preset, else synthetic)")
    p.add_argument("--algo", nargs="+", default=None, help="ftdl, aftdl and/or dda (default: aftdl dda)")
    p.add_argument("--agents", type=int, default=None, help="number of agents M")
    p.add_argument("--dmax", "--d", dest="dmax", type=int, default=None, help="maximum delay d")
    p.add_argument("--rounds", type=int, default=8000, help="horizon T (default 8000)")
    p.add_argument("--lambda", dest="lam", type=float, default=0.01, help="strong convexity (default 0.01)")
    p.add_argument("--radius", type=float, default=1.0, help="decision ball radius R (default 1)")
    p.add_argument("--seed", nargs="+", type=int, default=[0], help="one or more seeds")
    p.add_argument("--preset", choices=sorted(PRESETS), help="benchmark scenario preset")
    p.add_argument("--out", type=Path, default=Path("runs"), help="output directory")
    p.add_argument("--dump-decisions", action="store_true", help="also write decisions.csv per run")
    p.add_argument("--dump-aggregates", action="store_true", help="also write learner aggregates per run")
    p.add_argument("--data-dir", type=Path, default=None, help="directory holding the LIBSVM files")
    p.add_argument("--manifest", type=Path, default=None, help="JSON manifest name -> {path, examples, features}")
    p.add_argument("--test-size", type=int, default=2000)
    p.add_argument("--synthetic-kind", choices=("quadratic", "hinge"), default="quadratic")
    p.add_argument("--dim", type=int, default=5, help="dimension of synthetic problems")
    p.add_argument("--activation", choices=("round-robin", "uniform-random"), default="round-robin")
    p.add_argument("--no-plots", action="store_true")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def spec_from_args(args: argparse.Namespace) -> ExperimentSpec:
    kwargs = dict(
        algorithms=tuple(args.algo or ("aftdl", "dda")),
        horizon=args.rounds,
        test_size=args.test_size,
        lam=args.lam,
        radius=args.radius,
        seeds=tuple(args.seed),
        out_dir=args.out,
        data_dir=args.data_dir,
        manifest=read_manifest(args.manifest) if args.manifest else None,
        synthetic_kind=args.synthetic_kind,
        synthetic_dim=args.dim,
        activation_policy=args.activation,
        dump_decisions=args.dump_decisions,
        dump_aggregates=args.dump_aggregates,
        plots=not args.no_plots,
    )
    if args.agents is not None:
        kwargs["num_agents"] = args.agents
    if args.dmax is not None:
        kwargs["max_delay"] = args.dmax
    if args.preset:
        kwargs["datasets"] = tuple(args.dataset or BENCHMARK_DATASETS)
        return ExperimentSpec.preset(args.preset, **kwargs)
    kwargs["datasets"] = tuple(args.dataset or ("synthetic",))
    return ExperimentSpec(**kwargs)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        spec = spec_from_args(args)
        result = run_experiment(spec)
    except (FileNotFoundError, ValueError) as exc:
        print(f"delayed-oco: error: {exc}", file=sys.stderr)
        return 2
    print(f"{'dataset':<10} {'algo':<6} {'scenario':<14} {'seed':>4} {'final_loss':>12} {'regret':>12} {'acc':>7} {'sec/round':>10}")
    for m in result.metrics:
        print(f"{m.dataset:<10} {m.algo:<6} {m.scenario:<14} {m.seed:>4} {m.final_loss:>12.4f} {m.regret:>12.4f} {m.acc:>7.4f} {m.per_round_sec:>10.2e}")
    print(f"outputs written to {spec.out_dir}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
