"""Command-line front end.

Subcommands:

* ``run``     one seeded trace, saved as JSON + CSV, audited;
* ``batch``   a replicated experiment with hitting-time statistics;
* ``theory``  closed-form constants and bounds for a configuration;
* ``report``  summary table and SVG plots from saved traces;
* ``dataset`` synthetic logistic data written in both file formats.

Configurations are JSON documents (schema in the README).  The
``--seed``, ``--epsilon``, ``--variant`` and ``--out-dir`` flags
override the config file.  Exit status is nonzero when any
per-iteration audit fails.
"""

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from .harness import ExperimentConfig, hitting_time, run_experiment
from .oracles import (BoundedNoise, GradientEstimatorParams,
                      HessianEstimatorParams, SubsamplingParams)
from .problems import (make_synthetic_logistic, save_dataset_binary,
                       save_dataset_text)
from .solvers import LinesearchParams
from .traceio import (load_trace_json, sanitize_json, save_trace_csv,
                      save_trace_json)


def config_from_dict(doc: dict) -> ExperimentConfig:
    """Build an ExperimentConfig from a parsed JSON document."""
    ls_doc = dict(doc.get("ls", {}))
    ls = LinesearchParams(**ls_doc)
    noise = doc.get("noise")
    if noise is not None:
        noise = BoundedNoise(epsilon_f=noise["epsilon_f"],
                             law=noise.get("law", "uniform"))
    grad = doc.get("grad")
    if grad is not None:
        grad = GradientEstimatorParams(
            delta_g=grad["delta_g"],
            failure_mode=grad.get("failure_mode", "scaled_opposite"))
    hess = doc.get("hess")
    if hess is not None:
        hess = HessianEstimatorParams(
            delta_h=hess["delta_h"],
            accuracy_constant=hess.get("C", 1.0))
    sub = doc.get("sub")
    if sub is not None:
        sub = SubsamplingParams(
            kappa_gamma=sub["kappa_gamma"], gamma_0=sub["gamma_0"],
            delta_g=sub["delta_g"], delta_h=sub["delta_h"],
            accuracy_constant=sub.get("C", 1.0))
    return ExperimentConfig(
        problem=doc["problem"],
        variant=doc["variant"],
        ls=ls,
        epsilon=float(doc["epsilon"]),
        max_iters=int(doc["max_iters"]),
        replications=int(doc.get("replications", 1)),
        base_seed=int(doc.get("base_seed", 0)),
        x0=doc.get("x0"),
        stop_mode=doc.get("stop_mode", "gap"),
        noise=noise,
        grad_params=grad,
        hess_params=hess,
        sub=sub,
        max_gamma_loops=int(doc.get("max_gamma_loops", 60)),
        force_full_sample=bool(doc.get("force_full_sample", False)),
        gamma=doc.get("gamma"),
        workers=int(doc.get("workers", 1)),
    )


def _load_config(args) -> ExperimentConfig:
    with open(args.config, encoding="utf-8") as fh:
        doc = json.load(fh)
    if getattr(args, "epsilon", None) is not None:
        doc["epsilon"] = args.epsilon
    if getattr(args, "variant", None) is not None:
        doc["variant"] = args.variant
    if getattr(args, "seed", None) is not None:
        doc["base_seed"] = args.seed
    return config_from_dict(doc)


def _dump_json(obj, path=None):
    text = json.dumps(sanitize_json(obj), sort_keys=True, indent=1,
                      default=str)
    if path is None:
        print(text)
    else:
        Path(path).write_text(text + "\n", encoding="utf-8")


def cmd_run(args) -> int:
    config = _load_config(args)
    config.replications = 1
    result = run_experiment(config)
    if result.failures:
        print(f"run failed: {result.failures[0][1]}", file=sys.stderr)
        return 2
    trace = result.traces[0]
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_trace_json(trace, out / f"trace_{trace.seed}.json")
    save_trace_csv(trace, out / f"trace_{trace.seed}.csv")
    print(f"stop={trace.stop_reason} iterations={trace.iterations} "
          f"final_gap={trace.final_gap:.6e} "
          f"hit={hitting_time(trace, config.epsilon)}")
    if result.audit_violations:
        for line in result.audit_violations:
            print(f"AUDIT VIOLATION {line}", file=sys.stderr)
        return 1
    return 0


def cmd_batch(args) -> int:
    config = _load_config(args)
    result = run_experiment(config)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for trace in result.traces:
        save_trace_json(trace, out / f"trace_{trace.seed}.json")
    summary = {
        "stats": result.stats.as_dict(),
        "theory": result.theory_constants,
        "failures": [list(f) for f in result.failures],
        "audit_violation_count": len(result.audit_violations),
    }
    _dump_json(summary, out / "stats.json")
    mean = result.stats.mean
    bound = result.stats.theoretical_bound
    print(f"replications={config.replications} mean_hit={mean:.2f} "
          f"censored={result.stats.censored_count} "
          f"bound={bound if math.isfinite(bound) else 'n/a'}")
    if result.audit_violations:
        for line in result.audit_violations[:20]:
            print(f"AUDIT VIOLATION {line}", file=sys.stderr)
        return 1
    return 0


def cmd_theory(args) -> int:
    config = _load_config(args)
    result_free = run_experiment_theory_only(config)
    _dump_json(result_free)
    return 0


def run_experiment_theory_only(config: ExperimentConfig) -> dict:
    from .harness import _resolve_problem, _theory_for
    from .problems import optimality_gap
    fsp, base = _resolve_problem(config)
    x0 = (np.zeros(base.dimension) if config.x0 is None
          else np.asarray(config.x0, dtype=float))
    gap0 = optimality_gap(base, x0)
    constants = _theory_for(config, base, gap0)
    constants["gap0"] = gap0
    return constants


def cmd_report(args) -> int:
    out = Path(args.out_dir)
    paths = sorted(out.glob("trace_*.json"))
    if not paths:
        print(f"no trace files in {out}", file=sys.stderr)
        return 2
    traces = [load_trace_json(p) for p in paths]

    with open(out / "summary.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["seed", "variant", "iterations", "stop_reason",
                         "gap0", "final_gap", "successes", "true_iterations"])
        for tr in traces:
            writer.writerow([
                tr.seed, tr.variant, tr.iterations, tr.stop_reason,
                repr(tr.gap0), repr(tr.final_gap),
                sum(r.successful for r in tr.records),
                sum(r.true_iteration for r in tr.records)])

    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(7, 4.5))
    for tr in traces:
        ax.semilogy(tr.gap_sequence(), alpha=0.5, lw=1)
    ax.set_xlabel("iteration")
    ax.set_ylabel("optimality gap")
    ax.set_title("gap vs iteration")
    fig.tight_layout()
    fig.savefig(out / "gap_vs_iteration.svg")
    plt.close(fig)

    fig, ax = plt.subplots(figsize=(7, 4.5))
    for tr in traces:
        ax.semilogy([r.t for r in tr.records], alpha=0.5, lw=1)
    ax.set_xlabel("iteration")
    ax.set_ylabel("steplength t_k")
    ax.set_title("steplength vs iteration")
    fig.tight_layout()
    fig.savefig(out / "steplength_vs_iteration.svg")
    plt.close(fig)

    print(f"wrote summary.csv and 2 SVG plots to {out}")
    return 0


def cmd_dataset(args) -> int:
    _, features, labels = make_synthetic_logistic(
        args.samples, args.dim, args.ridge, args.seed,
        unit_rows=not args.raw_rows)
    base = Path(args.out)
    base.parent.mkdir(parents=True, exist_ok=True)
    save_dataset_text(base.with_suffix(".txt"), features, labels)
    save_dataset_binary(base.with_suffix(".bin"), features, labels)
    print(f"wrote {base.with_suffix('.txt')} and {base.with_suffix('.bin')} "
          f"({args.samples} samples, {args.dim} features)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="noisyncg",
        description="Linesearch Newton-CG with noisy oracles: runs, "
                    "Monte-Carlo batches, theory bounds and reports.")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="JSON config file")
    common.add_argument("--seed", type=int, default=None,
                        help="override base seed")
    common.add_argument("--epsilon", type=float, default=None,
                        help="override accuracy target")
    common.add_argument("--variant", default=None,
                        choices=["bounded", "dynamic", "finite_sum"],
                        help="override solver variant")

    p = sub.add_parser("run", parents=[common],
                       help="single seeded run, trace saved and audited")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("batch", parents=[common],
                       help="replicated experiment with statistics")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_batch)

    p = sub.add_parser("theory", parents=[common],
                       help="print constants and bounds for a config")
    p.set_defaults(func=cmd_theory)

    p = sub.add_parser("report", help="summarize saved traces")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("dataset", help="generate synthetic logistic data")
    p.add_argument("--samples", type=int, required=True)
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--ridge", type=float, default=1e-2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--raw-rows", action="store_true",
                   help="skip unit row-norm rescaling")
    p.add_argument("--out", required=True,
                   help="output basename; .txt and .bin are appended")
    p.set_defaults(func=cmd_dataset)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
