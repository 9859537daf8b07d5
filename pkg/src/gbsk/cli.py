"""Command-line interface.

Subcommands: ``cluster`` (full-parameter run), ``agbsk`` (size-adaptive
preset), ``gen`` (synthetic data), ``eval`` (compare two label files),
``bench`` (plan-driven sweeps) and ``dump-skeleton`` (ball/edge/SVG
exports).  Machine-readable output goes to stdout or files; progress
lines go to stderr.  Exit codes: 0 success, 1 runtime error, 2 usage
error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np

from . import __version__
from . import metrics as quality
from .bench import BenchPlan, run_bench, scaling_report, summarize
from .datasets import (Dataset, SyntheticSpec, generate_synthetic, load_dataset,
                       load_labels, minmax_rescale, save_dataset_binary,
                       save_dataset_csv, save_labels)
from .exceptions import GBSKError
from .balls import dump_balls_csv
from .peaks import dump_peak_stats_csv
from .pipeline import (VARIANT_STANDARD, VARIANTS, build_report, default_params,
                       execute)
from .skeleton import dump_skeleton_csv, render_skeleton_svg

log = logging.getLogger("gbsk")


def _add_input_args(parser, with_truth=True):
    parser.add_argument("--in", dest="input", required=True, metavar="PATH",
                        help="input dataset file")
    parser.add_argument("--format", choices=["csv", "binary"], default=None,
                        help="input format (default: .bin means binary, else csv)")
    parser.add_argument("--has-labels", action="store_true",
                        help="treat the trailing CSV column as ground-truth labels")
    if with_truth:
        parser.add_argument("--truth", metavar="PATH", default=None,
                            help="separate ground-truth labels file (one int per line)")
    parser.add_argument("--normalize", choices=["minmax"], default=None,
                        help="rescale each feature to [0,1] before clustering")


def _add_run_args(parser, full=True):
    parser.add_argument("--k", type=int, required=True,
                        help="number of clusters")
    if full:
        parser.add_argument("--s", type=int, default=None,
                            help="number of sample sets (default 30)")
        parser.add_argument("--alpha", type=float, default=None,
                            help="sampling proportion (default 1/sqrt(n))")
        parser.add_argument("--max-balls", type=int, default=None, metavar="M",
                            help="per-sample ball budget; -1 disables it "
                                 "(default 10*k)")
        parser.add_argument("--variant", choices=list(VARIANTS),
                            default=VARIANT_STANDARD)
    parser.add_argument("--seed", type=int, default=0,
                        help="master seed (default 0)")
    parser.add_argument("--threads", type=int, default=None,
                        help="worker threads (default: GBSK_THREADS env var, else 1)")


def _resolve_threads(args) -> int:
    if args.threads is not None:
        return max(1, args.threads)
    env = os.environ.get("GBSK_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise GBSKError(f"GBSK_THREADS must be an integer, got {env!r}") from None
    return 1


def _load_input(args) -> Dataset:
    dataset = load_dataset(args.input, format=args.format,
                           has_labels=args.has_labels)
    if getattr(args, "truth", None):
        truth = load_labels(args.truth)
        dataset = Dataset(points=dataset.points, labels=truth)
    if args.normalize == "minmax":
        dataset = Dataset(points=minmax_rescale(dataset.points),
                          labels=dataset.labels)
    log.info("loaded %d points in %d dimensions%s", dataset.n, dataset.d,
             " (with labels)" if dataset.labels is not None else "")
    return dataset


def _emit(text: str, path: str | None) -> None:
    """Write machine-readable text to a file, or stdout for '-'/None."""
    if path in (None, "-"):
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")
    else:
        with open(path, "w") as fh:
            fh.write(text if text.endswith("\n") else text + "\n")


def _run_and_report(args, full=True) -> int:
    dataset = _load_input(args)
    params = default_params(
        dataset.n, args.k,
        s=getattr(args, "s", None),
        alpha=getattr(args, "alpha", None),
        max_balls=_cli_max_balls(getattr(args, "max_balls", None)),
        master_seed=args.seed,
        variant=getattr(args, "variant", VARIANT_STANDARD),
    )
    artifacts = execute(dataset, params, n_jobs=_resolve_threads(args))
    result = artifacts.result

    labels_out = args.labels_out
    if labels_out is None:
        labels_out = args.input + ".labels"
    save_labels(result.labels, labels_out)
    log.info("wrote %d labels to %s", result.labels.size, labels_out)

    metrics = None
    if dataset.labels is not None:
        metrics = {
            "acc": quality.accuracy(result.labels, dataset.labels),
            "ari": quality.ari(result.labels, dataset.labels),
            "ami": quality.ami(result.labels, dataset.labels),
        }
        log.info("metrics: acc=%.4f ari=%.4f ami=%.4f",
                 metrics["acc"], metrics["ari"], metrics["ami"])
    report = build_report(result, metrics)
    _emit(json.dumps(report, indent=2, sort_keys=True), args.report_out)
    return 0


def _cli_max_balls(value):
    """Map the CLI integer to the library budget: -1 means unlimited."""
    if value is None:
        return "auto"
    if value == -1:
        return None
    return value


def _cmd_cluster(args) -> int:
    return _run_and_report(args, full=True)


def _cmd_agbsk(args) -> int:
    return _run_and_report(args, full=False)


def _cmd_gen(args) -> int:
    spec = SyntheticSpec(cluster_count=args.clusters,
                         points_per_cluster=args.points_per_cluster,
                         dimension=args.dim, center_spread=args.spread,
                         cluster_std=args.std, seed=args.seed)
    dataset = generate_synthetic(spec)
    if args.format == "binary":
        save_dataset_binary(dataset, args.out, width=args.width)
        if not args.no_labels:
            save_labels(dataset.labels, args.out + ".labels")
            log.info("wrote labels sidecar to %s.labels", args.out)
    else:
        save_dataset_csv(dataset, args.out, include_labels=not args.no_labels)
    log.info("wrote %d points (%d clusters, d=%d) to %s",
             dataset.n, spec.cluster_count, spec.dimension, args.out)
    return 0


def _cmd_eval(args) -> int:
    pred = load_labels(args.pred)
    truth = load_labels(args.truth)
    out = {
        "acc": quality.accuracy(pred, truth),
        "ari": quality.ari(pred, truth),
        "ami": quality.ami(pred, truth),
    }
    _emit(json.dumps(out, indent=2, sort_keys=True), args.out)
    return 0


def _cmd_bench(args) -> int:
    plan = BenchPlan.from_json(args.plan)
    records = run_bench(plan, out_csv=args.out_csv)
    summary = {"cells": summarize(records)}
    sizes = {r.n for r in records if not r.error}
    if len(sizes) >= 2:
        report = scaling_report(records)
        summary["scaling"] = {
            "sizes": report.sizes,
            "mean_total_s": report.mean_total_s,
            "slope": report.slope,
            "doubling_ratios": report.doubling_ratios,
            "flagged_superlinear": report.flagged,
        }
    failed = sum(1 for r in records if r.error)
    log.info("bench finished: %d records, %d failed", len(records), failed)
    _emit(json.dumps(summary, indent=2, sort_keys=True), args.summary_out)
    return 0


def _cmd_dump_skeleton(args) -> int:
    dataset = _load_input(args)
    params = default_params(
        dataset.n, args.k, s=args.s, alpha=args.alpha,
        max_balls=_cli_max_balls(args.max_balls), master_seed=args.seed,
        variant=args.variant,
    )
    artifacts = execute(dataset, params, n_jobs=_resolve_threads(args))
    dump_skeleton_csv(artifacts.forest, artifacts.key_balls, args.edges_out)
    log.info("wrote %d skeleton rows to %s", len(artifacts.key_balls), args.edges_out)
    if args.balls_out:
        dump_balls_csv(artifacts.key_balls, args.balls_out)
    if args.peaks_out:
        dump_peak_stats_csv(artifacts.key_balls, args.peaks_out)
    if args.svg_out:
        render_skeleton_svg(dataset.points, artifacts.result.labels,
                            artifacts.forest, artifacts.key_balls, args.svg_out)
        log.info("wrote SVG to %s", args.svg_out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gbsk",
        description="Skeleton clustering with granular balls.")
    parser.add_argument("--version", action="version", version=f"gbsk {__version__}")
    parser.add_argument("-q", "--quiet", action="store_true",
                        help="suppress progress lines on stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("cluster", help="run the pipeline with explicit parameters")
    _add_input_args(p)
    _add_run_args(p, full=True)
    p.add_argument("--labels-out", metavar="PATH", default=None,
                   help="labels file (default: <input>.labels)")
    p.add_argument("--report-out", metavar="PATH", default="-",
                   help="JSON run report ('-' for stdout, the default)")
    p.set_defaults(func=_cmd_cluster)

    p = sub.add_parser("agbsk", help="run the size-adaptive preset (only k needed)")
    _add_input_args(p)
    _add_run_args(p, full=False)
    p.add_argument("--labels-out", metavar="PATH", default=None)
    p.add_argument("--report-out", metavar="PATH", default="-")
    p.set_defaults(func=_cmd_agbsk)

    p = sub.add_parser("gen", help="generate a synthetic Gaussian-mixture dataset")
    p.add_argument("--out", required=True, metavar="PATH")
    p.add_argument("--format", choices=["csv", "binary"], default="csv")
    p.add_argument("--clusters", type=int, required=True)
    p.add_argument("--points-per-cluster", type=int, required=True)
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--spread", type=float, default=10.0,
                   help="grid scale for cluster centers (default 10)")
    p.add_argument("--std", type=float, default=0.5,
                   help="within-cluster standard deviation (default 0.5)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--width", type=int, choices=[4, 8], default=8,
                   help="binary element width in bytes")
    p.add_argument("--no-labels", action="store_true",
                   help="omit labels (CSV column or binary sidecar)")
    p.set_defaults(func=_cmd_gen)

    p = sub.add_parser("eval", help="score a predicted labels file against truth")
    p.add_argument("--pred", required=True, metavar="PATH")
    p.add_argument("--truth", required=True, metavar="PATH")
    p.add_argument("--out", metavar="PATH", default="-")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("bench", help="run a benchmark plan")
    p.add_argument("--plan", required=True, metavar="PATH",
                   help="JSON benchmark plan")
    p.add_argument("--out-csv", metavar="PATH", default=None,
                   help="per-run records CSV")
    p.add_argument("--summary-out", metavar="PATH", default="-",
                   help="JSON summary ('-' for stdout)")
    p.set_defaults(func=_cmd_bench)

    p = sub.add_parser("dump-skeleton",
                       help="export key balls, peak stats, edges and an SVG")
    _add_input_args(p)
    _add_run_args(p, full=True)
    p.add_argument("--edges-out", metavar="PATH", required=True,
                   help="skeleton edge list CSV (one row per key ball)")
    p.add_argument("--balls-out", metavar="PATH", default=None)
    p.add_argument("--peaks-out", metavar="PATH", default=None)
    p.add_argument("--svg-out", metavar="PATH", default=None,
                   help="SVG drawing (2-D or 3-D input only)")
    p.set_defaults(func=_cmd_dump_skeleton)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("gbsk: %(message)s"))
    log.handlers = [handler]
    log.propagate = False
    log.setLevel(logging.WARNING if args.quiet else logging.INFO)
    try:
        return args.func(args)
    except (GBSKError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
