"""Benchmark harness: parameter sweeps, timing records and scaling checks.

A plan (JSON file or dict) names datasets, a parameter grid, seeds and a
repetition count.  ``run_bench`` executes every cell and returns flat
records; timings cover the pipeline only, never data loading or
generation.  Cells run sequentially by default so wall-clock numbers
mean something; ``parallel_cells`` exists for label-only sweeps where
timings are not the product.
"""

from __future__ import annotations

import csv
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats as scipy_stats

from . import metrics as quality
from .datasets import Dataset, SyntheticSpec, generate_synthetic, load_dataset
from .pipeline import STEP_KEYS, default_params, execute

CSV_COLUMNS = ["dataset", "n", "d", "k", "s", "alpha", "max_balls", "seed", "rep",
               "total_s", *[f"{key}_s" for key in STEP_KEYS],
               "acc", "ari", "ami", "error"]


@dataclass
class BenchRecord:
    """One (dataset, grid cell, seed, repetition) outcome."""

    dataset: str
    n: int
    d: int
    k: int
    s: int | None
    alpha: float | None
    max_balls: int | None
    seed: int
    rep: int
    total_s: float = math.nan
    step_s: dict = field(default_factory=dict)
    acc: float | None = None
    ari: float | None = None
    ami: float | None = None
    error: str = ""


@dataclass
class BenchPlan:
    """Datasets to run, the parameter grid, seeds and repetitions.

    Dataset entries are dicts with a ``name``, a ``k``, and either a
    ``synthetic`` sub-dict (SyntheticSpec fields) or a ``path`` (with
    optional ``format``/``has_labels``/``labels_path``).  Grid lists may
    contain null to mean "use the size-adaptive default".
    """

    datasets: list[dict]
    grid: dict = field(default_factory=dict)
    seeds: list[int] = field(default_factory=lambda: [0])
    repetitions: int = 1
    n_jobs: int = 1
    parallel_cells: bool = False

    def __post_init__(self):
        if not self.datasets:
            raise ValueError("plan needs at least one dataset entry")
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        if not self.seeds:
            raise ValueError("plan needs at least one seed")
        for key in self.grid:
            if key not in ("s", "alpha", "max_balls"):
                raise ValueError(f"unknown grid axis {key!r}")
            if not self.grid[key]:
                raise ValueError(f"grid axis {key!r} is empty")

    @classmethod
    def from_json(cls, path) -> "BenchPlan":
        with open(path) as fh:
            data = json.load(fh)
        return cls(**data)


def _materialize(entry: dict) -> tuple[str, Dataset, int]:
    name = entry.get("name") or entry.get("path") or "synthetic"
    k = entry.get("k")
    if k is None:
        raise ValueError(f"dataset entry {name!r} is missing 'k'")
    if "synthetic" in entry:
        dataset = generate_synthetic(SyntheticSpec(**entry["synthetic"]))
    elif "path" in entry:
        dataset = load_dataset(entry["path"], format=entry.get("format"),
                               has_labels=entry.get("has_labels", False))
        if entry.get("labels_path"):
            from .datasets import load_labels
            dataset = Dataset(points=dataset.points,
                              labels=load_labels(entry["labels_path"]))
    else:
        raise ValueError(f"dataset entry {name!r} needs 'synthetic' or 'path'")
    return name, dataset, int(k)


def run_bench(plan: BenchPlan, out_csv=None) -> list[BenchRecord]:
    """Execute every plan cell; failures are recorded, not raised."""
    s_axis = plan.grid.get("s", [None])
    alpha_axis = plan.grid.get("alpha", [None])
    m_axis = plan.grid.get("max_balls", ["auto"])
    # In grid axes null means "default"; for max_balls the default is the
    # adaptive budget, and the int -1 asks for an unbudgeted run.
    m_axis = ["auto" if m is None else (None if m == -1 else m) for m in m_axis]

    cells = []
    for entry in plan.datasets:
        try:
            name, dataset, k = _materialize(entry)
        except Exception as exc:  # noqa: BLE001 - a broken entry must not sink the sweep
            for s in s_axis:
                for alpha in alpha_axis:
                    for m in m_axis:
                        for seed in plan.seeds:
                            for rep in range(plan.repetitions):
                                cells.append(BenchRecord(
                                    dataset=str(entry.get("name", entry.get("path", "?"))),
                                    n=0, d=0, k=int(entry.get("k") or 0),
                                    s=s, alpha=alpha,
                                    max_balls=None if m in ("auto", None) else m,
                                    seed=seed, rep=rep, error=str(exc)))
            continue
        for s in s_axis:
            for alpha in alpha_axis:
                for m in m_axis:
                    for seed in plan.seeds:
                        for rep in range(plan.repetitions):
                            cells.append((name, dataset, k, s, alpha, m, seed, rep))

    def run_cell(cell):
        if isinstance(cell, BenchRecord):
            return cell
        name, dataset, k, s, alpha, m, seed, rep = cell
        record = BenchRecord(dataset=name, n=dataset.n, d=dataset.d, k=k, s=s,
                             alpha=alpha, max_balls=None if m in ("auto", None) else m,
                             seed=seed, rep=rep)
        try:
            params = default_params(dataset.n, k, s=s, alpha=alpha, max_balls=m,
                                    master_seed=seed)
            record.s = params.s
            record.alpha = params.alpha
            record.max_balls = params.max_balls
            t0 = time.perf_counter()
            artifacts = execute(dataset, params, n_jobs=plan.n_jobs)
            record.total_s = time.perf_counter() - t0
            record.step_s = dict(artifacts.result.step_timings)
            if dataset.labels is not None:
                labels = artifacts.result.labels
                record.acc = quality.accuracy(labels, dataset.labels)
                record.ari = quality.ari(labels, dataset.labels)
                record.ami = quality.ami(labels, dataset.labels)
        except Exception as exc:  # noqa: BLE001 - record and continue
            record.error = str(exc)
        return record

    if plan.parallel_cells:
        with ThreadPoolExecutor() as pool:
            records = list(pool.map(run_cell, cells))
    else:
        records = [run_cell(cell) for cell in cells]

    if out_csv is not None:
        write_records_csv(records, out_csv)
    return records


def write_records_csv(records: list[BenchRecord], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for r in records:
            row = [r.dataset, r.n, r.d, r.k, r.s,
                   "" if r.alpha is None else repr(float(r.alpha)),
                   "" if r.max_balls is None else r.max_balls,
                   r.seed, r.rep,
                   "" if math.isnan(r.total_s) else repr(r.total_s)]
            row += ["" if key not in r.step_s else repr(r.step_s[key])
                    for key in STEP_KEYS]
            row += ["" if v is None else repr(v) for v in (r.acc, r.ari, r.ami)]
            row.append(r.error)
            writer.writerow(row)


def _mean_ci(values: list[float]) -> tuple[float | None, float | None]:
    """Mean and 95% t-interval half-width; CI is None below two values."""
    if not values:
        return None, None
    mean = float(np.mean(values))
    if len(values) < 2:
        return mean, None
    sd = float(np.std(values, ddof=1))
    half = float(scipy_stats.t.ppf(0.975, len(values) - 1)) * sd / math.sqrt(len(values))
    return mean, half


def summarize(records: list[BenchRecord]) -> list[dict]:
    """Group by (dataset, s, alpha, max_balls) and aggregate runs."""
    groups: dict[tuple, list[BenchRecord]] = {}
    for r in records:
        groups.setdefault((r.dataset, r.s, r.alpha, r.max_balls), []).append(r)

    rows = []
    for (dataset, s, alpha, m), members in groups.items():
        ok = [r for r in members if not r.error]
        times = [r.total_s for r in ok if not math.isnan(r.total_s)]
        mean_t, ci_t = _mean_ci(times)
        row = {
            "dataset": dataset, "s": s, "alpha": alpha, "max_balls": m,
            "runs": len(members), "failed": len(members) - len(ok),
            "mean_total_s": mean_t, "ci95_total_s": ci_t,
        }
        for metric in ("acc", "ari", "ami"):
            values = [getattr(r, metric) for r in ok if getattr(r, metric) is not None]
            mean_v, ci_v = _mean_ci(values)
            row[f"mean_{metric}"] = mean_v
            row[f"ci95_{metric}"] = ci_v
        rows.append(row)
    return rows


@dataclass
class ScalingReport:
    """Log-log runtime slope across dataset sizes."""

    sizes: list[int]
    mean_total_s: list[float]
    slope: float
    doubling_ratios: list[float]
    flagged: bool  # True when growth looks super-linear (slope > 1.3)


def scaling_report(records: list[BenchRecord], slope_limit: float = 1.3) -> ScalingReport:
    """Fit runtime against n on log-log axes over successful records."""
    by_n: dict[int, list[float]] = {}
    for r in records:
        if not r.error and not math.isnan(r.total_s):
            by_n.setdefault(r.n, []).append(r.total_s)
    if len(by_n) < 2:
        raise ValueError("scaling report needs records at two or more dataset sizes")

    sizes = sorted(by_n)
    means = [float(np.mean(by_n[n])) for n in sizes]
    slope = float(np.polyfit(np.log(sizes), np.log(means), 1)[0])
    ratios = []
    for a, b in zip(sizes, sizes[1:]):
        if b == 2 * a:
            ratios.append(float(np.mean(by_n[b]) / np.mean(by_n[a])))
    return ScalingReport(sizes=sizes, mean_total_s=means, slope=slope,
                         doubling_ratios=ratios, flagged=slope > slope_limit)
