"""The five-step skeleton clustering pipeline and its ablation variants.

Standard run: (1) draw s random sample sets of proportion alpha, (2)
generate balls per sample and pool the k representative-ball centers of
each, (3) regenerate balls over the pooled centers to get the key balls,
(4) build the skeleton forest and label the key balls, (5) give every
point the label of its nearest key-ball center.

Sampling makes the whole thing linear in n: steps 1-4 touch only
s*alpha*n points and step 5 is one pass over the data against W centers.

Two ablation variants exist for diagnostics.  ``no-sampling`` skips
steps 1-3 and builds the forest over an unbudgeted ball generation of
the full dataset.  ``no-representative-balls`` samples as usual but
pools every per-sample ball (no peak selection, no key-ball
regeneration) into the forest stage.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from ._rng import BALL_STREAM, KEY_BALL_STREAM, check_seed, stream
from ._validation import check_positive_int
from .balls import (UNLIMITED, BallSet, GranularBall, compute_set_density,
                    generate_balls, generate_balls_grouped)
from .datasets import Dataset, sample
from .exceptions import InsufficientBallsError
from .peaks import identify_peak_balls
from .skeleton import SkeletonForest, build_key_balls, construct_forest, label_points

VARIANT_STANDARD = "standard"
VARIANT_NO_SAMPLING = "no-sampling"
VARIANT_NO_REP_BALLS = "no-representative-balls"
VARIANTS = (VARIANT_STANDARD, VARIANT_NO_SAMPLING, VARIANT_NO_REP_BALLS)

STEP_KEYS = ("step1_sampling", "step2_sample_balls", "step3_key_balls",
             "step4_forest", "step5_labeling")


@dataclass(frozen=True)
class GbskParams:
    """Resolved run parameters.

    ``max_balls`` is an int budget or None for unlimited.  ``alpha`` is
    the sampling proportion in (0, 1].  Instances are concrete: use
    :func:`default_params` or :func:`agbsk_params` to fill defaults from
    the dataset size.
    """

    k: int
    s: int
    alpha: float
    max_balls: int | None
    master_seed: int = 0
    variant: str = VARIANT_STANDARD

    def __post_init__(self):
        check_positive_int(self.k, "k")
        check_positive_int(self.s, "s")
        if not (0.0 < self.alpha <= 1.0):
            raise ValueError(f"alpha must be in (0, 1], got {self.alpha}")
        if self.max_balls is not None:
            check_positive_int(self.max_balls, "max_balls")
            if self.max_balls < self.k:
                raise ValueError(
                    f"max_balls={self.max_balls} must be at least k={self.k}")
        check_seed(self.master_seed)
        if self.variant not in VARIANTS:
            raise ValueError(
                f"variant must be one of {VARIANTS}, got {self.variant!r}")


def default_params(n: int, k: int, *, s: int | None = None,
                   alpha: float | None = None, max_balls: int | None = "auto",
                   master_seed: int = 0,
                   variant: str = VARIANT_STANDARD) -> GbskParams:
    """Fill unspecified parameters with the size-adaptive defaults.

    s defaults to 30, alpha to 1/sqrt(n) and max_balls to 10*k; pass
    ``max_balls=None`` explicitly for an unbudgeted run.
    """
    check_positive_int(n, "n")
    check_positive_int(k, "k")
    if s is None:
        s = 30
    if alpha is None:
        alpha = 1.0 / math.sqrt(n)
    if max_balls == "auto":
        max_balls = 10 * k
    return GbskParams(k=k, s=s, alpha=alpha, max_balls=max_balls,
                      master_seed=master_seed, variant=variant)


def agbsk_params(n: int, k: int, master_seed: int = 0) -> GbskParams:
    """The one-knob adaptive preset: [s=30, alpha=1/sqrt(n), max_balls=10k]."""
    return default_params(n, k, master_seed=master_seed)


@dataclass
class RunDiagnostics:
    """Counts collected along a run.

    ``rep_ball_count`` is the number of centers entering the forest
    stage: s*k for the standard variant, the pooled ball count for the
    no-representative-balls variant, 0 for no-sampling.
    ``key_ball_count`` is W, the number of balls the forest is built on.
    """

    balls_per_sample: list[int]
    rep_ball_count: int
    key_ball_count: int
    root_count: int


@dataclass
class ClusteringResult:
    """Labels plus per-step timings and diagnostics for one run."""

    labels: np.ndarray
    step_timings: dict[str, float]  # seconds per step, keys STEP_KEYS
    diagnostics: RunDiagnostics
    params: GbskParams


@dataclass
class RunArtifacts:
    """A result bundled with the structures that produced it."""

    result: ClusteringResult
    key_balls: BallSet
    forest: SkeletonForest


def run_gbsk(dataset: Dataset, params: GbskParams, n_jobs: int = 1) -> ClusteringResult:
    """Run the standard five-step pipeline."""
    if params.variant != VARIANT_STANDARD:
        raise ValueError(
            f"run_gbsk handles the standard variant; got {params.variant!r} "
            f"(use run_ablation)")
    return execute(dataset, params, n_jobs).result


def run_ablation(dataset: Dataset, params: GbskParams, n_jobs: int = 1) -> ClusteringResult:
    """Run one of the diagnostic variants (params.variant selects which)."""
    if params.variant == VARIANT_STANDARD:
        raise ValueError("run_ablation expects a non-standard variant "
                         "(use run_gbsk for the standard pipeline)")
    return execute(dataset, params, n_jobs).result


def execute(dataset: Dataset, params: GbskParams, n_jobs: int = 1) -> RunArtifacts:
    """Run any variant and keep the key balls and forest for inspection.

    ``n_jobs`` threads the final labeling pass; every other stage is a
    single fused computation, so the labels are identical whatever the
    thread count.
    """
    if not isinstance(dataset, Dataset):
        dataset = Dataset(points=np.asarray(dataset))
    n_jobs = max(1, int(n_jobs)) if n_jobs else 1
    if params.variant == VARIANT_STANDARD:
        return _run_standard(dataset, params, n_jobs)
    if params.variant == VARIANT_NO_SAMPLING:
        return _run_no_sampling(dataset, params, n_jobs)
    return _run_no_rep_balls(dataset, params, n_jobs)


def _sample_ball_sets(sample_sets, params: GbskParams) -> list[BallSet]:
    """Generate every sample's balls in one fused level-synchronous pass.

    The ``min_balls`` floor keeps an unlucky early cut from leaving a
    sample with fewer balls than representatives are drawn from it.
    """
    rng = stream(params.master_seed, BALL_STREAM)
    return generate_balls_grouped([ss.points for ss in sample_sets],
                                  params.max_balls, rng,
                                  min_balls=params.k)


def _run_standard(dataset: Dataset, params: GbskParams, n_jobs: int) -> RunArtifacts:
    timings = dict.fromkeys(STEP_KEYS, 0.0)

    t0 = time.perf_counter()
    sample_sets = sample(dataset, params.s, params.alpha, params.master_seed,
                         min_size=2 * params.k)
    timings["step1_sampling"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    ball_sets = _sample_ball_sets(sample_sets, params)
    rep_centers = []
    for ss, ball_set in zip(sample_sets, ball_sets):
        try:
            reps = identify_peak_balls(ball_set, params.k)
        except InsufficientBallsError as exc:
            raise InsufficientBallsError(f"sample {ss.sample_index}: {exc}") from exc
        rep_centers.append(np.stack([b.center for b in reps]))
    balls_per_sample = [len(bs) for bs in ball_sets]
    agg_centers = np.vstack(rep_centers)
    timings["step2_sample_balls"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    key_balls = build_key_balls(agg_centers, stream(params.master_seed, KEY_BALL_STREAM),
                                min_balls=params.k)
    timings["step3_key_balls"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    forest = construct_forest(key_balls, params.k)
    timings["step4_forest"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    labels = label_points(dataset.points, forest, key_balls, n_jobs)
    timings["step5_labeling"] = time.perf_counter() - t0

    diagnostics = RunDiagnostics(
        balls_per_sample=balls_per_sample,
        rep_ball_count=int(agg_centers.shape[0]),
        key_ball_count=len(key_balls),
        root_count=int(forest.root_ids.size),
    )
    result = ClusteringResult(labels=labels, step_timings=timings,
                              diagnostics=diagnostics, params=params)
    return RunArtifacts(result=result, key_balls=key_balls, forest=forest)


def _run_no_sampling(dataset: Dataset, params: GbskParams, n_jobs: int) -> RunArtifacts:
    timings = dict.fromkeys(STEP_KEYS, 0.0)

    t0 = time.perf_counter()
    ball_set = generate_balls(dataset.points, UNLIMITED,
                              stream(params.master_seed, BALL_STREAM, 0),
                              min_balls=params.k)
    timings["step2_sample_balls"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    forest = construct_forest(ball_set, params.k)
    timings["step4_forest"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    labels = label_points(dataset.points, forest, ball_set, n_jobs)
    timings["step5_labeling"] = time.perf_counter() - t0

    diagnostics = RunDiagnostics(
        balls_per_sample=[len(ball_set)],
        rep_ball_count=0,
        key_ball_count=len(ball_set),
        root_count=int(forest.root_ids.size),
    )
    result = ClusteringResult(labels=labels, step_timings=timings,
                              diagnostics=diagnostics, params=params)
    return RunArtifacts(result=result, key_balls=ball_set, forest=forest)


def _run_no_rep_balls(dataset: Dataset, params: GbskParams, n_jobs: int) -> RunArtifacts:
    timings = dict.fromkeys(STEP_KEYS, 0.0)

    t0 = time.perf_counter()
    sample_sets = sample(dataset, params.s, params.alpha, params.master_seed,
                         min_size=2 * params.k)
    timings["step1_sampling"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    ball_sets = _sample_ball_sets(sample_sets, params)
    pooled: list[GranularBall] = []
    balls_per_sample = []
    for ss, ball_set in zip(sample_sets, ball_sets):
        balls_per_sample.append(len(ball_set))
        # Remap member indices to the global dataset so pooled balls stay
        # meaningful; forest construction itself only uses centers.
        pooled.extend(GranularBall(members=ss.indices[b.members], center=b.center,
                                   radius=b.radius, dm=b.dm)
                      for b in ball_set.balls)
    radii = np.array([b.radius for b in pooled])
    pooled_set = compute_set_density(BallSet(
        balls=pooled,
        mean_radius=float(radii.mean()),
        median_radius=float(np.median(radii)),
        source_point_count=dataset.n,
        stage1_mean_radius=float(radii.mean()),
        stage1_median_radius=float(np.median(radii)),
    ))
    timings["step2_sample_balls"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    forest = construct_forest(pooled_set, params.k)
    timings["step4_forest"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    labels = label_points(dataset.points, forest, pooled_set, n_jobs)
    timings["step5_labeling"] = time.perf_counter() - t0

    diagnostics = RunDiagnostics(
        balls_per_sample=balls_per_sample,
        rep_ball_count=len(pooled_set),
        key_ball_count=len(pooled_set),
        root_count=int(forest.root_ids.size),
    )
    result = ClusteringResult(labels=labels, step_timings=timings,
                              diagnostics=diagnostics, params=params)
    return RunArtifacts(result=result, key_balls=pooled_set, forest=forest)


def build_report(result: ClusteringResult, metrics: dict | None = None) -> dict:
    """JSON-ready run report: params, per-step millisecond timings,
    diagnostics, and quality metrics when ground truth was available."""
    p = result.params
    return {
        "params": {
            "k": p.k,
            "s": p.s,
            "alpha": p.alpha,
            "max_balls": p.max_balls,  # null means unlimited
            "master_seed": p.master_seed,
            "variant": p.variant,
        },
        "step_timings_ms": {key: result.step_timings[key] * 1000.0
                            for key in STEP_KEYS},
        "diagnostics": {
            "balls_per_sample": list(result.diagnostics.balls_per_sample),
            "rep_ball_count": result.diagnostics.rep_ball_count,
            "key_ball_count": result.diagnostics.key_ball_count,
            "root_count": result.diagnostics.root_count,
        },
        "metrics": metrics,
    }
