"""Skeleton forest: key balls, parent links and label propagation.

The k highest-gamma key balls become tree roots.  Every other key ball
points at its nearest denser key ball, which yields k trees whose root
labels (1..k, in descending root gamma order) propagate down.  Points
then inherit the label of their nearest key-ball center.
"""

from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .balls import UNLIMITED, BallSet, generate_balls
from .exceptions import InsufficientBallsError
from .peaks import _higher_density_mask, compute_peak_stats

# Cap on distance-matrix chunk entries while labeling.  Fixed per run (it
# depends only on the key-ball count), so worker count cannot change results.
_CHUNK_ENTRIES = 4_000_000


@dataclass
class SkeletonForest:
    """Parent links, roots and per-ball labels over one key-ball set."""

    parent_ids: np.ndarray  # -1 at roots
    root_ids: np.ndarray    # root ball indices, descending gamma
    labels: np.ndarray      # per key ball, 1..k


def build_key_balls(agg_centers: np.ndarray,
                    rng: np.random.Generator | None = None,
                    min_balls: int | None = None) -> BallSet:
    """Regenerate balls over pooled representative centers (no budget).

    Duplicated centers are legitimate input here: overlapping samples can
    nominate the same representative more than once.  ``min_balls``
    passes through to :func:`generate_balls`; forest construction needs
    at least k key balls, so callers that know k should set it.
    """
    agg_centers = np.asarray(agg_centers, dtype=np.float64)
    if agg_centers.ndim != 2 or agg_centers.shape[0] == 0:
        raise ValueError("need a nonempty 2-D matrix of pooled centers")
    return generate_balls(agg_centers, UNLIMITED, rng, min_balls=min_balls)


def construct_forest(key_balls: BallSet, k: int) -> SkeletonForest:
    """Link each non-root key ball to its nearest denser key ball.

    Density ties count the lower-index ball as denser; distance ties pick
    the lowest index.  Roots (the top-k gamma balls) keep parent -1 even
    when a denser ball exists.
    """
    w = len(key_balls)
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if k > w:
        raise InsufficientBallsError(
            f"insufficient key balls (W={w} < k={k}); increase the number of "
            f"sample sets (s), the sampling proportion (alpha) or the ball "
            f"budget (max_balls)")

    stats = compute_peak_stats(key_balls)
    roots = stats.order[:k].astype(np.int64)

    centers = key_balls.centers_matrix()
    densities = key_balls.densities_vector()
    higher = _higher_density_mask(densities)
    masked = np.where(higher, cdist(centers, centers), np.inf)
    nearest_denser = masked.argmin(axis=1)  # first index wins distance ties

    parent_ids = np.full(w, -1, dtype=np.int64)
    is_root = np.zeros(w, dtype=bool)
    is_root[roots] = True
    has_denser = higher.any(axis=1)
    # The highest-gamma ball is always the ball with no denser ball, so
    # every non-root has a denser candidate.
    assign = ~is_root & has_denser
    parent_ids[assign] = nearest_denser[assign]

    labels = np.zeros(w, dtype=np.int64)
    labels[roots] = np.arange(1, k + 1)
    for i in range(w):
        if labels[i]:
            continue
        path = []
        j = i
        while labels[j] == 0:
            path.append(j)
            j = parent_ids[j]
        for p in path:
            labels[p] = labels[j]

    return SkeletonForest(parent_ids=parent_ids, root_ids=roots, labels=labels)


def label_points(points: np.ndarray, forest: SkeletonForest, key_balls: BallSet,
                 n_jobs: int = 1) -> np.ndarray:
    """Give each point the label of its nearest key-ball center.

    Distance ties resolve to the lower key-ball index.  Work is chunked
    over fixed point ranges and written in place, so any worker count
    produces identical labels.
    """
    points = np.asarray(points, dtype=np.float64)
    centers = key_balls.centers_matrix()
    key_labels = forest.labels
    n = points.shape[0]
    out = np.empty(n, dtype=np.int64)

    chunk = max(1024, _CHUNK_ENTRIES // max(1, centers.shape[0]))
    spans = [(lo, min(lo + chunk, n)) for lo in range(0, n, chunk)]

    def work(span):
        lo, hi = span
        dist = cdist(points[lo:hi], centers)
        out[lo:hi] = key_labels[dist.argmin(axis=1)]

    if n_jobs and n_jobs > 1 and len(spans) > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            list(pool.map(work, spans))
    else:
        for span in spans:
            work(span)
    return out


def dump_skeleton_csv(forest: SkeletonForest, key_balls: BallSet, path) -> None:
    """Write one row per key ball: id, parent id (-1 at roots), center, label."""
    dim = key_balls.balls[0].center.shape[0] if key_balls.balls else 0
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["ball_id", "parent_id"] + [f"c{i}" for i in range(dim)]
                        + ["label"])
        for i, ball in enumerate(key_balls.balls):
            writer.writerow([i, int(forest.parent_ids[i])]
                            + [repr(float(x)) for x in ball.center]
                            + [int(forest.labels[i])])


_PALETTE = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b",
    "#e377c2", "#7f7f7f", "#bcbd22", "#17becf", "#aec7e8", "#ffbb78",
    "#98df8a", "#ff9896", "#c5b0d5", "#c49c94", "#f7b6d2", "#c7c7c7",
    "#dbdb8d", "#9edae5",
]


def render_skeleton_svg(points: np.ndarray, point_labels: np.ndarray,
                        forest: SkeletonForest, key_balls: BallSet, path,
                        max_points: int = 4000) -> None:
    """Draw points, key-ball circles and skeleton edges as an SVG file.

    Only the first two coordinates are drawn; inputs with more than three
    dimensions are rejected.  At most ``max_points`` points are plotted
    (deterministic stride subsample) to keep files small.
    """
    points = np.asarray(points, dtype=np.float64)
    d = points.shape[1]
    if d > 3:
        raise ValueError(f"SVG rendering supports 2-D or 3-D data, got d={d}")
    if d < 2:
        raise ValueError("SVG rendering needs at least two coordinates")

    xy = points[:, :2]
    centers = key_balls.centers_matrix()[:, :2]
    radii = key_balls.radii_vector()

    lo = np.minimum(xy.min(axis=0), (centers - radii[:, None]).min(axis=0))
    hi = np.maximum(xy.max(axis=0), (centers + radii[:, None]).max(axis=0))
    span = np.maximum(hi - lo, 1e-12)
    size = 720.0
    pad = 20.0
    scale = (size - 2 * pad) / span.max()

    def sx(v):
        return pad + (v - lo[0]) * scale

    def sy(v):
        # Flip the vertical axis: SVG y grows downward.
        return size - pad - (v - lo[1]) * scale

    stride = max(1, int(np.ceil(xy.shape[0] / max_points)))
    shown = np.arange(0, xy.shape[0], stride)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size:.0f}" '
        f'height="{size:.0f}" viewBox="0 0 {size:.0f} {size:.0f}">',
        f'<rect width="{size:.0f}" height="{size:.0f}" fill="white"/>',
    ]
    for i in shown:
        color = _PALETTE[(int(point_labels[i]) - 1) % len(_PALETTE)]
        parts.append(f'<circle cx="{sx(xy[i, 0]):.2f}" cy="{sy(xy[i, 1]):.2f}" '
                     f'r="1.5" fill="{color}" fill-opacity="0.5" class="pt"/>')
    for i, ball in enumerate(key_balls.balls):
        color = _PALETTE[(int(forest.labels[i]) - 1) % len(_PALETTE)]
        parts.append(
            f'<circle cx="{sx(centers[i, 0]):.2f}" cy="{sy(centers[i, 1]):.2f}" '
            f'r="{max(radii[i] * scale, 2.0):.2f}" fill="none" '
            f'stroke="{color}" stroke-width="1.2" class="ball"/>')
    for i, parent in enumerate(forest.parent_ids):
        if parent < 0:
            continue
        parts.append(
            f'<line x1="{sx(centers[i, 0]):.2f}" y1="{sy(centers[i, 1]):.2f}" '
            f'x2="{sx(centers[parent, 0]):.2f}" y2="{sy(centers[parent, 1]):.2f}" '
            f'stroke="#333333" stroke-width="1" class="edge"/>')
    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts) + "\n")
