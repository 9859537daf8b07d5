"""Density-peak statistics over a ball set.

For each ball: ``delta`` is the center distance to the nearest strictly
denser ball (density ties count the lower-index ball as denser); the
ball with no denser ball gets the set's maximum pairwise center
distance.  ``gamma`` is density times delta, and the balls with the k
largest gamma values are the representative peaks.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .balls import BallSet, GranularBall
from .exceptions import InsufficientBallsError


@dataclass
class PeakStats:
    """Per-ball peak statistics plus the selection order.

    ``order`` sorts ball indices by descending gamma, breaking ties by
    ascending index.
    """

    delta: np.ndarray
    gamma: np.ndarray
    order: np.ndarray


def _higher_density_mask(densities: np.ndarray) -> np.ndarray:
    """mask[j, q] is True when ball q counts as denser than ball j.

    Equivalent to comparing (density, index) pairs; sorting once turns
    the four pairwise comparisons into a single rank comparison.
    """
    t = densities.shape[0]
    order = np.argsort(-densities, kind="stable")
    rank = np.empty(t, dtype=np.intp)
    rank[order] = np.arange(t)
    return rank[None, :] < rank[:, None]


def _delta_from(centers: np.ndarray, densities: np.ndarray) -> np.ndarray:
    if centers.shape[0] == 1:
        return np.zeros(1)
    dist = cdist(centers, centers)
    top = dist.max()
    dist[~_higher_density_mask(densities)] = np.inf
    delta = dist.min(axis=1)
    # Exactly one ball has nothing denser: the first one at peak density.
    delta[np.argmax(densities)] = top
    return delta


def compute_delta(ball_set: BallSet) -> np.ndarray:
    """Distance from each ball's center to its nearest denser ball's center."""
    if len(ball_set) == 0:
        raise ValueError("ball set is empty")
    return _delta_from(ball_set.centers_matrix(), ball_set.densities_vector())


def compute_peak_stats(ball_set: BallSet) -> PeakStats:
    if len(ball_set) == 0:
        raise ValueError("ball set is empty")
    densities = ball_set.densities_vector()
    delta = _delta_from(ball_set.centers_matrix(), densities)
    gamma = densities * delta
    order = np.argsort(-gamma, kind="stable")  # stable: ties keep index order
    return PeakStats(delta=delta, gamma=gamma, order=order)


def peak_indices(ball_set: BallSet, k: int) -> np.ndarray:
    """Indices of the k highest-gamma balls, gamma-descending."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    t = len(ball_set)
    if k > t:
        raise InsufficientBallsError(
            f"requested {k} peak balls but only {t} are available; "
            f"raise the ball budget (max_balls) or the sampling proportion (alpha)")
    return compute_peak_stats(ball_set).order[:k]


def identify_peak_balls(ball_set: BallSet, k: int) -> list[GranularBall]:
    """The k representative balls of the set, highest gamma first."""
    return [ball_set.balls[i] for i in peak_indices(ball_set, k)]


def dump_peak_stats_csv(ball_set: BallSet, path) -> None:
    """Write one row per ball: id, density, delta, gamma."""
    stats = compute_peak_stats(ball_set)
    densities = ball_set.densities_vector()
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["ball_id", "density", "delta", "gamma"])
        for i in range(len(ball_set)):
            writer.writerow([i, repr(float(densities[i])),
                             repr(float(stats.delta[i])), repr(float(stats.gamma[i]))])
