"""Scikit-learn style front end for the skeleton clustering pipeline."""

from __future__ import annotations

import numbers

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .datasets import Dataset
from .pipeline import VARIANT_STANDARD, VARIANTS, default_params, execute
from .skeleton import label_points


class GBSK(ClusterMixin, BaseEstimator):
    """Granular-ball skeleton clustering.

    Summarises random sub-samples into granular balls, keeps each
    sample's density-peak representatives, links the pooled key balls
    into a forest of ``n_clusters`` trees and labels every point by its
    nearest key-ball center.  Runtime is linear in the number of points,
    which makes the estimator usable where quadratic methods are not.

    With the defaults (``n_sample_sets=30``, ``sample_fraction=None``
    meaning 1/sqrt(n), ``max_balls="auto"`` meaning 10*n_clusters) the
    only decision left to the caller is ``n_clusters``.

    Parameters
    ----------
    n_clusters : int, default=8
        Number of clusters (skeleton trees) to form.
    n_sample_sets : int, default=30
        How many random sample sets to summarise.
    sample_fraction : float or None, default=None
        Proportion of points per sample set, in (0, 1].  None picks
        1/sqrt(n) at fit time.
    max_balls : int, "auto" or None, default="auto"
        Ball budget per sample set.  "auto" means 10*n_clusters, None
        disables the budget.
    variant : {"standard", "no-sampling", "no-representative-balls"}
        Pipeline variant; the non-standard ones exist for diagnostics.
    random_state : int or None, default=None
        Master seed.  Runs with the same seed produce identical labels
        regardless of ``n_jobs``.
    n_jobs : int or None, default=None
        Thread count for the per-sample and labeling stages.

    Attributes
    ----------
    labels_ : ndarray of shape (n_samples,)
        Cluster label of each training point, in 1..n_clusters.
    key_ball_centers_ : ndarray of shape (W, n_features)
        Centers the labeling step assigns against.
    key_ball_labels_ : ndarray of shape (W,)
        Cluster label of each key ball.
    step_timings_ : dict
        Seconds spent in each pipeline step.
    diagnostics_ : RunDiagnostics
        Ball counts collected along the run.
    params_ : GbskParams
        The fully resolved parameters the run used.

    Examples
    --------
    >>> import numpy as np
    >>> from gbsk import GBSK
    >>> rng = np.random.default_rng(0)
    >>> X = np.vstack([rng.normal(0, .3, (50, 2)), rng.normal(5, .3, (50, 2))])
    >>> labels = GBSK(n_clusters=2, random_state=0).fit_predict(X)
    >>> len(set(labels))
    2
    """

    def __init__(self, n_clusters=8, n_sample_sets=30, sample_fraction=None,
                 max_balls="auto", variant=VARIANT_STANDARD, random_state=None,
                 n_jobs=None):
        self.n_clusters = n_clusters
        self.n_sample_sets = n_sample_sets
        self.sample_fraction = sample_fraction
        self.max_balls = max_balls
        self.variant = variant
        self.random_state = random_state
        self.n_jobs = n_jobs

    def _resolve_seed(self) -> int:
        if self.random_state is None:
            return int(np.random.SeedSequence().generate_state(1, np.uint64)[0])
        if isinstance(self.random_state, (int, np.integer)) and self.random_state >= 0:
            return int(self.random_state)
        raise ValueError("random_state must be a non-negative int or None, "
                         f"got {self.random_state!r}")

    def fit(self, X, y=None):
        """Cluster X and store the labels and skeleton structures."""
        X = check_array(X, dtype=np.float64, order="C")
        self.n_features_in_ = X.shape[1]
        if not isinstance(self.n_clusters, numbers.Integral) or self.n_clusters < 1:
            raise ValueError(f"n_clusters must be a positive int, got {self.n_clusters!r}")
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")

        params = default_params(
            n=X.shape[0],
            k=int(self.n_clusters),
            s=None if self.n_sample_sets is None else int(self.n_sample_sets),
            alpha=self.sample_fraction,
            max_balls=self.max_balls if self.max_balls == "auto" or self.max_balls is None
            else int(self.max_balls),
            master_seed=self._resolve_seed(),
            variant=self.variant,
        )
        n_jobs = 1 if self.n_jobs is None else int(self.n_jobs)
        artifacts = execute(Dataset(points=X), params, n_jobs=n_jobs)

        self.params_ = artifacts.result.params
        self.labels_ = artifacts.result.labels
        self.step_timings_ = artifacts.result.step_timings
        self.diagnostics_ = artifacts.result.diagnostics
        self.key_ball_centers_ = artifacts.key_balls.centers_matrix()
        self.key_ball_labels_ = artifacts.forest.labels
        self._key_balls = artifacts.key_balls
        self._forest = artifacts.forest
        return self

    def predict(self, X):
        """Label new points by their nearest fitted key-ball center."""
        check_is_fitted(self, "labels_")
        X = check_array(X, dtype=np.float64, order="C")
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected "
                             f"{self.n_features_in_}")
        n_jobs = 1 if self.n_jobs is None else int(self.n_jobs)
        return label_points(X, self._forest, self._key_balls, n_jobs)
