"""External clustering quality measures: ACC, ARI and AMI.

All three are invariant to label renaming.  ACC is matching-based
accuracy: the contingency table between predicted clusters and true
classes is matched one-to-one by an exact optimal assignment and the
matched mass is divided by n.  ARI is the chance-adjusted Rand index and
AMI the chance-adjusted mutual information (hypergeometric expected-MI
model, arithmetic-mean normalization); both delegate to scikit-learn's
established implementations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment
from sklearn.metrics import adjusted_mutual_info_score, adjusted_rand_score


@dataclass
class ContingencyTable:
    """Predicted-cluster by true-class co-occurrence counts."""

    counts: np.ndarray  # (clusters, classes) int64
    row_sums: np.ndarray
    col_sums: np.ndarray
    total: int

    @classmethod
    def from_labels(cls, predicted, truth) -> "ContingencyTable":
        pred, true = _check_pair(predicted, truth)
        _, pi = np.unique(pred, return_inverse=True)
        _, ti = np.unique(true, return_inverse=True)
        counts = np.zeros((pi.max() + 1, ti.max() + 1), dtype=np.int64)
        np.add.at(counts, (pi, ti), 1)
        return cls(counts=counts, row_sums=counts.sum(axis=1),
                   col_sums=counts.sum(axis=0), total=int(counts.sum()))


def _check_pair(predicted, truth):
    pred = np.asarray(predicted).ravel()
    true = np.asarray(truth).ravel()
    if pred.shape[0] != true.shape[0]:
        raise ValueError(
            f"label vectors differ in length: {pred.shape[0]} vs {true.shape[0]}")
    if pred.shape[0] == 0:
        raise ValueError("label vectors are empty")
    return pred, true


def accuracy(predicted, truth) -> float:
    """Best-matching clustering accuracy in [0, 1].

    Rectangular contingency tables are fine: the assignment simply leaves
    surplus clusters or classes unmatched (equivalent to zero padding).
    """
    table = ContingencyTable.from_labels(predicted, truth)
    rows, cols = linear_sum_assignment(table.counts, maximize=True)
    return float(table.counts[rows, cols].sum() / table.total)


def ari(predicted, truth) -> float:
    """Adjusted Rand index; 1 means identical partitions, ~0 means chance."""
    pred, true = _check_pair(predicted, truth)
    return float(adjusted_rand_score(true, pred))


def ami(predicted, truth) -> float:
    """Adjusted mutual information with arithmetic-mean normalization."""
    pred, true = _check_pair(predicted, truth)
    return float(adjusted_mutual_info_score(true, pred, average_method="arithmetic"))
