"""Skeleton clustering with granular balls.

Random sub-samples are summarised into granular balls, each sample's
density-peak representatives are pooled and regenerated into key balls,
the key balls are linked into a forest of cluster skeletons, and every
point takes the label of its nearest key-ball center.  One pass over the
data at the end is the dominant cost, so runtime grows linearly with the
number of points.

The high-level entry points are the :class:`GBSK` estimator
(scikit-learn style) and the :func:`run_gbsk` / :func:`agbsk_params`
functional pipeline; ``gbsk --help`` covers the command line.
"""

__version__ = "0.1.0"

from .balls import (TAU, UNLIMITED, BallSet, GranularBall, bisect, build_ball,
                    compute_set_density, dump_balls_csv, generate_balls, wdm)
from .datasets import (Dataset, SampleSet, SyntheticSpec, generate_synthetic,
                       load_dataset, load_labels, minmax_rescale, sample,
                       save_dataset_binary, save_dataset_csv, save_labels)
from .estimator import GBSK
from .exceptions import (DatasetFormatError, GBSKError, IndivisibleBallError,
                         InsufficientBallsError)
from .metrics import ContingencyTable, accuracy, ami, ari
from .peaks import (PeakStats, compute_delta, compute_peak_stats,
                    dump_peak_stats_csv, identify_peak_balls, peak_indices)
from .pipeline import (STEP_KEYS, VARIANT_NO_REP_BALLS, VARIANT_NO_SAMPLING,
                       VARIANT_STANDARD, ClusteringResult, GbskParams,
                       RunArtifacts, RunDiagnostics, agbsk_params, build_report,
                       default_params, execute, run_ablation, run_gbsk)
from .skeleton import (SkeletonForest, build_key_balls, construct_forest,
                       dump_skeleton_csv, label_points, render_skeleton_svg)

__all__ = [
    "__version__",
    "TAU", "UNLIMITED", "BallSet", "GranularBall", "bisect", "build_ball",
    "compute_set_density", "dump_balls_csv", "generate_balls", "wdm",
    "Dataset", "SampleSet", "SyntheticSpec", "generate_synthetic",
    "load_dataset", "load_labels", "minmax_rescale", "sample",
    "save_dataset_binary", "save_dataset_csv", "save_labels",
    "GBSK",
    "DatasetFormatError", "GBSKError", "IndivisibleBallError",
    "InsufficientBallsError",
    "ContingencyTable", "accuracy", "ami", "ari",
    "PeakStats", "compute_delta", "compute_peak_stats", "dump_peak_stats_csv",
    "identify_peak_balls", "peak_indices",
    "STEP_KEYS", "VARIANT_NO_REP_BALLS", "VARIANT_NO_SAMPLING",
    "VARIANT_STANDARD", "ClusteringResult", "GbskParams", "RunArtifacts",
    "RunDiagnostics", "agbsk_params", "build_report", "default_params",
    "execute", "run_ablation", "run_gbsk",
    "SkeletonForest", "build_key_balls", "construct_forest",
    "dump_skeleton_csv", "label_points", "render_skeleton_svg",
]
