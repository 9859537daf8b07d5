"""Datasets: in-memory model, file formats, sub-sampling and synthetic data.

Two on-disk formats are supported.  CSV is the friendly one: comma
separated, an optional header row, an optional trailing integer label
column.  The raw binary format exists because CSV parsing dominates the
wall clock long before the clustering does on 10^7-point files; it is a
25-byte little-endian header (magic ``GBSKMATX``, u64 row count, u64
column count, u8 element width, 4 or 8) followed by the matrix values in
row-major order.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field

import numpy as np

from ._rng import SAMPLE_STREAM, check_seed, stream
from ._validation import check_labels, check_points, check_positive_int
from .exceptions import DatasetFormatError

_MAGIC = b"GBSKMATX"
_HEADER = struct.Struct("<8sQQB")


@dataclass
class Dataset:
    """A point matrix plus optional ground-truth labels.

    ``points`` is an (n, d) float64 matrix; ``labels`` is either None or
    an (n,) integer vector.  Treat instances as immutable once built.
    """

    points: np.ndarray
    labels: np.ndarray | None = None

    def __post_init__(self):
        self.points = check_points(self.points)
        if self.labels is not None:
            self.labels = check_labels(self.labels, self.n)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]


@dataclass
class SampleSet:
    """Indices of one random sample drawn from a dataset.

    ``sample_index`` is the 1-based position of this set among the ``s``
    sets drawn together.
    """

    source: Dataset
    indices: np.ndarray
    sample_index: int

    @property
    def points(self) -> np.ndarray:
        return self.source.points[self.indices]

    def __len__(self) -> int:
        return int(self.indices.size)


@dataclass
class SyntheticSpec:
    """Recipe for a Gaussian-mixture benchmark dataset.

    Cluster centers sit on a jittered integer grid scaled by
    ``center_spread``; each cluster is an isotropic Gaussian with
    standard deviation ``cluster_std``.
    """

    cluster_count: int
    points_per_cluster: int
    dimension: int
    center_spread: float = 10.0
    cluster_std: float = 0.5
    seed: int = 0

    def __post_init__(self):
        check_positive_int(self.cluster_count, "cluster_count")
        check_positive_int(self.points_per_cluster, "points_per_cluster")
        check_positive_int(self.dimension, "dimension")
        if not (self.center_spread > 0 and math.isfinite(self.center_spread)):
            raise ValueError("center_spread must be positive and finite")
        if not (self.cluster_std >= 0 and math.isfinite(self.cluster_std)):
            raise ValueError("cluster_std must be non-negative and finite")
        check_seed(self.seed)


def generate_synthetic(spec: SyntheticSpec) -> Dataset:
    """Generate the Gaussian mixture described by ``spec``.

    Every point's label is the index (0-based) of the component that
    generated it, so the returned dataset carries exact ground truth.
    """
    k, per, d = spec.cluster_count, spec.points_per_cluster, spec.dimension
    rng = np.random.default_rng(np.random.SeedSequence(spec.seed))

    # Smallest grid with at least k cells; the float root can land a hair
    # under the true integer root, so correct upward.
    g = max(1, int(math.ceil(k ** (1.0 / d) - 1e-9)))
    while g ** d < k:
        g += 1
    cells = np.column_stack(np.unravel_index(np.arange(k), (g,) * d)).astype(np.float64)
    jitter = rng.uniform(-0.25, 0.25, size=(k, d))
    centers = (cells + jitter) * spec.center_spread

    labels = np.repeat(np.arange(k, dtype=np.int64), per)
    noise = rng.normal(0.0, spec.cluster_std, size=(k * per, d)) if spec.cluster_std > 0 else 0.0
    points = centers[labels] + noise
    return Dataset(points=np.ascontiguousarray(points), labels=labels)


def sample(dataset: Dataset, s: int, alpha: float, master_seed: int,
           min_size: int | None = None) -> list[SampleSet]:
    """Draw ``s`` independent random samples of proportion ``alpha``.

    Within a set, indices are unique (sampling without replacement);
    across sets, overlap is allowed.  Each set has its own derived random
    stream, so results do not depend on evaluation order.  ``min_size``
    clamps the sample size from below (capped at n); the pipeline passes
    2*k here so downstream peak selection always has material to work on.
    """
    check_positive_int(s, "s")
    if not (0.0 < alpha <= 1.0):
        raise ValueError(f"alpha must be in (0, 1], got {alpha}")
    master_seed = check_seed(master_seed)

    n = dataset.n
    size = int(round(n * alpha))
    lower = 1 if min_size is None else min(n, max(1, int(min_size)))
    size = min(n, max(size, lower))

    sets = []
    for i in range(s):
        rng = stream(master_seed, SAMPLE_STREAM, i)
        idx = rng.choice(n, size=size, replace=False)
        sets.append(SampleSet(source=dataset, indices=idx.astype(np.intp), sample_index=i + 1))
    return sets


def minmax_rescale(points: np.ndarray) -> np.ndarray:
    """Rescale each column to [0, 1]; constant columns become 0."""
    pts = check_points(points)
    mins = pts.min(axis=0)
    span = pts.max(axis=0) - mins
    span[span == 0.0] = 1.0
    return (pts - mins) / span


# ---------------------------------------------------------------------------
# File IO

def load_dataset(path, format: str | None = None, has_labels: bool = False) -> Dataset:
    """Load a dataset from ``path``.

    ``format`` is ``"csv"`` or ``"binary"``; when None it is inferred
    from the extension (``.bin`` means binary, anything else CSV).
    ``has_labels`` asks the CSV loader to split off the trailing column
    as integer labels; the binary format never carries labels.
    """
    fmt = format or ("binary" if str(path).endswith(".bin") else "csv")
    if fmt == "csv":
        return _load_csv(path, has_labels)
    if fmt == "binary":
        if has_labels:
            raise ValueError("the binary matrix format does not carry labels; "
                             "use CSV or a separate labels file")
        return _load_binary(path)
    raise ValueError(f"unknown dataset format {format!r}")


def save_dataset_csv(dataset: Dataset, path, include_labels: bool = True) -> None:
    """Write points (and labels, when present and requested) as CSV."""
    if include_labels and dataset.labels is not None:
        fmt = ["%.17g"] * dataset.d + ["%d"]
        data = np.column_stack([dataset.points, dataset.labels.astype(np.float64)])
    else:
        fmt = ["%.17g"] * dataset.d
        data = dataset.points
    np.savetxt(path, data, fmt=fmt, delimiter=",")


def save_dataset_binary(dataset: Dataset, path, width: int = 8) -> None:
    """Write points in the raw binary matrix format (float32 or float64)."""
    if width not in (4, 8):
        raise ValueError(f"element width must be 4 or 8, got {width}")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, dataset.n, dataset.d, width))
        dataset.points.astype(f"<f{width}", copy=False).tofile(fh)


def save_labels(labels, path) -> None:
    """Write one label per line, aligned with the input row order."""
    arr = np.asarray(labels, dtype=np.int64)
    with open(path, "w") as fh:
        for value in arr:
            fh.write(f"{value}\n")


def load_labels(path) -> np.ndarray:
    """Read a one-integer-per-line labels file."""
    values = []
    with open(path) as fh:
        for line_no, line in enumerate(fh, start=1):
            text = line.strip()
            if not text:
                continue
            try:
                values.append(int(text))
            except ValueError:
                raise DatasetFormatError(
                    f"could not parse label {text!r}", line=line_no) from None
    if not values:
        raise DatasetFormatError("labels file contains no values")
    return np.array(values, dtype=np.int64)


def _load_binary(path) -> Dataset:
    with open(path, "rb") as fh:
        header = fh.read(_HEADER.size)
        if len(header) < _HEADER.size:
            raise DatasetFormatError("file too short for a binary matrix header")
        magic, n, d, width = _HEADER.unpack(header)
        if magic != _MAGIC:
            raise DatasetFormatError(f"bad magic {magic!r}, expected {_MAGIC!r}")
        if width not in (4, 8):
            raise DatasetFormatError(f"unsupported element width {width}")
        if n < 1 or d < 1:
            raise DatasetFormatError(f"header declares empty matrix ({n} x {d})")
        data = np.fromfile(fh, dtype=f"<f{width}")
    if data.size != n * d:
        raise DatasetFormatError(
            f"payload holds {data.size} values but header declares {n} x {d}")
    points = data.astype(np.float64, copy=False).reshape(n, d)
    bad = ~np.isfinite(points).all(axis=1)
    if bad.any():
        raise DatasetFormatError("non-finite value", line=int(np.flatnonzero(bad)[0]))
    return Dataset(points=np.ascontiguousarray(points))


def _looks_like_header(line: str) -> bool:
    for token in line.split(","):
        try:
            float(token.strip())
        except ValueError:
            return True
    return False


def _load_csv(path, has_labels: bool) -> Dataset:
    with open(path) as fh:
        first = fh.readline()
    if not first.strip():
        raise DatasetFormatError("file is empty")
    header = _looks_like_header(first)

    try:
        raw = np.loadtxt(path, delimiter=",", skiprows=1 if header else 0,
                         dtype=np.float64, ndmin=2, comments=None)
    except ValueError as exc:
        _diagnose_csv(path, header)
        raise DatasetFormatError(str(exc)) from exc
    if raw.size == 0:
        raise DatasetFormatError("file contains no data rows")

    offset = 2 if header else 1  # data row i (0-based) sits on this file line + i
    nonfinite = ~np.isfinite(raw).all(axis=1)
    if nonfinite.any():
        raise DatasetFormatError(
            "non-finite value", line=int(np.flatnonzero(nonfinite)[0]) + offset)

    if has_labels:
        if raw.shape[1] < 2:
            raise DatasetFormatError(
                "has_labels requires at least two columns (features + label)")
        labels = raw[:, -1]
        if not (labels == np.rint(labels)).all():
            bad = int(np.flatnonzero(labels != np.rint(labels))[0])
            raise DatasetFormatError("label column holds a non-integer", line=bad + offset)
        return Dataset(points=np.ascontiguousarray(raw[:, :-1]),
                       labels=labels.astype(np.int64))
    return Dataset(points=raw)


def _diagnose_csv(path, header: bool) -> None:
    """Re-scan a CSV that numpy rejected to attribute the failure to a line."""
    width = None
    with open(path) as fh:
        for line_no, line in enumerate(fh, start=1):
            if header and line_no == 1:
                continue
            text = line.strip()
            if not text:
                continue
            tokens = text.split(",")
            if width is None:
                width = len(tokens)
            elif len(tokens) != width:
                raise DatasetFormatError(
                    f"expected {width} columns, found {len(tokens)}", line=line_no)
            for token in tokens:
                try:
                    float(token.strip())
                except ValueError:
                    raise DatasetFormatError(
                        f"could not parse value {token.strip()!r}", line=line_no) from None
