"""Synthetic data, file ingestion and term-document preprocessing.

File formats (columns are observations throughout):

* dense CSV: one matrix row per line, comma separated;
* COO text: header ``m n nnz`` then ``nnz`` lines ``row col value``, 1-indexed,
  duplicates summed;
* labels: one integer per line.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from spca._rng import stream
from spca.errors import DataFormatError, DegenerateColumnError
from spca.model import DataMatrix, unit_columns

WEDGE_HALF_ANGLE = math.pi / 4


@dataclass(frozen=True)
class SyntheticSpec:
    """Two planar wedges sharing the z-axis as an edge.

    Cluster 0 lies between the z-axis and (1, 0, 1)/sqrt(2), cluster 1
    between the z-axis and (0, 1, 1)/sqrt(2). Radii are uniform in
    ``radius_range`` so that only the angle separates the clusters.
    """

    n_per_cluster: int = 100
    radius_range: tuple[float, float] = (0.5, 2.0)
    jitter: float = 0.02
    seed: int = 0

    def __post_init__(self):
        lo, hi = self.radius_range
        if self.n_per_cluster < 1:
            raise ValueError(f"n_per_cluster must be >= 1, got {self.n_per_cluster}")
        if not 0 < lo <= hi:
            raise ValueError(f"radius_range must satisfy 0 < low <= high, got {self.radius_range}")
        if not self.jitter >= 0:
            raise ValueError(f"jitter must be nonnegative, got {self.jitter}")


@dataclass(frozen=True)
class LabeledDataset:
    x: DataMatrix
    truth: np.ndarray
    meta: str = ""

    def __post_init__(self):
        if len(self.truth) != self.x.n:
            raise ValueError(f"{len(self.truth)} labels for {self.x.n} columns")


def gen_two_wedges(spec: SyntheticSpec = SyntheticSpec()) -> LabeledDataset:
    """3 x (2 n_per_cluster) points; the first half is cluster 0.

    Each point is ``radius * (sin t, 0, cos t)`` (cluster 0) or
    ``radius * (0, sin t, cos t)`` (cluster 1) with ``t`` uniform in
    ``[0, pi/4]``, plus Gaussian jitter of std ``spec.jitter`` along the axis
    normal to the wedge's plane.
    """
    rng = stream(spec.seed, "synth")
    n = spec.n_per_cluster
    total = 2 * n
    angle = rng.uniform(0.0, WEDGE_HALF_ANGLE, total)
    radius = rng.uniform(spec.radius_range[0], spec.radius_range[1], total)
    off_plane = rng.normal(0.0, spec.jitter, total) if spec.jitter > 0 else np.zeros(total)

    x = np.empty((3, total))
    in_plane = radius * np.sin(angle)
    x[2] = radius * np.cos(angle)
    x[0, :n], x[1, :n] = in_plane[:n], off_plane[:n]
    x[0, n:], x[1, n:] = off_plane[n:], in_plane[n:]
    truth = np.repeat(np.arange(2), n)
    meta = (
        f"two-wedge synthetic: n_per_cluster={n} radius_range={tuple(spec.radius_range)} "
        f"jitter={spec.jitter} seed={spec.seed}"
    )
    return LabeledDataset(DataMatrix(x), truth, meta)


def _parse_float(text: str, row: int, col: int) -> float:
    try:
        val = float(text)
    except ValueError:
        raise DataFormatError(f"cannot parse {text.strip()!r} as a number", row, col) from None
    if not math.isfinite(val):
        raise DataFormatError(f"non-finite value {text.strip()!r}", row, col)
    return val


def load_dense_csv(path) -> DataMatrix:
    rows: list[list[float]] = []
    with open(path, newline="") as fh:
        for i, line in enumerate(csv.reader(fh), start=1):
            if not line or all(not c.strip() for c in line):
                continue
            vals = [_parse_float(c, i, j) for j, c in enumerate(line, start=1)]
            if rows and len(vals) != len(rows[0]):
                raise DataFormatError(
                    f"ragged row: {len(vals)} fields, expected {len(rows[0])}", i
                )
            rows.append(vals)
    if not rows:
        raise DataFormatError(f"{path}: no data")
    return DataMatrix(np.array(rows))


def save_dense_csv(path, x) -> None:
    """Write with 17 significant digits, enough to round-trip every float64."""
    x = x.x if isinstance(x, DataMatrix) else np.asarray(x, dtype=np.float64)
    with open(path, "w", newline="") as fh:
        for row in np.atleast_2d(x):
            fh.write(",".join(format(float(v), ".17g") for v in row))
            fh.write("\n")


def load_coo(path) -> DataMatrix:
    with open(path) as fh:
        lines = [(i, ln.split()) for i, ln in enumerate(fh, start=1) if ln.strip()]
    if not lines:
        raise DataFormatError(f"{path}: empty file")
    hdr_line, hdr = lines[0]
    if len(hdr) != 3:
        raise DataFormatError("header must be 'm n nnz'", hdr_line)
    try:
        m, n, nnz = (int(t) for t in hdr)
    except ValueError:
        raise DataFormatError("header must hold three integers", hdr_line) from None
    if m < 1 or n < 1 or nnz < 0:
        raise DataFormatError(f"invalid header values m={m} n={n} nnz={nnz}", hdr_line)
    body = lines[1:]
    if len(body) != nnz:
        raise DataFormatError(f"header declares {nnz} entries, found {len(body)}")

    rows = np.empty(nnz, dtype=np.intp)
    cols = np.empty(nnz, dtype=np.intp)
    vals = np.empty(nnz)
    for e, (lineno, parts) in enumerate(body):
        if len(parts) != 3:
            raise DataFormatError("expected 'row col value'", lineno)
        try:
            i, j = int(parts[0]), int(parts[1])
        except ValueError:
            raise DataFormatError("row/col must be integers", lineno) from None
        if not (1 <= i <= m and 1 <= j <= n):
            raise DataFormatError(f"index ({i}, {j}) outside {m} x {n}", lineno)
        rows[e], cols[e] = i - 1, j - 1
        vals[e] = _parse_float(parts[2], lineno, 3)
    x = np.zeros((m, n))
    np.add.at(x, (rows, cols), vals)
    return DataMatrix(x)


def save_coo(path, x) -> None:
    x = x.x if isinstance(x, DataMatrix) else np.asarray(x, dtype=np.float64)
    ii, jj = np.nonzero(x)
    with open(path, "w") as fh:
        fh.write(f"{x.shape[0]} {x.shape[1]} {len(ii)}\n")
        for i, j in zip(ii, jj):
            fh.write(f"{i + 1} {j + 1} {format(float(x[i, j]), '.17g')}\n")


def tfidf(x) -> DataMatrix:
    """Raw count times ``ln(n / df)`` per term (row); no smoothing.

    Terms present in every document get weight 0, as do absent terms.
    """
    x = x.x if isinstance(x, DataMatrix) else DataMatrix(x).x
    if np.any(x < 0):
        i, j = np.argwhere(x < 0)[0]
        raise ValueError(f"tf-idf needs nonnegative counts; entry ({i}, {j}) is {x[i, j]}")
    n = x.shape[1]
    df = np.count_nonzero(x > 0, axis=1)
    idf = np.zeros(x.shape[0])
    present = df > 0
    idf[present] = np.log(n / df[present])
    return DataMatrix(x * idf[:, None])


def normalize_columns(x) -> DataMatrix:
    """Unit l2 columns; a zero column raises :class:`DegenerateColumnError`."""
    x = x.x if isinstance(x, DataMatrix) else x
    try:
        return DataMatrix(unit_columns(x), normalized=True)
    except DegenerateColumnError as exc:
        raise DegenerateColumnError(exc.column, f"data column {exc.column} is all zeros") from None


def load_labels(path) -> np.ndarray:
    out = []
    with open(path) as fh:
        for i, line in enumerate(fh, start=1):
            s = line.strip()
            if not s:
                continue
            try:
                out.append(int(s))
            except ValueError:
                raise DataFormatError(f"label {s!r} is not an integer", i) from None
    return np.array(out, dtype=np.int64)


def save_labels(path, labels) -> None:
    with open(path, "w") as fh:
        for lab in np.asarray(labels):
            fh.write(f"{int(lab)}\n")
