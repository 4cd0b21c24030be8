"""
Datasets, CSV ingestion and synthetic scenario generators.

Generated data is drawn from numpy's PCG64 bit generator, whose stream is
platform independent; the generator name is written into the header of every
generated file so a dataset can be regenerated from its header alone.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .exceptions import GenerationError, ParseError, StructuralError, ValidationError

__all__ = [
    "Dataset",
    "LabeledDataset",
    "SyntheticSpec",
    "SCENARIOS",
    "PRNG_NAME",
    "load_csv",
    "write_csv",
    "generate",
]

PRNG_NAME = "PCG64"
SCENARIOS = ("gauss-blobs-with-uniform-noise", "unbalanced-two-cluster", "worm-like")
GEN_TAG = "# odar-gen"

# rejection radius around cluster centers, in cluster standard deviations
_REJECT_SIGMAS = 3.0
_MAX_ATTEMPTS = 10_000


def _frozen(a):
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Dataset:
    """N objects in d-dimensional real space. Row i is object i throughout."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] < 1:
            raise StructuralError(f"points must be a non-empty N x d matrix, got shape {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise ValidationError("points contain NaN or Inf")
        object.__setattr__(self, "points", _frozen(pts))

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]

    def __len__(self):
        return self.n


@dataclass(frozen=True)
class LabeledDataset:
    """A dataset plus per-object ground truth (True = outlier)."""

    data: Dataset
    labels: np.ndarray
    columns: tuple[str, ...] | None = None

    def __post_init__(self):
        if not isinstance(self.data, Dataset):
            object.__setattr__(self, "data", Dataset(self.data))
        labels = np.asarray(self.labels)
        if labels.shape != (self.data.n,):
            raise StructuralError(
                f"expected {self.data.n} labels, got shape {labels.shape}")
        object.__setattr__(self, "labels", _frozen(labels.astype(bool)))

    @property
    def outlier_rate(self) -> float:
        return int(self.labels.sum()) / self.data.n

    @property
    def points(self) -> np.ndarray:
        return self.data.points

    @classmethod
    def unlabeled(cls, points) -> "LabeledDataset":
        data = points if isinstance(points, Dataset) else Dataset(points)
        return cls(data, np.zeros(data.n, dtype=bool))


# --------------------------------------------------------------------------- #
# CSV
# --------------------------------------------------------------------------- #

def _is_float(s):
    try:
        float(s)
    except ValueError:
        return False
    return True


def _resolve_label_column(label_column, header, width):
    if label_column is None:
        return None
    if isinstance(label_column, int):
        pos = label_column
    else:
        name = str(label_column).strip()
        if header is not None and name in header:
            return header.index(name)
        if not name.lstrip("-").isdigit():
            raise StructuralError(f"label column {name!r} not found in header {header}")
        pos = int(name)
    # 1-based, negative counts from the end
    idx = pos - 1 if pos > 0 else width + pos
    if pos == 0 or not 0 <= idx < width:
        raise StructuralError(f"label column {label_column!r} out of range for {width} columns")
    return idx


def load_csv(path, label_column=None) -> LabeledDataset:
    """
    Read a comma separated file into a :class:`LabeledDataset`.

    Lines starting with ``#`` and blank lines are skipped. The first data line
    is taken as a header when none of its fields parse as numbers.

    Parameters
    ----------
    path : str or Path
        File to read (UTF-8).
    label_column : str or int, optional
        Column holding 0/1 ground truth, given by header name or by 1-based
        position (negative positions count from the end). Without it every
        object is labeled normal.
    """
    path = Path(path)
    header = None
    rows = []
    width = None
    with path.open(newline="", encoding="utf-8") as fh:
        for lineno, raw in enumerate(csv.reader(fh), start=1):
            if not raw or all(not f.strip() for f in raw):
                continue
            if raw[0].lstrip().startswith("#"):
                continue
            fields = [f.strip() for f in raw]
            if header is None and not rows and not any(_is_float(f) for f in fields):
                header = fields
                width = len(fields)
                continue
            if width is None:
                width = len(fields)
            elif len(fields) != width:
                raise StructuralError(
                    f"line {lineno}: expected {width} columns, found {len(fields)}")
            rows.append((lineno, fields))

    if not rows:
        raise StructuralError(f"{path}: no data rows")

    label_idx = _resolve_label_column(label_column, header, width)
    values = np.empty((len(rows), width))
    for r, (lineno, fields) in enumerate(rows):
        for c, f in enumerate(fields):
            try:
                v = float(f)
            except ValueError:
                raise ParseError(f"cannot parse {f!r} as a real number", line=lineno) from None
            if not math.isfinite(v):
                raise ParseError(f"non-finite value {f!r}", line=lineno)
            values[r, c] = v

    if label_idx is None:
        labels = np.zeros(len(rows), dtype=bool)
        feature_cols = list(range(width))
    else:
        raw_labels = values[:, label_idx]
        bad = ~np.isin(raw_labels, (0.0, 1.0))
        if bad.any():
            r = int(np.flatnonzero(bad)[0])
            raise ValidationError(
                f"line {rows[r][0]}: label {rows[r][1][label_idx]!r} is not 0 or 1")
        labels = raw_labels == 1.0
        feature_cols = [c for c in range(width) if c != label_idx]

    if not feature_cols:
        raise StructuralError("no feature columns left after removing the label column")
    columns = tuple(header[c] for c in feature_cols) if header else None
    return LabeledDataset(Dataset(values[:, feature_cols]), labels, columns)


def write_csv(dataset: LabeledDataset, path, comment: str | None = None, with_labels=True):
    """Write ``dataset`` as CSV with a header line and an optional ``# ...`` comment line."""
    pts = dataset.data.points
    names = list(dataset.columns) if dataset.columns else [f"x{i}" for i in range(pts.shape[1])]
    if with_labels:
        names.append("label")
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        if comment:
            fh.write(comment.rstrip("\n") + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(names)
        for row, lab in zip(pts, dataset.labels):
            out = [repr(float(v)) for v in row]
            if with_labels:
                out.append(int(lab))
            w.writerow(out)


# --------------------------------------------------------------------------- #
# Synthetic data
# --------------------------------------------------------------------------- #

@dataclass(frozen=True)
class SyntheticSpec:
    """
    Recipe for a synthetic labeled dataset.

    ``bbox`` is one ``(lo, hi)`` interval per dimension and fixes the
    dimensionality. ``cluster_std`` defaults to a per-scenario fraction of the
    smallest box side: 0.02 for blobs, 0.015 for the unbalanced pair and 0.01
    for worms. These spreads are our own choice, not published values, and
    detection accuracy on the scenarios drops as they grow.
    """

    scenario: str
    cluster_sizes: tuple[int, ...]
    n_outliers: int = 0
    bbox: tuple[tuple[float, float], ...] = ((0.0, 100.0), (0.0, 100.0))
    seed: int = 0
    cluster_std: float | None = None

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ValidationError(f"unknown scenario {self.scenario!r}; choose from {SCENARIOS}")
        sizes = tuple(int(s) for s in self.cluster_sizes)
        if not sizes or any(s < 0 for s in sizes) or max(sizes) < 1:
            raise ValidationError("need at least one cluster of size >= 1")
        if self.scenario == "unbalanced-two-cluster" and len(sizes) != 2:
            raise ValidationError("unbalanced-two-cluster takes exactly two cluster sizes")
        if int(self.n_outliers) < 0:
            raise ValidationError("outlier count must be nonnegative")
        bbox = tuple((float(lo), float(hi)) for lo, hi in self.bbox)
        if not bbox or any(not hi > lo for lo, hi in bbox):
            raise ValidationError(f"invalid bounding box {self.bbox}")
        if not 0 <= int(self.seed) < 2**64:
            raise ValidationError("seed must fit in an unsigned 64-bit integer")
        object.__setattr__(self, "cluster_sizes", sizes)
        object.__setattr__(self, "n_outliers", int(self.n_outliers))
        object.__setattr__(self, "bbox", bbox)
        object.__setattr__(self, "seed", int(self.seed))

    @property
    def dim(self) -> int:
        return len(self.bbox)

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "cluster_sizes": list(self.cluster_sizes),
            "n_outliers": self.n_outliers,
            "bbox": [list(b) for b in self.bbox],
            "seed": self.seed,
            "cluster_std": self.cluster_std,
        }

    def header(self) -> str:
        return f"{GEN_TAG} prng={PRNG_NAME} seed={self.seed} spec={json.dumps(self.to_dict(), sort_keys=True)}"


@dataclass
class _Layout:
    points: np.ndarray
    centers: np.ndarray  # anchors that outliers must keep clear of
    std: float


def _blob_centers(rng, n, lo, hi, std):
    # centers inside the inner 60% of the box, pairwise >= 8 std apart when possible
    inner_lo = lo + 0.2 * (hi - lo)
    inner_hi = hi - 0.2 * (hi - lo)
    centers = []
    for _ in range(n):
        for _attempt in range(1000):
            c = rng.uniform(inner_lo, inner_hi)
            if all(np.linalg.norm(c - o) >= 8 * std for o in centers):
                break
        centers.append(c)
    return np.array(centers)


def _layout_blobs(spec, rng, lo, hi):
    std = spec.cluster_std or 0.02 * float(np.min(hi - lo))
    centers = _blob_centers(rng, len(spec.cluster_sizes), lo, hi, std)
    pts = [rng.normal(c, std, size=(s, spec.dim)) for c, s in zip(centers, spec.cluster_sizes)]
    return _Layout(np.vstack(pts), centers, std)


def _layout_unbalanced(spec, rng, lo, hi):
    # same spread for both clusters, so the density ratio equals the size ratio
    std = spec.cluster_std or 0.015 * float(np.min(hi - lo))
    mid = (lo + hi) / 2
    offset = np.zeros(spec.dim)
    offset[0] = 0.2 * (hi[0] - lo[0])
    centers = np.array([mid - offset, mid + offset])
    pts = [rng.normal(c, std, size=(s, spec.dim)) for c, s in zip(centers, spec.cluster_sizes)]
    return _Layout(np.vstack(pts), centers, std)


def _layout_worms(spec, rng, lo, hi):
    width = float(np.min(hi - lo))
    std = spec.cluster_std or 0.01 * width
    step = 2.0 * std
    inner_lo = lo + 0.15 * (hi - lo)
    inner_hi = hi - 0.15 * (hi - lo)
    pts, anchors = [], []
    for size in spec.cluster_sizes:
        n_steps = max(2, int(math.sqrt(size) * 2))
        pos = rng.uniform(inner_lo, inner_hi)
        heading = rng.normal(size=spec.dim)
        heading /= np.linalg.norm(heading)
        path = [pos.copy()]
        for _ in range(n_steps - 1):
            heading = heading + rng.normal(scale=0.3, size=spec.dim)
            heading /= np.linalg.norm(heading)
            pos = np.clip(pos + step * heading, inner_lo, inner_hi)
            path.append(pos.copy())
        path = np.array(path)
        which = rng.integers(0, len(path), size=size)
        pts.append(path[which] + rng.normal(scale=std, size=(size, spec.dim)))
        anchors.append(path)
    return _Layout(np.vstack(pts), np.vstack(anchors), std)


_LAYOUTS = {
    "gauss-blobs-with-uniform-noise": _layout_blobs,
    "unbalanced-two-cluster": _layout_unbalanced,
    "worm-like": _layout_worms,
}


def _place_outliers(rng, count, lo, hi, centers, radius):
    out = np.empty((count, len(lo)))
    for i in range(count):
        for _attempt in range(_MAX_ATTEMPTS):
            p = rng.uniform(lo, hi)
            if np.min(np.linalg.norm(centers - p, axis=1)) >= radius:
                out[i] = p
                break
        else:
            raise GenerationError(
                f"could not place outlier {i} after {_MAX_ATTEMPTS} attempts; "
                "the bounding box is too small for the rejection zones")
    return out


def generate(spec: SyntheticSpec) -> LabeledDataset:
    """
    Draw a labeled dataset for ``spec``. Cluster members come first (normal),
    followed by the uniformly placed outliers.
    """
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    lo = np.array([b[0] for b in spec.bbox])
    hi = np.array([b[1] for b in spec.bbox])
    layout = _LAYOUTS[spec.scenario](spec, rng, lo, hi)
    outliers = _place_outliers(rng, spec.n_outliers, lo, hi, layout.centers,
                               _REJECT_SIGMAS * layout.std)
    points = np.vstack([layout.points, outliers])
    labels = np.r_[np.zeros(len(layout.points), dtype=bool), np.ones(len(outliers), dtype=bool)]
    return LabeledDataset(Dataset(points), labels)


def cluster_anchors(spec: SyntheticSpec) -> tuple[np.ndarray, float]:
    """Centers (or worm path vertices) and cluster std used when generating ``spec``."""
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    lo = np.array([b[0] for b in spec.bbox])
    hi = np.array([b[1] for b in spec.bbox])
    layout = _LAYOUTS[spec.scenario](spec, rng, lo, hi)
    return layout.centers, layout.std
