"""
Deterministic clustering backends.

Every backend maps an (M, p) point set to contiguous integer labels numbered by
first appearance (the cluster holding object 0 is label 0, and so on). None of
them uses random initialization.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree
from scipy.spatial.distance import pdist

from .exceptions import ParameterError

__all__ = [
    "BACKENDS",
    "BackendSpec",
    "ClusterLabels",
    "canonical_labels",
    "cluster",
    "kmeans",
    "dpc",
    "delta_like",
]

BACKENDS = ("kmeans", "dpc", "delta-like")

KMEANS_MAX_ITER = 300
DPC_CUTOFF_PERCENTILE = 2.0
_ROW_CHUNK = 1024


@dataclass(frozen=True)
class ClusterLabels:
    labels: np.ndarray
    n_clusters: int

    def members(self, label):
        return np.flatnonzero(self.labels == label)


@dataclass(frozen=True)
class BackendSpec:
    """
    Which backend to run and its single parameter: ``k_clusters`` for
    kmeans/dpc, ``radius`` for delta-like. A delta-like spec without a radius
    picks one from the data (see :func:`auto_radius`).
    """

    kind: str = "kmeans"
    k_clusters: int | None = None
    radius: float | None = None

    def __post_init__(self):
        kind = "delta-like" if self.kind == "delta" else self.kind
        if kind not in BACKENDS:
            raise ParameterError(f"unknown backend {self.kind!r}; choose from {BACKENDS}")
        object.__setattr__(self, "kind", kind)
        if kind == "delta-like":
            if self.k_clusters is not None:
                raise ParameterError("delta-like takes a radius, not a cluster count")
            if self.radius is not None and not self.radius > 0:
                raise ParameterError("radius must be positive")
        else:
            if self.radius is not None:
                raise ParameterError(f"{kind} takes a cluster count, not a radius")
            k = 2 if self.k_clusters is None else int(self.k_clusters)
            if k < 1:
                raise ParameterError("k_clusters must be a positive integer")
            object.__setattr__(self, "k_clusters", k)

    def to_dict(self):
        if self.kind == "delta-like":
            return {"kind": self.kind, "radius": self.radius}
        return {"kind": self.kind, "k_clusters": self.k_clusters}


def _as_points(points):
    x = np.asarray(points, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2 or x.shape[0] < 1:
        raise ParameterError(f"expected a non-empty (M, p) point array, got shape {x.shape}")
    return x


def canonical_labels(raw) -> ClusterLabels:
    """Renumber arbitrary labels to 0..c-1 in order of first appearance."""
    raw = np.asarray(raw)
    _, first, inverse = np.unique(raw, return_index=True, return_inverse=True)
    rank = np.empty(first.size, dtype=np.intp)
    rank[np.argsort(first, kind="stable")] = np.arange(first.size)
    return ClusterLabels(rank[inverse.ravel()], int(first.size))


def _sq_dists(x, centers):
    return ((x[:, None, :] - centers[None, :, :]) ** 2).sum(-1)


def _farthest_first(x, k):
    # start from the lexicographically smallest point (lowest index on ties)
    start = int(np.lexsort(x.T[::-1])[0])
    chosen = [start]
    mind = ((x - x[start]) ** 2).sum(-1)
    for _ in range(k - 1):
        nxt = int(np.argmax(mind))
        chosen.append(nxt)
        mind = np.minimum(mind, ((x - x[nxt]) ** 2).sum(-1))
    return x[chosen].copy()


def _kmeans_1d(v, k):
    """
    Exact k-means for scalar data. Optimal clusters are contiguous runs of the
    sorted values, so a dynamic program over split points finds the global
    minimum; splits are only placed between distinct values and the lowest
    split wins ties.
    """
    order = np.argsort(v, kind="stable")
    s = v[order] - v.mean()
    m = s.size
    distinct = np.r_[True, s[1:] > s[:-1]]
    k = min(k, int(distinct.sum()))
    c1 = np.r_[0.0, np.cumsum(s)]
    c2 = np.r_[0.0, np.cumsum(s * s)]

    def cost(i, j):
        # within-segment sum of squares of s[i:j]
        n = j - i
        return c2[j] - c2[i] - (c1[j] - c1[i]) ** 2 / n

    allowed = np.flatnonzero(distinct)  # valid start positions of a new segment
    best = cost(np.zeros(m, dtype=np.intp), np.arange(1, m + 1))  # best[j-1]: one segment over s[:j]
    back = []
    for level in range(1, k):
        # the last level only needs the segmentation that ends at m
        ends = [m] if level == k - 1 else range(2, m + 1)
        new = np.full(m, np.inf)
        arg = np.zeros(m, dtype=np.intp)
        for j in ends:
            starts = allowed[(allowed >= 1) & (allowed < j)]
            if starts.size == 0:
                continue
            total = best[starts - 1] + cost(starts, np.full(starts.size, j))
            t = int(np.argmin(total))
            new[j - 1] = total[t]
            arg[j - 1] = starts[t]
        back.append(arg)
        best = new
    labels_sorted = np.zeros(m, dtype=np.intp)
    end = m
    for c in range(k - 1, 0, -1):
        start = int(back[c - 1][end - 1])
        labels_sorted[start:end] = c
        end = start
    labels = np.empty(m, dtype=np.intp)
    labels[order] = labels_sorted
    return labels


def kmeans(points, k_clusters: int = 2, max_iter: int = KMEANS_MAX_ITER) -> ClusterLabels:
    """
    k-means clustering.

    Scalar input is solved exactly (see :func:`_kmeans_1d`). Otherwise Lloyd's
    algorithm runs from farthest-first seeds until the assignment no longer
    changes or ``max_iter`` updates have been made; an empty cluster is
    reseeded with the point farthest from its current centroid.
    """
    x = _as_points(points)
    m = x.shape[0]
    k = int(k_clusters)
    if k < 1:
        raise ParameterError("k_clusters must be positive")
    if m < k:
        raise ParameterError(f"kmeans needs at least k_clusters={k} points, got {m}")
    if x.shape[1] == 1:
        return canonical_labels(_kmeans_1d(x[:, 0], k))

    centers = _farthest_first(x, k)
    assign = None
    for _ in range(max_iter):
        new = np.argmin(_sq_dists(x, centers), axis=1)
        if assign is not None and np.array_equal(new, assign):
            break
        assign = new
        counts = np.bincount(assign, minlength=k)
        sums = np.zeros_like(centers)
        np.add.at(sums, assign, x)
        nonempty = counts > 0
        centers[nonempty] = sums[nonempty] / counts[nonempty, None]
        if not nonempty.all():
            own = ((x - centers[assign]) ** 2).sum(-1)
            for c in np.flatnonzero(~nonempty):
                far = int(np.argmax(own))
                centers[c] = x[far]
                own[far] = -1.0
    return canonical_labels(assign)


def _cutoff_distance(x):
    # 2nd percentile of pairwise distances, floored at the median nearest-neighbor
    # distance so that small inputs still give every point a neighbor
    if x.shape[0] < 2:
        return 1.0
    pd = pdist(x)
    dc = float(np.percentile(pd, DPC_CUTOFF_PERCENTILE))
    nn, _ = cKDTree(x).query(x, k=2)
    dc = max(dc, float(np.median(nn[:, 1])))
    if dc <= 0:
        pos = pd[pd > 0]
        dc = float(pos.min()) if pos.size else 1.0
    return dc


def _row_dists(x, rows):
    return np.sqrt(((x[rows][:, None, :] - x[None, :, :]) ** 2).sum(-1))


def dpc(points, k_clusters: int = 2) -> ClusterLabels:
    """
    Density peaks clustering with automatic center selection.

    Density is a Gaussian kernel sum with the cutoff at the 2nd percentile of
    pairwise distances (never below the median nearest-neighbor distance). The
    ``k_clusters`` points with the largest density * delta become centers; the
    densest point is always one of them. Every other point takes the label of its nearest denser neighbor.
    """
    x = _as_points(points)
    m = x.shape[0]
    k = int(k_clusters)
    if k < 1:
        raise ParameterError("k_clusters must be positive")
    if m < k:
        raise ParameterError(f"dpc needs at least k_clusters={k} points, got {m}")
    if k == 1 or m == 1:
        return ClusterLabels(np.zeros(m, dtype=np.intp), 1)

    dc = _cutoff_distance(x)
    density = np.empty(m)
    for s in range(0, m, _ROW_CHUNK):
        rows = np.arange(s, min(m, s + _ROW_CHUNK))
        d = _row_dists(x, rows)
        with np.errstate(over="ignore"):
            density[rows] = np.exp(-((d / dc) ** 2)).sum(axis=1) - 1.0  # drop self

    # decreasing density, lower index first on ties
    order = np.lexsort((np.arange(m), -density))
    pos = np.empty(m, dtype=np.intp)
    pos[order] = np.arange(m)
    delta = np.empty(m)
    parent = np.full(m, -1, dtype=np.intp)
    for s in range(0, m, _ROW_CHUNK):
        rows = np.arange(s, min(m, s + _ROW_CHUNK))
        d = _row_dists(x, rows)
        peak_rows = pos[rows] == 0
        d_higher = np.where(pos[None, :] < pos[rows][:, None], d, np.inf)
        nearest = np.argmin(d_higher, axis=1)
        delta[rows] = d_higher[np.arange(rows.size), nearest]
        parent[rows] = nearest
        if peak_rows.any():
            delta[rows[peak_rows]] = d[peak_rows].max(axis=1)
            parent[rows[peak_rows]] = -1

    gamma = density * delta
    by_gamma = np.lexsort((np.arange(m), -gamma))
    centers = list(by_gamma[:k])
    peak = int(order[0])
    if peak not in centers:
        centers[-1] = peak

    labels = np.full(m, -1, dtype=np.intp)
    for c_id, c in enumerate(centers):
        labels[c] = c_id
    for i in order:
        if labels[i] < 0:
            labels[i] = labels[parent[i]]
    return canonical_labels(labels)


def auto_radius(points) -> float:
    """
    Default delta-like radius: the largest gap between sorted values for 1-D
    input (minus a hair, so that gap is cut), otherwise ten times the mean
    nearest-neighbor distance.
    """
    x = _as_points(points)
    if x.shape[0] < 2:
        return 1.0
    if x.shape[1] == 1:
        gaps = np.diff(np.sort(x[:, 0]))
        g = float(gaps.max())
        return g * (1 - 1e-9) if g > 0 else 1.0
    d, _ = cKDTree(x).query(x, k=2)
    mean_nn = float(d[:, 1].mean())
    return 10.0 * mean_nn if mean_nn > 0 else 1.0


def delta_like(points, radius: float | None = None) -> ClusterLabels:
    """
    Connected components of the graph linking points at distance <= ``radius``.
    Components are numbered by their smallest member index.
    """
    x = _as_points(points)
    m = x.shape[0]
    if radius is None:
        radius = auto_radius(x)
    if not radius > 0:
        raise ParameterError("radius must be positive")

    if x.shape[1] == 1:
        order = np.argsort(x[:, 0], kind="stable")
        s = x[order, 0]
        breaks = np.r_[0, np.cumsum(np.abs(np.diff(s)) > radius)]
        raw = np.empty(m, dtype=np.intp)
        raw[order] = breaks
        return canonical_labels(raw)

    extent = x.max(axis=0) - x.min(axis=0)
    if float(np.sqrt((extent ** 2).sum())) <= radius:
        return ClusterLabels(np.zeros(m, dtype=np.intp), 1)
    pairs = cKDTree(x).query_pairs(radius, output_type="ndarray")
    graph = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(m, m))
    _, raw = connected_components(graph, directed=False)
    return canonical_labels(raw)


def cluster(points, spec: BackendSpec) -> ClusterLabels:
    if spec.kind == "kmeans":
        return kmeans(points, spec.k_clusters)
    if spec.kind == "dpc":
        return dpc(points, spec.k_clusters)
    return delta_like(points, spec.radius)
