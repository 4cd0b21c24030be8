"""
Exact k-nearest-neighbor distances under the Euclidean metric.

The KD-tree only proposes candidates. Final distances are recomputed from the
coordinates and neighbors are ordered by (distance, index), so results are
reproducible and ties are always resolved toward the lower object index.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .dataset import Dataset
from .exceptions import ParameterError

__all__ = ["SpatialIndex", "KnnDistances", "build_index", "knn_distances", "knn_query"]

# cap on the number of (row, candidate, dim) floats held at once
_CHUNK_ELEMS = 4_000_000


class SpatialIndex:
    """KD-tree over a fixed point set."""

    def __init__(self, points):
        self.points = np.asarray(points, dtype=float)
        if self.points.ndim == 1:
            self.points = self.points[:, None]
        self.tree = cKDTree(self.points)

    @property
    def n(self):
        return self.points.shape[0]

    def query(self, queries, k):
        """Exact ``k`` nearest indexed points for each query row, self not excluded."""
        queries = np.atleast_2d(np.asarray(queries, dtype=float))
        if not 1 <= k <= self.n:
            raise ParameterError(f"k must be between 1 and {self.n}")
        return _query(self, queries, k, exclude=None)


@dataclass(frozen=True)
class KnnDistances:
    """
    ``dist[i, j]`` is the distance from object i to its (j+1)-th nearest other
    object and ``indices[i, j]`` is that object.
    """

    dist: np.ndarray
    indices: np.ndarray

    @property
    def k(self) -> int:
        return self.dist.shape[1]

    @property
    def n(self) -> int:
        return self.dist.shape[0]


def build_index(data) -> SpatialIndex:
    points = data.points if isinstance(data, Dataset) else data
    return SpatialIndex(points)


def _sorted_rows(dist, idx):
    # per-row lexicographic sort on (distance, index); only rows out of order pay for it
    dd = np.diff(dist, axis=1)
    bad = (dd < 0) | ((dd == 0) & (np.diff(idx, axis=1) < 0))
    rows = np.flatnonzero(bad.any(axis=1))
    if rows.size:
        d, i = dist[rows], idx[rows]
        order = np.lexsort((i, d), axis=-1)
        dist[rows] = np.take_along_axis(d, order, -1)
        idx[rows] = np.take_along_axis(i, order, -1)
    return dist, idx


def _drop_self(d, cand, own):
    """Remove each row's own index; rows that lack it lose their last column."""
    n_rows, m = d.shape
    missing = ~own.any(axis=1)
    own = own.copy()
    own[missing, -1] = True
    # a row can hold its own index at most once
    keep = ~own
    return d[keep].reshape(n_rows, m - 1), cand[keep].reshape(n_rows, m - 1)


def _query(index, queries, k, exclude):
    """
    Core search. ``exclude[r]`` is an index to drop from row r's result
    (the query object itself), or None for plain queries.
    """
    n = index.n
    pts = index.points
    n_q = queries.shape[0]
    extra = 0 if exclude is None else 1
    out_d = np.empty((n_q, k))
    out_i = np.empty((n_q, k), dtype=np.intp)

    pending = np.arange(n_q)
    m = min(n, k + extra + 1)
    while pending.size:
        next_pending = []
        step = max(1, _CHUNK_ELEMS // (m * pts.shape[1]))
        for s in range(0, pending.size, step):
            rows = pending[s:s + step]
            _, cand = index.tree.query(queries[rows], k=m)
            cand = cand.reshape(len(rows), m)
            diff = pts[cand] - queries[rows][:, None, :]
            d = np.sqrt((diff ** 2).sum(-1))
            if exclude is not None:
                d, cand = _drop_self(d, cand, cand == exclude[rows][:, None])
            d, cand = _sorted_rows(d, cand)
            if m < n:
                # a point tied with the k-th distance may lie beyond the candidate set
                unsure = d[:, k - 1] >= d[:, -1] * (1 - 1e-9)
            else:
                unsure = np.zeros(len(rows), dtype=bool)
            ok = ~unsure
            out_d[rows[ok]] = d[ok, :k]
            out_i[rows[ok]] = cand[ok, :k]
            next_pending.append(rows[unsure])
        pending = np.concatenate(next_pending)
        m = min(n, 2 * m)
    return out_d, out_i


def knn_query(points, k) -> tuple[np.ndarray, np.ndarray]:
    """(dist, indices) of the ``k`` nearest other rows of ``points`` for every row."""
    index = points if isinstance(points, SpatialIndex) else SpatialIndex(points)
    if not 1 <= k <= index.n - 1:
        raise ParameterError(f"k must be at most N-1 (k={k}, N={index.n})")
    return _query(index, index.points, k, exclude=np.arange(index.n))


def knn_distances(index: SpatialIndex, data, k: int) -> KnnDistances:
    """
    Distances from every object to its ``k`` nearest other objects.

    Raises
    ------
    ParameterError
        If ``k`` is not in ``[1, N-1]``.
    """
    points = data.points if isinstance(data, Dataset) else np.asarray(data, dtype=float)
    if points.ndim == 1:
        points = points[:, None]
    if points.shape != index.points.shape or not np.array_equal(points, index.points):
        raise ParameterError("data does not match the points the index was built on")
    k = int(k)
    if not 1 <= k <= index.n - 1:
        raise ParameterError(f"k must be at most N-1 (k={k}, N={index.n})")
    dist, idx = _query(index, index.points, k, exclude=np.arange(index.n))
    return KnnDistances(dist, idx)
