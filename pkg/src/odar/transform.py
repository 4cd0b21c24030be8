"""
The ODAR feature transformation.

Each object is mapped to two numbers: its local density (a negated,
mean-normalized sum of exponentiated k-NN distances) and its high-order
density (how crowded the local-density axis is around that value). Outliers
end up with low values on both axes and gather into one cluster of the
resulting 2-D space.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import Dataset
from .exceptions import ParameterError, StructuralError
from .neighbors import KnnDistances, build_index, knn_distances, knn_query

__all__ = [
    "DensityProfile",
    "OdarSpace",
    "NORMALIZATIONS",
    "WINDOWS",
    "local_density",
    "high_order_density",
    "bandwidth",
    "mean_window_count",
    "assemble",
    "shrink",
    "default_beta",
    "construct_odar_space",
]

NORMALIZATIONS = ("global", "per-rank")
WINDOWS = ("two-sided", "one-sided")


@dataclass(frozen=True)
class DensityProfile:
    rho: np.ndarray
    hrho: np.ndarray
    sigma: float


@dataclass(frozen=True)
class OdarSpace:
    """N x 2 embedding; column 0 is local density, column 1 high-order density."""

    coords: np.ndarray
    shrunk: bool = False

    @property
    def rho(self):
        return self.coords[:, 0]

    @property
    def hrho(self):
        return self.coords[:, 1]

    @property
    def n(self):
        return self.coords.shape[0]


def _minmax(x, axis=None):
    lo = x.min(axis=axis, keepdims=axis is not None)
    span = x.max(axis=axis, keepdims=axis is not None) - lo
    # constant input normalizes to 0
    safe = np.where(span > 0, span, 1.0)
    return np.where(span > 0, (x - lo) / safe, 0.0)


def local_density(knn, normalization: str = "global") -> np.ndarray:
    """
    Local density of every object from its k-NN distance matrix.

    Distances are min-max normalized, exponentiated and summed per row; the
    row sums are negated and divided by their mean, so the result always has
    mean -1 and sparser neighborhoods give more negative values.

    Parameters
    ----------
    knn : KnnDistances or array of shape (N, k)
    normalization : {"global", "per-rank"}
        ``"global"`` uses one min/max over the whole matrix. ``"per-rank"``
        normalizes each neighbor rank (column) on its own.
    """
    dist = knn.dist if isinstance(knn, KnnDistances) else np.asarray(knn, dtype=float)
    if dist.ndim != 2 or dist.shape[0] < 2 or dist.shape[1] < 1:
        raise StructuralError(f"need an N x k distance matrix with N >= 2, got {dist.shape}")
    if normalization == "global":
        scaled = _minmax(dist)
    elif normalization == "per-rank":
        scaled = _minmax(dist, axis=0)
    else:
        raise ParameterError(f"normalization must be one of {NORMALIZATIONS}")
    sums = np.exp(scaled).sum(axis=1)
    return -sums / sums.mean()


def bandwidth(rho) -> float:
    rho = np.asarray(rho, dtype=float)
    return 10.0 * (rho.max() - rho.min()) / rho.size


def high_order_density(rho, window: str = "two-sided") -> tuple[np.ndarray, float]:
    """
    Gaussian-kernel density of the local-density values, truncated at the
    bandwidth ``sigma = 10 * (max(rho) - min(rho)) / N``.

    The two-sided window sums over every j with ``|rho_i - rho_j| <= sigma``
    (self included). The one-sided window reproduces the original sorted scan,
    which only walks upward from each value with a strict bound and stops one
    short of the largest value.

    Returns
    -------
    hrho : ndarray of shape (N,)
    sigma : float
    """
    rho = np.asarray(rho, dtype=float)
    n = rho.size
    if n < 1:
        raise StructuralError("rho must be non-empty")
    if window not in WINDOWS:
        raise ParameterError(f"window must be one of {WINDOWS}")
    sigma = bandwidth(rho)
    order = np.argsort(rho, kind="stable")
    s = rho[order]
    hrho = np.empty(n)

    if window == "one-sided":
        sums = np.zeros(n)
        if sigma > 0:
            for i in range(n):
                j = i
                while j < n - 1 and s[j] < s[i] + sigma:
                    j += 1
                sums[i] = np.exp(-((s[i:j] - s[i]) ** 2) / sigma**2).sum()
        # sigma == 0: the strict bound admits no term at all
        hrho[order] = sums
        return hrho, sigma

    if sigma == 0:
        _, inverse, counts = np.unique(rho, return_inverse=True, return_counts=True)
        return counts[inverse].astype(float), sigma

    # candidate window with a little slack, then the exact |diff| <= sigma test
    slack = sigma * 1e-9 + np.abs(s) * 1e-15
    lo = np.searchsorted(s, s - sigma - slack, side="left")
    hi = np.searchsorted(s, s + sigma + slack, side="right")
    sums = np.empty(n)
    inv_sq = 1.0 / sigma**2
    for i in range(n):
        diff = s[lo[i]:hi[i]] - s[i]
        diff = diff[np.abs(diff) <= sigma]
        sums[i] = np.exp(-(diff * diff) * inv_sq).sum()
    hrho[order] = sums
    return hrho, sigma


def mean_window_count(rho, sigma=None) -> float:
    """Average number of rho values within ``sigma`` of each value (self included)."""
    s = np.sort(np.asarray(rho, dtype=float))
    if sigma is None:
        sigma = bandwidth(s)
    lo = np.searchsorted(s, s - sigma, side="left")
    hi = np.searchsorted(s, s + sigma, side="right")
    return float(np.mean(hi - lo))


def assemble(rho, hrho) -> OdarSpace:
    rho = np.asarray(rho, dtype=float)
    hrho = np.asarray(hrho, dtype=float)
    if rho.shape != hrho.shape or rho.ndim != 1:
        raise StructuralError(f"rho and hrho lengths differ: {rho.shape} vs {hrho.shape}")
    return OdarSpace(np.column_stack([rho, hrho]), shrunk=False)


def default_beta(n: int) -> int:
    return max(1, n // 10)


def shrink(space: OdarSpace, beta: int | None = None) -> OdarSpace:
    """
    Move every point to the centroid of its ``beta`` nearest neighbors in the
    ODAR space. One simultaneous pass; all centroids use the original positions.
    """
    n = space.n
    if beta is None:
        beta = default_beta(n)
    beta = int(beta)
    if not 1 <= beta <= n - 1:
        raise ParameterError(f"beta must be in [1, N-1] (beta={beta}, N={n})")
    _, idx = knn_query(space.coords, beta)
    moved = space.coords[idx].mean(axis=1)
    return OdarSpace(moved, shrunk=True)


def construct_odar_space(
    data,
    k: int,
    do_shrink: bool = True,
    normalization: str = "global",
    window: str = "two-sided",
    beta: int | None = None,
) -> tuple[OdarSpace, DensityProfile]:
    """
    Build the ODAR space of ``data``.

    Returns the (optionally shrunk) space and the unshrunk density profile.
    ``do_shrink=False`` gives the no-shrink ablation.
    """
    if not isinstance(data, Dataset):
        data = Dataset(data)
    k = int(k)
    if not 1 <= k <= data.n - 1:
        raise ParameterError(f"k must be at most N-1 (k={k}, N={data.n})")
    knn = knn_distances(build_index(data), data, k)
    rho = local_density(knn, normalization)
    hrho, sigma = high_order_density(rho, window)
    space = assemble(rho, hrho)
    if do_shrink:
        space = shrink(space, beta)
    return space, DensityProfile(rho, hrho, sigma)
