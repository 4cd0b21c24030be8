"""
Outlier selection in the ODAR space.

The component strategy first keeps the objects whose local density is below
the median, clusters their high-order densities with the chosen backend and
reports the cluster of the smallest high-order density. The no-component
variant clusters the whole 2-D space and reports the same anchor's cluster.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .clustering import BackendSpec, cluster
from .dataset import Dataset, LabeledDataset
from .exceptions import ParameterError, StructuralError
from .transform import DensityProfile, OdarSpace, construct_odar_space

__all__ = [
    "STRATEGIES",
    "KEPT",
    "EXCLUDED_MEDIAN",
    "EXCLUDED_CLUSTER",
    "DetectionResult",
    "median_split",
    "detect_component",
    "detect_nocomp",
    "detect",
    "read_result_csv",
]

STRATEGIES = ("component", "nocomp")

KEPT = "kept-as-outlier"
EXCLUDED_MEDIAN = "excluded-by-median"
EXCLUDED_CLUSTER = "excluded-by-hrho-cluster"


@dataclass
class DetectionResult:
    """
    Detected outliers with per-object provenance.

    ``stage[i]`` records why object i ended where it did: flagged, dropped by
    the median split on local density, or dropped by the high-order density
    clustering (for the no-component variant, by the 2-D clustering).
    """

    outliers: np.ndarray
    stage: np.ndarray
    backend: BackendSpec
    parameters: dict = field(default_factory=dict)

    @property
    def n(self):
        return self.stage.size

    @property
    def mask(self):
        m = np.zeros(self.n, dtype=bool)
        m[self.outliers] = True
        return m

    def summary(self) -> dict:
        stages, counts = np.unique(self.stage, return_counts=True)
        return {
            "n_objects": int(self.n),
            "n_outliers": int(self.outliers.size),
            "stage_counts": {str(s): int(c) for s, c in zip(stages, counts)},
            "backend": self.backend.to_dict(),
            "parameters": self.parameters,
        }

    def write_csv(self, path, comment=None):
        mask = self.mask
        with Path(path).open("w", encoding="utf-8", newline="") as fh:
            if comment:
                fh.write(comment.rstrip("\n") + "\n")
            fh.write("index,is_outlier,stage\n")
            for i in range(self.n):
                fh.write(f"{i},{int(mask[i])},{self.stage[i]}\n")

    def write_json(self, path, extra=None):
        doc = self.summary()
        doc["outliers"] = [int(i) for i in self.outliers]
        if extra:
            doc.update(extra)
        Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def read_result_csv(path) -> np.ndarray:
    """Indices flagged ``is_outlier == 1`` in a detection CSV."""
    flagged = []
    seen_header = False
    with Path(path).open(encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if not seen_header:
                seen_header = True
                if line.startswith("index"):
                    continue
            parts = line.split(",")
            if len(parts) < 2:
                raise StructuralError(f"malformed detection row: {line!r}")
            if parts[1].strip() == "1":
                flagged.append(int(parts[0]))
    return np.array(sorted(flagged), dtype=np.intp)


def median_split(rho) -> np.ndarray:
    """Indices whose local density is strictly below the median."""
    rho = np.asarray(rho, dtype=float)
    if rho.size < 2:
        raise ParameterError("median split needs at least two objects")
    return np.flatnonzero(rho < np.median(rho))


def _anchor(values, candidates):
    # smallest value, lowest index on ties
    return int(candidates[np.argmin(values[candidates])])


def detect_component(space: OdarSpace, rho, backend: BackendSpec, parameters=None) -> DetectionResult:
    """
    Component clustering strategy.

    ``rho`` is the unshrunk local density used for the median split;
    high-order densities are read from ``space`` (column 1).
    """
    rho = np.asarray(rho, dtype=float)
    if rho.shape != (space.n,):
        raise StructuralError("rho and ODAR space describe different numbers of objects")
    hrho = space.hrho
    stage = np.full(space.n, EXCLUDED_MEDIAN, dtype=object)
    params = {"strategy": "component", "shrunk": bool(space.shrunk), **(parameters or {})}

    candidates = median_split(rho)
    if candidates.size == 0:
        return DetectionResult(np.empty(0, dtype=np.intp), stage, backend, params)

    if candidates.size == 1:
        # a lone candidate is its own anchor; there is nothing to cluster
        stage[candidates] = KEPT
        return DetectionResult(candidates.copy(), stage, backend, params)
    try:
        labels = cluster(hrho[candidates], backend).labels
    except ParameterError as exc:
        raise ParameterError(
            f"high-order density clustering of {candidates.size} candidates: {exc}") from exc
    anchor_pos = int(np.argmin(hrho[candidates]))
    flagged = candidates[labels == labels[anchor_pos]]
    stage[candidates] = EXCLUDED_CLUSTER
    stage[flagged] = KEPT
    return DetectionResult(np.sort(flagged), stage, backend, params)


def detect_nocomp(space: OdarSpace, backend: BackendSpec, parameters=None) -> DetectionResult:
    """Cluster the full ODAR space and flag the cluster of the minimum-hrho object."""
    params = {"strategy": "nocomp", "shrunk": bool(space.shrunk), **(parameters or {})}
    labels = cluster(space.coords, backend).labels
    anchor = _anchor(space.hrho, np.arange(space.n))
    flagged = np.flatnonzero(labels == labels[anchor])
    stage = np.full(space.n, EXCLUDED_CLUSTER, dtype=object)
    stage[flagged] = KEPT
    return DetectionResult(flagged, stage, backend, params)


def detect(
    data,
    k: int = 10,
    backend: BackendSpec | None = None,
    shrink: bool = True,
    strategy: str = "component",
    normalization: str = "global",
    window: str = "two-sided",
    beta: int | None = None,
) -> tuple[DetectionResult, OdarSpace, DensityProfile]:
    """Run the whole pipeline on raw data: transform, optional shrink, detection."""
    if strategy not in STRATEGIES:
        raise ParameterError(f"strategy must be one of {STRATEGIES}")
    backend = backend or BackendSpec("kmeans")
    if isinstance(data, LabeledDataset):
        data = data.data
    elif not isinstance(data, Dataset):
        data = Dataset(data)
    space, profile = construct_odar_space(data, k, shrink, normalization, window, beta)
    params = {"k": int(k), "normalization": normalization, "window": window}
    if strategy == "component":
        result = detect_component(space, profile.rho, backend, params)
    else:
        result = detect_nocomp(space, backend, params)
    return result, space, profile
