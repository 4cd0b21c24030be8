"""Scoring detections against ground truth, score thresholding and k sweeps."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .clustering import BackendSpec
from .dataset import LabeledDataset
from .detector import detect
from .exceptions import EvaluationError, OdarError, ParameterError

__all__ = [
    "ConfusionCounts",
    "SweepRow",
    "SweepReport",
    "confusion_counts",
    "balanced_accuracy",
    "top_percent",
    "parameter_sweep",
]


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fn: int
    tn: int
    fp: int

    @property
    def balanced_accuracy(self) -> float:
        if self.tp + self.fn == 0:
            raise EvaluationError("ground truth has no outliers; outlier recall is undefined")
        if self.tn + self.fp == 0:
            raise EvaluationError("ground truth has no normal objects; normal recall is undefined")
        return 0.5 * (self.tp / (self.tp + self.fn) + self.tn / (self.fp + self.tn))

    def to_dict(self):
        return {"tp": self.tp, "fn": self.fn, "tn": self.tn, "fp": self.fp}


def _pred_mask(pred, n):
    pred = np.asarray(pred)
    if pred.dtype == bool:
        if pred.shape != (n,):
            raise ParameterError("boolean prediction must have one entry per object")
        return pred
    mask = np.zeros(n, dtype=bool)
    idx = pred.astype(np.intp).ravel()
    if idx.size and (idx.min() < 0 or idx.max() >= n):
        raise ParameterError("predicted index out of range")
    mask[idx] = True
    return mask


def confusion_counts(pred, truth) -> ConfusionCounts:
    """
    Parameters
    ----------
    pred : array of indices, or boolean mask
        Objects predicted to be outliers.
    truth : array of bool
        Ground truth, True for outliers.
    """
    truth = np.asarray(truth, dtype=bool)
    p = _pred_mask(pred, truth.size)
    return ConfusionCounts(
        tp=int(np.sum(p & truth)),
        fn=int(np.sum(~p & truth)),
        tn=int(np.sum(~p & ~truth)),
        fp=int(np.sum(p & ~truth)),
    )


def balanced_accuracy(pred, truth) -> float:
    """Mean of the recall on outliers and the recall on normal objects."""
    return confusion_counts(pred, truth).balanced_accuracy


def top_percent(scores, rate: float) -> np.ndarray:
    """
    Indices of the ``ceil(rate * N)`` highest scores, ties at the cut going to
    the lower index. Returned in ascending index order.
    """
    scores = np.asarray(scores, dtype=float)
    if not 0 < rate < 1:
        raise ParameterError(f"rate must lie in (0, 1), got {rate}")
    if not np.all(np.isfinite(scores)):
        raise ParameterError("scores must be finite")
    n = scores.size
    # round first so that e.g. 0.07 * 100 does not become 8
    count = math.ceil(round(rate * n, 9))
    order = np.lexsort((np.arange(n), -scores))
    return np.sort(order[:count])


@dataclass
class SweepRow:
    k: int
    accuracy: dict  # dataset name -> accuracy, None when the run failed
    errors: dict = field(default_factory=dict)

    @property
    def average(self) -> float:
        vals = [v for v in self.accuracy.values() if v is not None]
        return float(np.mean(vals)) if vals else float("nan")


@dataclass
class SweepReport:
    datasets: list
    rows: list
    settings: dict = field(default_factory=dict)

    def accuracy_range(self, name=None) -> float:
        if name is None:
            vals = [r.average for r in self.rows]
        else:
            vals = [r.accuracy[name] for r in self.rows if r.accuracy[name] is not None]
        vals = [v for v in vals if not math.isnan(v)]
        return max(vals) - min(vals) if vals else float("nan")

    def to_dict(self):
        return {
            "settings": self.settings,
            "datasets": list(self.datasets),
            "rows": [
                {"k": r.k, "accuracy": r.accuracy, "average": r.average, "errors": r.errors}
                for r in self.rows
            ],
        }

    def write_json(self, path, extra=None):
        doc = self.to_dict()
        if extra:
            doc.update(extra)
        Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")

    def write_csv(self, path, comment=None):
        """Datasets as rows, one column per k, plus an Average row."""
        def fmt(v):
            return "" if v is None or (isinstance(v, float) and math.isnan(v)) else f"{v:.6f}"

        with Path(path).open("w", encoding="utf-8", newline="") as fh:
            if comment:
                fh.write(comment.rstrip("\n") + "\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["dataset"] + [f"k={r.k}" for r in self.rows])
            for name in self.datasets:
                w.writerow([name] + [fmt(r.accuracy[name]) for r in self.rows])
            w.writerow(["Average"] + [fmt(r.average) for r in self.rows])


def parameter_sweep(
    data: LabeledDataset | Mapping[str, LabeledDataset],
    k_values: Sequence[int],
    backend: BackendSpec | None = None,
    shrink: bool = True,
    strategy: str = "component",
    normalization: str = "global",
    window: str = "two-sided",
) -> SweepReport:
    """
    Detect and score once per (k, dataset). A failing run is stored in the
    row's ``errors`` and leaves its accuracy as None; the sweep continues.
    """
    backend = backend or BackendSpec("kmeans")
    datasets = dict(data) if isinstance(data, Mapping) else {"data": data}
    rows = []
    for k in k_values:
        row = SweepRow(int(k), {})
        for name, ds in datasets.items():
            try:
                result, _, _ = detect(ds.data, k=int(k), backend=backend, shrink=shrink,
                                      strategy=strategy, normalization=normalization,
                                      window=window)
                row.accuracy[name] = balanced_accuracy(result.outliers, ds.labels)
            except OdarError as exc:
                row.accuracy[name] = None
                row.errors[name] = f"{type(exc).__name__}: {exc}"
        rows.append(row)
    settings = {
        "backend": backend.to_dict(),
        "shrink": shrink,
        "strategy": strategy,
        "normalization": normalization,
        "window": window,
    }
    return SweepReport(list(datasets), rows, settings)
