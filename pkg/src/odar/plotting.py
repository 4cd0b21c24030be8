"""
Scatter plots of detections, rendered to SVG with matplotlib.

Detected outliers are drawn in orange and everything else in gray. Each group
is emitted as an SVG ``<g>`` element with a fixed id (``outliers`` /
``normal``), one marker per object, so the output can be audited by parsing.
"""

from __future__ import annotations

import io
import json

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .exceptions import ParameterError  # noqa: E402

__all__ = ["OUTLIER_COLOR", "NORMAL_COLOR", "CANVAS_PT", "MARGIN", "plot_svg", "count_markers"]

OUTLIER_COLOR = "#ff7f0e"
NORMAL_COLOR = "#8c8c8c"
CANVAS_PT = 800
MARGIN = 0.05

_RC = {
    "svg.hashsalt": "odar",
    "svg.fonttype": "none",
    "font.size": 11,
    "axes.linewidth": 0.8,
}


def _limits(v):
    lo, hi = float(np.min(v)), float(np.max(v))
    if hi == lo:
        return lo - 0.5, hi + 0.5
    return lo, hi


def plot_svg(points, outliers, path=None, title=None, labels=("x0", "x1"), metadata=None) -> str:
    """
    Render a 2-D scatter of ``points`` with ``outliers`` highlighted.

    Parameters
    ----------
    points : array of shape (N, 2)
        Raw 2-D data or ODAR-space coordinates.
    outliers : array of int or bool mask
    path : str or Path, optional
        Where to write the SVG. The document is returned either way.
    metadata : dict, optional
        Stored as JSON in the SVG description element.

    Raises
    ------
    ParameterError
        If the points are not 2-D.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        d = pts.shape[1] if pts.ndim == 2 else pts.ndim
        raise ParameterError(
            f"scatter plots need 2-D points, got d={d}; plot the ODAR space "
            "(the transform output) instead")
    mask = np.zeros(len(pts), dtype=bool)
    sel = np.asarray(outliers)
    if sel.dtype == bool:
        mask[:] = sel
    elif sel.size:
        mask[sel.astype(np.intp)] = True

    side = CANVAS_PT / 72.0
    with plt.rc_context(_RC):
        fig = plt.figure(figsize=(side, side), dpi=72)
        ax = fig.add_axes([MARGIN, MARGIN, 1 - 2 * MARGIN, 1 - 2 * MARGIN])
        ax.set_xlim(*_limits(pts[:, 0]))
        ax.set_ylim(*_limits(pts[:, 1]))
        ax.scatter(pts[~mask, 0], pts[~mask, 1], s=6, c=NORMAL_COLOR, linewidths=0,
                   clip_on=False, gid="normal", label="normal")
        ax.scatter(pts[mask, 0], pts[mask, 1], s=10, c=OUTLIER_COLOR, linewidths=0,
                   clip_on=False, gid="outliers", label="detected outlier")
        ax.set_xlabel(labels[0])
        ax.set_ylabel(labels[1])
        if title:
            ax.set_title(title)
        ax.tick_params(direction="in")
        meta = {"Date": None, "Title": title or "odar detection"}
        if metadata is not None:
            meta["Description"] = json.dumps(metadata, sort_keys=True)
        buf = io.StringIO()
        fig.savefig(buf, format="svg", metadata=meta)
        plt.close(fig)
    svg = buf.getvalue()
    if path is not None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(svg)
    return svg


def count_markers(svg: str, gid: str) -> int:
    """Number of markers drawn inside the ``<g id=gid>`` group of an SVG produced here."""
    import xml.etree.ElementTree as ET

    ns = {"svg": "http://www.w3.org/2000/svg"}
    root = ET.fromstring(svg)
    for g in root.iter("{http://www.w3.org/2000/svg}g"):
        if g.get("id") == gid:
            return len(g.findall(".//svg:use", ns))
    return 0
