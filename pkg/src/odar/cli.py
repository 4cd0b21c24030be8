"""
Command line entry point.

Results go to files named by ``--output``; diagnostics go to stderr. Every
result file embeds the resolved run configuration. Exit status: 0 success,
2 usage error, 3 data error, 4 internal invariant violation.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .clustering import BackendSpec
from .dataset import SCENARIOS, SyntheticSpec, generate, load_csv, write_csv
from .detector import KEPT, STRATEGIES, detect, detect_component, detect_nocomp, median_split, read_result_csv
from .evaluation import confusion_counts, parameter_sweep
from .exceptions import DataError, GenerationError, OdarError, ParameterError
from .neighbors import build_index, knn_distances
from .plotting import plot_svg
from .transform import (
    NORMALIZATIONS,
    WINDOWS,
    assemble,
    default_beta,
    high_order_density,
    local_density,
    mean_window_count,
    shrink,
)

log = logging.getLogger("odar")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_INTERNAL = 4


class UsageError(OdarError):
    pass


# --------------------------------------------------------------------------- #
# helpers
# --------------------------------------------------------------------------- #

def _config(args) -> dict:
    cfg = {}
    for key, value in sorted(vars(args).items()):
        if key == "func":
            continue
        cfg[key] = list(value) if isinstance(value, tuple) else value
    return cfg


def _comment(cfg) -> str:
    return "# odar " + json.dumps(cfg, sort_keys=True)


def _backend(args) -> BackendSpec:
    kind = "delta-like" if args.backend == "delta" else args.backend
    if kind == "delta-like":
        if args.clusters is not None:
            raise UsageError("--clusters does not apply to the delta backend; use --radius")
        return BackendSpec(kind, radius=args.radius)
    if args.radius is not None:
        raise UsageError(f"--radius does not apply to the {kind} backend; use --clusters")
    return BackendSpec(kind, k_clusters=args.clusters if args.clusters is not None else 2)


def _label_column(args, path):
    if args.label_column is not None:
        return args.label_column
    # generated files carry a "label" column; use it unless told otherwise
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip() and not line.startswith("#"):
                if "label" in [f.strip() for f in line.split(",")]:
                    log.info("using column 'label' as ground truth")
                    return "label"
                return None
    return None


def _load(args, path=None):
    path = path or args.input
    if path is None:
        raise UsageError("--input is required")
    if not Path(path).exists():
        raise UsageError(f"input file not found: {path}")
    return load_csv(path, _label_column(args, path))


def _check_k(k, n):
    if k < 1 or k > n - 1:
        raise UsageError(f"k must be at most N-1 (k={k}, N={n})")


def _out(args, suffix=None):
    if args.output is None:
        raise UsageError("--output is required")
    p = Path(args.output)
    return p if suffix is None else p.with_suffix(suffix)


def _write_json(path, doc):
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _parse_k_values(text):
    out = []
    for part in text.split(","):
        part = part.strip()
        if "-" in part:
            a, b = part.split("-", 1)
            out.extend(range(int(a), int(b) + 1))
        elif part:
            out.append(int(part))
    if not out:
        raise UsageError("--k-values is empty")
    return out


# --------------------------------------------------------------------------- #
# commands
# --------------------------------------------------------------------------- #

def cmd_gen(args):
    sizes = tuple(int(s) for s in args.sizes.split(","))
    bbox = tuple((args.low, args.high) for _ in range(args.dim))
    try:
        spec = SyntheticSpec(args.scenario, sizes, args.outliers, bbox, args.seed, args.cluster_std)
    except DataError as exc:
        raise UsageError(str(exc)) from exc
    ds = generate(spec)
    write_csv(ds, _out(args), comment=spec.header())
    log.info("wrote %d objects (%d outliers) to %s", ds.data.n, int(ds.labels.sum()), args.output)


def cmd_transform(args):
    ds = _load(args)
    _check_k(args.k, ds.data.n)
    cfg = _config(args)
    knn = knn_distances(build_index(ds.data), ds.data, args.k)
    rho = local_density(knn, args.normalization)
    hrho, sigma = high_order_density(rho, args.window)
    with _out(args).open("w", encoding="utf-8") as fh:
        fh.write(_comment({**cfg, "sigma": sigma}) + "\n")
        fh.write("index,rho,hrho\n")
        for i, (r, h) in enumerate(zip(rho, hrho)):
            fh.write(f"{i},{float(r)!r},{float(h)!r}\n")


def cmd_detect(args):
    ds = _load(args)
    _check_k(args.k, ds.data.n)
    cfg = _config(args)
    result, space, profile = detect(ds.data, k=args.k, backend=_backend(args),
                                    shrink=not args.no_shrink, strategy=args.strategy,
                                    normalization=args.normalization, window=args.window)
    _check_invariants(result, space, profile.rho)
    result.write_csv(_out(args, ".csv"), comment=_comment(cfg))
    result.write_json(_out(args, ".json"), extra={"config": cfg})
    log.info("%d of %d objects flagged", result.outliers.size, result.n)


def _check_invariants(result, space, rho):
    if not np.all(result.stage[result.outliers] == KEPT):
        raise AssertionError("outlier set disagrees with stage provenance")
    if result.parameters.get("strategy") != "component":
        return
    candidates = median_split(rho)
    if not np.all(np.isin(result.outliers, candidates)):
        raise AssertionError("an outlier has local density at or above the median")
    if candidates.size:
        anchor = candidates[np.argmin(space.hrho[candidates])]
        if anchor not in result.outliers:
            raise AssertionError("the minimum high-order density candidate was not flagged")


def cmd_eval(args):
    ds = _load(args)
    cfg = _config(args)
    if args.result is not None:
        pred = read_result_csv(args.result)
    else:
        _check_k(args.k, ds.data.n)
        pred = detect(ds.data, k=args.k, backend=_backend(args), shrink=not args.no_shrink,
                      strategy=args.strategy, normalization=args.normalization,
                      window=args.window)[0].outliers
    if pred.size and pred.max() >= ds.data.n:
        raise DataError("detection result refers to objects beyond the dataset")
    counts = confusion_counts(pred, ds.labels)
    doc = {
        "accuracy": counts.balanced_accuracy,
        "confusion": counts.to_dict(),
        "n_objects": ds.data.n,
        "n_predicted": int(pred.size),
        "config": cfg,
    }
    _write_json(_out(args), doc)
    log.info("balanced accuracy %.4f", doc["accuracy"])


def cmd_sweep(args):
    datasets = {}
    for path in args.input:
        ds = _load(args, path)
        if not ds.labels.any() or ds.labels.all():
            raise DataError(f"{path}: sweeps need ground truth with both classes")
        datasets[Path(path).stem] = ds
    cfg = _config(args)
    report = parameter_sweep(datasets, _parse_k_values(args.k_values), _backend(args),
                             shrink=not args.no_shrink, strategy=args.strategy,
                             normalization=args.normalization, window=args.window)
    report.write_csv(_out(args, ".csv"), comment=_comment(cfg))
    report.write_json(_out(args, ".json"), extra={"config": cfg})


def _read_space_csv(path):
    rows = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip() or line.startswith("#") or line.startswith("index"):
                continue
            parts = line.split(",")
            try:
                rows.append((float(parts[1]), float(parts[2])))
            except (IndexError, ValueError):
                raise DataError(f"malformed ODAR space row: {line.strip()!r}") from None
    return np.array(rows).reshape(-1, 2)


def cmd_plot(args):
    cfg = _config(args)
    if args.input is None or not Path(args.input).exists():
        raise UsageError(f"input file not found: {args.input}")
    with open(args.input, encoding="utf-8") as fh:
        first = next((ln for ln in fh if ln.strip() and not ln.startswith("#")), "")
    if first.strip().startswith("index,rho,hrho"):
        pts = _read_space_csv(args.input)
        axis_labels = ("local density", "high-order density")
    else:
        ds = _load(args)
        pts = ds.data.points
        axis_labels = tuple(ds.columns) if ds.columns and ds.data.d == 2 else ("x0", "x1")
        if ds.data.d != 2:
            raise UsageError(
                f"cannot scatter {ds.data.d}-D data; run 'odar transform' and plot the ODAR space instead")
    outliers = read_result_csv(args.result) if args.result else np.empty(0, dtype=np.intp)
    plot_svg(pts, outliers, path=_out(args), title=args.title, labels=axis_labels, metadata=cfg)


def cmd_bench(args):
    if args.input:
        ds = _load(args)
    else:
        spec = SyntheticSpec("gauss-blobs-with-uniform-noise", (args.n // 2, args.n - args.n // 2),
                             0, tuple((0.0, 100.0) for _ in range(args.dim)), args.seed)
        ds = generate(spec)
    data = ds.data
    _check_k(args.k, data.n)
    timings = {}
    t = time.perf_counter()
    index = build_index(data)
    knn = knn_distances(index, data, args.k)
    timings["knn"] = time.perf_counter() - t
    t = time.perf_counter()
    rho = local_density(knn, args.normalization)
    timings["local_density"] = time.perf_counter() - t
    t = time.perf_counter()
    hrho, sigma = high_order_density(rho, args.window)
    timings["high_order_density"] = time.perf_counter() - t
    t = time.perf_counter()
    space = assemble(rho, hrho)
    if not args.no_shrink:
        space = shrink(space)
    timings["shrink"] = time.perf_counter() - t
    t = time.perf_counter()
    if args.strategy == "component":
        detect_component(space, rho, _backend(args))
    else:
        detect_nocomp(space, _backend(args))
    timings["detect"] = time.perf_counter() - t
    doc = {
        "n": data.n,
        "d": data.d,
        "k": args.k,
        "beta": 0 if args.no_shrink else default_beta(data.n),
        "s": mean_window_count(rho, sigma),
        "seconds": timings,
        "total_seconds": sum(timings.values()),
        "config": _config(args),
    }
    _write_json(_out(args), doc)


# --------------------------------------------------------------------------- #
# parser
# --------------------------------------------------------------------------- #

def _pipeline_flags(p):
    p.add_argument("--k", type=int, default=10, help="neighbors for local density (default 10)")
    p.add_argument("--backend", choices=["kmeans", "dpc", "delta"], default="kmeans")
    p.add_argument("--clusters", type=int, default=None, help="cluster count for kmeans/dpc (default 2)")
    p.add_argument("--radius", type=float, default=None, help="link radius for delta (default: automatic)")
    p.add_argument("--no-shrink", action="store_true", help="skip the shrinking pass")
    p.add_argument("--strategy", choices=STRATEGIES, default="component")
    p.add_argument("--normalization", choices=NORMALIZATIONS, default="global")
    p.add_argument("--window", choices=WINDOWS, default="two-sided")


def _io_flags(p, multi=False):
    if multi:
        p.add_argument("--input", nargs="+", required=True)
    else:
        p.add_argument("--input", required=False)
    p.add_argument("--output", required=True)
    p.add_argument("--label-column", default=None,
                   help="ground-truth column: header name or 1-based position")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="odar", description="Outlier detection through ODAR space clustering")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="write a synthetic labeled dataset")
    p.add_argument("--scenario", choices=SCENARIOS, default="unbalanced-two-cluster")
    p.add_argument("--sizes", default="961,100", help="comma separated cluster sizes")
    p.add_argument("--outliers", type=int, default=8)
    p.add_argument("--dim", type=int, default=2)
    p.add_argument("--low", type=float, default=0.0)
    p.add_argument("--high", type=float, default=100.0)
    p.add_argument("--cluster-std", type=float, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("transform", help="write local and high-order densities")
    _io_flags(p)
    _pipeline_flags(p)
    p.set_defaults(func=cmd_transform)

    p = sub.add_parser("detect", help="detect outliers; writes <output>.csv and <output>.json")
    _io_flags(p)
    _pipeline_flags(p)
    p.add_argument("--seed", type=int, default=0, help="recorded for provenance; the pipeline is deterministic")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("eval", help="balanced accuracy of a detection against ground truth")
    _io_flags(p)
    _pipeline_flags(p)
    p.add_argument("--result", default=None, help="detection CSV; detection is rerun when omitted")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="accuracy over a range of k")
    _io_flags(p, multi=True)
    _pipeline_flags(p)
    p.add_argument("--k-values", default="2-20", help="e.g. '2-20' or '2,4,8'")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("plot", help="SVG scatter with detected outliers in orange")
    _io_flags(p)
    p.add_argument("--result", default=None, help="detection CSV")
    p.add_argument("--title", default=None)
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("bench", help="per-stage timings")
    _io_flags(p)
    _pipeline_flags(p)
    p.add_argument("--n", type=int, default=10_000)
    p.add_argument("--dim", type=int, default=2)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="odar: %(message)s", stream=sys.stderr)
    try:
        args.func(args)
    except (UsageError, ParameterError) as exc:
        print(f"odar: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, GenerationError, OdarError, OSError) as exc:
        print(f"odar: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except AssertionError as exc:
        print(f"odar: internal invariant violated: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
