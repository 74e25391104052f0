"""Command-line surface: ingestion, experiment orchestration, report emission.

Every command echoes its full manifest into the report and writes
``report.json`` (stable key order) plus a flat ``report.csv`` with identical
rows, atomically. Failures print a machine-readable error object to stderr;
validation problems are reported exhaustively, not first-error-only.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import tempfile
import time
from pathlib import Path

import numpy as np

from . import __version__
from .core import Dataset, load_csv, load_schema, stratified_folds
from .dimreduce import intrinsic_dimension, pca_spectrum, rank_features, wrapper_search
from .index import warm_kernels
from .instsel import cnn, crr, enn, renn
from .learner import VotingScheme, evaluate_cv
from .metrics import MetricConfig, ncd
from .synth import gaussian_blobs, labeled_uniform, write_csv_dataset
from .xmetrics import Signature, dtw, emd


def _metric_from_args(args, schema=None) -> MetricConfig:
    kind = args.metric
    if kind == "minkowski":
        return MetricConfig("minkowski", p=args.p)
    if kind == "heterogeneous":
        return MetricConfig("heterogeneous", schema=schema)
    return MetricConfig(kind)


def _scheme_from_args(args) -> VotingScheme:
    if args.scheme == "inverse_distance":
        return VotingScheme("inverse_distance", p=args.vote_p)
    return VotingScheme(args.scheme)


def _load_dataset(args) -> Dataset:
    schema = load_schema(args.schema)
    return load_csv(args.data, schema)


def _read_series(path) -> np.ndarray:
    """One real value per line; a header cell is tolerated and skipped."""
    values = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            for cell in line.replace(",", " ").split():
                try:
                    values.append(float(cell))
                except ValueError:
                    if values:
                        raise ValueError(f"{path}: cannot parse {cell!r} as a number") from None
    if not values:
        raise ValueError(f"{path}: no numeric values found")
    return np.asarray(values)


def _read_signature(path) -> Signature:
    with open(path, encoding="utf-8") as fh:
        pairs = json.load(fh)
    try:
        return Signature.from_pairs([(p[0], p[1]) for p in pairs])
    except (TypeError, IndexError) as exc:
        raise ValueError(f"{path}: expected a JSON list of [mode, weight] pairs: {exc}") from exc


def write_report(report: dict, out_dir) -> tuple[Path, Path]:
    """Atomically write report.json and report.csv under ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    json_path = out / "report.json"
    csv_path = out / "report.csv"
    payload = json.dumps(report, sort_keys=True, indent=2, default=_jsonify) + "\n"
    _atomic_write(json_path, payload)

    rows = report.get("rows", [])
    columns: list[str] = sorted({key for row in rows for key in row})
    buf = []
    writer_target = _CsvBuffer(buf)
    writer = csv.writer(writer_target)
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_csv_cell(row.get(c)) for c in columns])
    _atomic_write(csv_path, "".join(buf))
    return json_path, csv_path


class _CsvBuffer:
    def __init__(self, sink: list):
        self._sink = sink

    def write(self, data: str) -> None:
        self._sink.append(data)


def _csv_cell(value):
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (list, tuple)):
        return json.dumps(value)
    return value


def _jsonify(value):
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError(f"not JSON serialisable: {type(value)}")


def _atomic_write(path: Path, text: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _manifest(args, command: str) -> dict:
    skip = {"func"}
    manifest = {k: v for k, v in vars(args).items() if k not in skip}
    manifest["command"] = command
    manifest["version"] = __version__
    return manifest


# ---------------------------------------------------------------------------
# subcommand engines
# ---------------------------------------------------------------------------

def bench_index(data: Dataset, k_folds: int, seed: int, k: int,
                metric: MetricConfig | None = None, leaf_size: int = 16,
                indexes=("brute", "kd", "ball"), n_trees: int = 10,
                search_budget: int = 0) -> list[dict]:
    """Benchmark the index kinds under identical fold plans.

    Returns one row per index kind with absolute build/query times and times
    normalised to the brute-force total.
    """
    if "brute" not in indexes:
        raise ValueError("the benchmark needs the brute-force baseline")
    if data.categorical.shape[1]:
        raise ValueError("tree indexes need all-numeric features")
    warm_kernels()
    folds = stratified_folds(data, k_folds, seed)
    rows = []
    baseline = None
    for kind in indexes:
        report = evaluate_cv(data, folds, metric, kind, k,
                             leaf_size=leaf_size, n_trees=n_trees,
                             search_budget=search_budget)
        build = sum(report.build_times)
        query = sum(report.query_times)
        row = {
            "index": kind,
            "mean_accuracy": report.mean_accuracy,
            "build_time_s": build,
            "query_time_s": query,
            "total_time_s": build + query,
            "k_folds": k_folds,
        }
        if kind == "brute":
            baseline = row
        row["normalised_build"] = build / baseline["build_time_s"] if baseline["build_time_s"] > 0 else float("inf")
        row["normalised_query"] = query / baseline["query_time_s"]
        row["normalised_total"] = (build + query) / baseline["total_time_s"]
        rows.append(row)
    return rows


def _cmd_bench_index(args) -> dict:
    data = _load_dataset(args)
    metric = _metric_from_args(args, data.schema)
    indexes = ["brute", "kd", "ball"]
    if args.trees > 0:
        indexes.append("rpforest")
    rows = bench_index(data, args.folds, args.seed, args.k, metric,
                       args.leaf_size, tuple(indexes), max(args.trees, 1),
                       args.budget)
    return {
        "mirrors": "index build+query times normalised to brute force, per fold count",
        "rows": rows,
    }


def _cmd_classify(args) -> dict:
    data = _load_dataset(args)
    subset = None
    if args.train_subset:
        with open(args.train_subset, encoding="utf-8") as fh:
            payload = json.load(fh)
        subset = payload["retained"] if isinstance(payload, dict) else payload
    metric = _metric_from_args(args, data.schema)
    folds = stratified_folds(data, args.folds, args.seed)
    report = evaluate_cv(data, folds, metric, args.index, args.k,
                         _scheme_from_args(args), args.leaf_size,
                         max(args.trees, 1), args.budget, train_subset=subset)
    rows = [
        {"fold": f, "accuracy": acc, "build_time_s": bt, "query_time_s": qt}
        for f, (acc, bt, qt) in enumerate(
            zip(report.fold_accuracies, report.build_times, report.query_times)
        )
    ]
    rows.append({"fold": "mean", "accuracy": report.mean_accuracy})
    return {"mirrors": "cross-validated neighbour-classifier accuracy", "rows": rows}


def _cmd_featsel(args) -> dict:
    data = _load_dataset(args)
    if args.direction:
        state = wrapper_search(data, args.direction)
        rows = [
            {"step": i, "mask": "".join("1" if b else "0" for b in mask), "cv_accuracy": acc}
            for i, (mask, acc) in enumerate(state.history)
        ]
        rows.append({
            "step": "selected",
            "mask": "".join("1" if b else "0" for b in state.mask),
            "cv_accuracy": state.cv_accuracy,
        })
        return {"mirrors": "wrapper feature-subset search trace", "rows": rows}
    top_n = args.top_n if args.top_n else len(data.schema.features)
    scores = rank_features(data, args.criterion, top_n)
    rows = [
        {"rank": i + 1, "feature": s.feature, "criterion": s.criterion, "score": s.value}
        for i, s in enumerate(scores)
    ]
    return {"mirrors": "filter criterion feature ranking", "rows": rows}


def _cmd_instsel(args) -> dict:
    data = _load_dataset(args)
    metric = _metric_from_args(args, data.schema)
    if args.alg == "cnn":
        edited = cnn(data, metric, args.seed)
    elif args.alg == "enn":
        edited = enn(data, metric, args.k)
    elif args.alg == "renn":
        edited = renn(data, metric, args.k)
    else:
        edited = crr(data, metric)
    payload = edited.to_dict()
    rows = [{
        "algorithm": args.alg,
        "original_size": data.n,
        "retained_size": int(edited.retained.size),
        "retained_fraction": edited.retained.size / data.n,
    }]
    return {
        "mirrors": "training-set size reduction under instance selection",
        "rows": rows,
        "edited_set": payload,
    }


def _cmd_dim(args) -> dict:
    data = _load_dataset(args)
    spectrum = pca_spectrum(data)
    s = intrinsic_dimension(spectrum, args.epsilon)
    rows = [
        {"component": i + 1, "explained_variance_ratio": float(r)}
        for i, r in enumerate(spectrum.ratios)
    ]
    rows.append({"component": "intrinsic_dimension", "explained_variance_ratio": float(s)})
    return {
        "mirrors": "per-component explained variance and intrinsic dimension",
        "rows": rows,
        "intrinsic_dimension": s,
        "epsilon": args.epsilon,
    }


def _cmd_dtw(args) -> dict:
    a = _read_series(args.series_a)
    b = _read_series(args.series_b)
    distance, path = dtw(a, b, args.band)
    return {
        "mirrors": "time-series alignment distance",
        "rows": [{
            "distance": distance,
            "path_length": path.length,
            "len_a": int(a.size),
            "len_b": int(b.size),
            "band": args.band,
        }],
    }


def _cmd_emd(args) -> dict:
    s = _read_signature(args.sig_a)
    q = _read_signature(args.sig_b)
    distance, flow = emd(s, q)
    return {
        "mirrors": "signature transport distance and optimal flow",
        "rows": [{
            "distance": distance,
            "total_flow": flow.total,
            "clusters_a": s.size,
            "clusters_b": q.size,
        }],
        "flows": flow.flows.tolist(),
    }


def _cmd_ncd(args) -> dict:
    x = Path(args.bytes_a).read_bytes()
    y = Path(args.bytes_b).read_bytes()
    value = ncd(x, y, denominator=args.denominator)
    return {
        "mirrors": "compression-based dissimilarity",
        "rows": [{
            "ncd": value,
            "bytes_a": len(x),
            "bytes_b": len(y),
            "denominator": args.denominator,
        }],
    }


def _cmd_synth(args) -> dict:
    if args.kind == "uniform":
        x, y = labeled_uniform(args.n, args.d, args.seed, args.classes)
        flipped = []
    else:
        spread = 6.0
        centers = [[spread * c] + [0.0] * (args.d - 1) for c in range(args.classes)]
        x, y, flipped = gaussian_blobs(args.n, centers, 1.0, args.seed, args.noise)
    write_csv_dataset(x, y, args.out_data, args.out_schema)
    return {
        "mirrors": "synthetic dataset generation",
        "rows": [{
            "kind": args.kind,
            "n": args.n,
            "d": args.d,
            "classes": args.classes,
            "flipped": len(flipped),
            "data": str(args.out_data),
            "schema": str(args.out_schema),
        }],
    }


# ---------------------------------------------------------------------------
# argument plumbing
# ---------------------------------------------------------------------------

def _add_common(sub: argparse.ArgumentParser, *, data: bool = True) -> None:
    if data:
        sub.add_argument("--data", required=True, help="CSV dataset path")
        sub.add_argument("--schema", required=True, help="JSON schema manifest path")
    sub.add_argument("--seed", type=int, default=42)
    sub.add_argument("--out", default=".", help="directory for report.json / report.csv")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lazynn",
        description="Nearest-neighbour toolkit: benchmarks, classification, selection, distances.",
    )
    parser.add_argument("--version", action="version", version=f"lazynn {__version__}")
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("bench-index", help="compare brute / kd / ball (and rp-forest) timings")
    _add_common(p)
    p.add_argument("--folds", type=int, default=2)
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--metric", default="minkowski", choices=["minkowski", "chebyshev"])
    p.add_argument("--p", type=float, default=2.0)
    p.add_argument("--leaf-size", type=int, default=16)
    p.add_argument("--trees", type=int, default=0, help="add an rp-forest run with this many trees")
    p.add_argument("--budget", type=int, default=0)
    p.set_defaults(func=_cmd_bench_index)

    p = subs.add_parser("classify", help="cross-validate a neighbour classifier")
    _add_common(p)
    p.add_argument("--folds", type=int, default=2)
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--metric", default="minkowski",
                   choices=["minkowski", "chebyshev", "heterogeneous", "cosine", "pearson", "spearman"])
    p.add_argument("--p", type=float, default=2.0)
    p.add_argument("--index", default="brute", choices=["brute", "kd", "ball", "rpforest"])
    p.add_argument("--leaf-size", type=int, default=16)
    p.add_argument("--trees", type=int, default=10)
    p.add_argument("--budget", type=int, default=0)
    p.add_argument("--scheme", default="majority",
                   choices=["majority", "inverse_distance", "exponential"])
    p.add_argument("--vote-p", type=float, default=1.0)
    p.add_argument("--train-subset", default=None,
                   help="JSON file of retained indices (e.g. instsel output) to train on")
    p.set_defaults(func=_cmd_classify)

    p = subs.add_parser("featsel", help="rank features or run a wrapper search")
    _add_common(p)
    p.add_argument("--criterion", default="ig", choices=["ig", "or_class", "or_nonclass"])
    p.add_argument("--top-n", type=int, default=0, help="0 means rank all features")
    p.add_argument("--direction", default=None, choices=["forward", "backward"],
                   help="run a wrapper search instead of a filter ranking")
    p.set_defaults(func=_cmd_featsel)

    p = subs.add_parser("instsel", help="edit the training set")
    _add_common(p)
    p.add_argument("--alg", required=True, choices=["cnn", "enn", "renn", "crr"])
    p.add_argument("--k", type=int, default=3, help="neighbourhood size for enn/renn")
    p.add_argument("--metric", default="minkowski",
                   choices=["minkowski", "chebyshev", "heterogeneous"])
    p.add_argument("--p", type=float, default=2.0)
    p.set_defaults(func=_cmd_instsel)

    p = subs.add_parser("dim", help="explained-variance spectrum and intrinsic dimension")
    _add_common(p)
    p.add_argument("--epsilon", type=float, default=0.05)
    p.set_defaults(func=_cmd_dim)

    p = subs.add_parser("dtw", help="align two series (single-column CSV or whitespace text)")
    _add_common(p, data=False)
    p.add_argument("--series-a", required=True)
    p.add_argument("--series-b", required=True)
    p.add_argument("--band", type=int, default=None)
    p.set_defaults(func=_cmd_dtw)

    p = subs.add_parser("emd", help="transport distance between two JSON signatures")
    _add_common(p, data=False)
    p.add_argument("--sig-a", required=True)
    p.add_argument("--sig-b", required=True)
    p.set_defaults(func=_cmd_emd)

    p = subs.add_parser("ncd", help="compression distance between two files")
    _add_common(p, data=False)
    p.add_argument("--bytes-a", required=True)
    p.add_argument("--bytes-b", required=True)
    p.add_argument("--denominator", default="min", choices=["min", "max"])
    p.set_defaults(func=_cmd_ncd)

    p = subs.add_parser("synth", help="generate a synthetic CSV dataset + schema")
    p.add_argument("--kind", default="blobs", choices=["uniform", "blobs"])
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--classes", type=int, default=2)
    p.add_argument("--noise", type=float, default=0.0, help="label flip fraction (blobs)")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--out-data", required=True)
    p.add_argument("--out-schema", required=True)
    p.add_argument("--out", default=".")
    p.set_defaults(func=_cmd_synth)

    return parser


def _validate(args) -> list[dict]:
    """Collect every manifest problem instead of stopping at the first."""
    problems: list[dict] = []

    def need(ok: bool, flag: str, message: str) -> None:
        if not ok:
            problems.append({"flag": flag, "message": message})

    if hasattr(args, "epsilon"):
        need(0.0 < args.epsilon < 1.0, "--epsilon",
             f"got {args.epsilon}; legal range is (0, 1) exclusive")
    if hasattr(args, "folds"):
        need(args.folds >= 2, "--folds", f"got {args.folds}; need at least 2")
    if hasattr(args, "k"):
        need(args.k >= 1, "--k", f"got {args.k}; need at least 1")
    if hasattr(args, "p"):
        need(args.p >= 1.0, "--p", f"got {args.p}; the exponent must be >= 1")
    if hasattr(args, "vote_p"):
        need(args.vote_p >= 1.0, "--vote-p", f"got {args.vote_p}; must be >= 1")
    if hasattr(args, "leaf_size"):
        need(args.leaf_size >= 1, "--leaf-size", f"got {args.leaf_size}; need at least 1")
    if hasattr(args, "trees"):
        need(args.trees >= 0, "--trees", f"got {args.trees}; cannot be negative")
    if hasattr(args, "budget"):
        need(args.budget >= 0, "--budget", f"got {args.budget}; cannot be negative")
    if hasattr(args, "band") and args.band is not None:
        need(args.band >= 0, "--band", f"got {args.band}; cannot be negative")
    if hasattr(args, "top_n"):
        need(args.top_n >= 0, "--top-n", f"got {args.top_n}; cannot be negative")
    if hasattr(args, "n"):
        need(args.n >= 1, "--n", f"got {args.n}; need at least 1")
    if hasattr(args, "d"):
        need(args.d >= 1, "--d", f"got {args.d}; need at least 1")
    for flag, attr in (("--data", "data"), ("--schema", "schema"),
                       ("--series-a", "series_a"), ("--series-b", "series_b"),
                       ("--sig-a", "sig_a"), ("--sig-b", "sig_b"),
                       ("--bytes-a", "bytes_a"), ("--bytes-b", "bytes_b")):
        path = getattr(args, attr, None)
        if path is not None:
            need(Path(path).exists(), flag, f"file not found: {path}")
    return problems


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    problems = _validate(args)
    if problems:
        json.dump({"errors": problems}, sys.stderr, sort_keys=True)
        sys.stderr.write("\n")
        return 2
    manifest = _manifest(args, args.command)
    try:
        started = time.perf_counter()
        body = args.func(args)
        elapsed = time.perf_counter() - started
    except Exception as exc:  # surface a machine-readable failure
        json.dump({"errors": [{"message": str(exc), "type": type(exc).__name__}]},
                  sys.stderr, sort_keys=True)
        sys.stderr.write("\n")
        return 1
    report = {"manifest": manifest, "elapsed_time_s": elapsed, **body}
    json_path, csv_path = write_report(report, args.out)
    print(json_path)
    print(csv_path)
    return 0


def entrypoint() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    entrypoint()
