"""Turning neighbour lists into decisions, plus the cross-validation harness."""

from __future__ import annotations

import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .core import Dataset, FoldPlan, fit_normalizer
from .index import (
    BallTree,
    BruteForceIndex,
    KdTree,
    MixedBruteIndex,
    NeighbourList,
    RpForest,
)
from .metrics import MetricConfig

_ZERO_DISTANCE_EPS = 1e-12

INDEX_KINDS = ("brute", "kd", "ball", "rpforest")


def worker_cap() -> int:
    """Worker count ceiling, from the LAZYNN_THREADS environment variable."""
    raw = os.environ.get("LAZYNN_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


@dataclass(frozen=True)
class VotingScheme:
    """How neighbours vote: plain counts, inverse-distance or exponential decay."""

    kind: str = "majority"
    p: float = 1.0

    def __post_init__(self) -> None:
        if self.kind not in ("majority", "inverse_distance", "exponential"):
            raise ValueError(f"unknown voting scheme {self.kind!r}")
        if self.kind == "inverse_distance" and not self.p >= 1.0:
            raise ValueError("inverse-distance exponent p must be >= 1")


@dataclass(frozen=True)
class Prediction:
    label: int
    votes: np.ndarray
    neighbours: NeighbourList

    def __post_init__(self) -> None:
        votes = np.asarray(self.votes, dtype=np.float64)
        if np.any(votes < 0):
            raise ValueError("votes must be non-negative")
        if int(np.argmax(votes)) != self.label:
            raise ValueError("label must be the argmax of the votes")
        votes.setflags(write=False)
        object.__setattr__(self, "votes", votes)


def classify(neighbours: NeighbourList, labels, scheme: VotingScheme | None = None,
             n_classes: int | None = None) -> Prediction:
    """Vote the class of a query from its neighbour list.

    Majority voting counts neighbours; inverse-distance weights each vote by
    1/d^p (distances clamped away from zero so exact hits stay finite);
    exponential weights by e^(-d). Vote ties resolve to the lowest class id.
    """
    if len(neighbours) == 0:
        raise ValueError("cannot classify from an empty neighbour list")
    scheme = scheme or VotingScheme()
    labels = np.asarray(labels, dtype=np.int64)
    if n_classes is None:
        n_classes = int(labels.max()) + 1
    votes = np.zeros(n_classes)
    for idx, dist in neighbours:
        c = int(labels[idx])
        if scheme.kind == "majority":
            votes[c] += 1.0
        elif scheme.kind == "inverse_distance":
            votes[c] += 1.0 / max(dist, _ZERO_DISTANCE_EPS) ** scheme.p
        else:
            votes[c] += float(np.exp(-dist))
    return Prediction(int(np.argmax(votes)), votes, neighbours)


def regress(neighbours: NeighbourList, targets, weighting: str = "uniform",
            p: float = 1.0, literal: bool = False) -> float:
    """Predict a real target from the neighbours' targets.

    ``uniform`` averages the k targets. ``inverse`` weights by 1/d^p and by
    default normalises to a weighted mean; ``literal=True`` instead divides
    the weighted sum by k, which is not a convex combination but is kept as
    an alternative formulation.
    """
    if len(neighbours) == 0:
        raise ValueError("cannot regress from an empty neighbour list")
    if weighting not in ("uniform", "inverse"):
        raise ValueError(f"unknown weighting {weighting!r}")
    targets = np.asarray(targets, dtype=np.float64)
    ys = np.array([targets[i] for i, _ in neighbours])
    if weighting == "uniform":
        return float(ys.mean())
    ds = np.array([max(d, _ZERO_DISTANCE_EPS) for _, d in neighbours])
    w = 1.0 / ds**p
    if literal:
        return float((w * ys).sum() / len(ys))
    return float((w * ys).sum() / w.sum())


@dataclass(frozen=True)
class EvalReport:
    """Per-fold accuracy and wall-clock timing of one CV configuration."""

    fold_accuracies: tuple[float, ...]
    mean_accuracy: float
    build_times: tuple[float, ...]
    query_times: tuple[float, ...]
    config: dict

    def __post_init__(self) -> None:
        if not all(0.0 <= a <= 1.0 for a in self.fold_accuracies):
            raise ValueError("accuracies must lie in [0, 1]")
        if len(self.build_times) != len(self.fold_accuracies):
            raise ValueError("one build time per fold expected")

    def to_dict(self) -> dict:
        return {
            "fold_accuracies": list(self.fold_accuracies),
            "mean_accuracy": self.mean_accuracy,
            "build_times": list(self.build_times),
            "query_times": list(self.query_times),
            "config": dict(self.config),
        }


def build_index(train: Dataset, metric: MetricConfig, index_kind: str,
                leaf_size: int, n_trees: int, seed: int):
    """Construct a neighbour index over a (normalised) training dataset."""
    if index_kind not in INDEX_KINDS:
        raise ValueError(f"unknown index kind {index_kind!r}")
    if metric.kind == "heterogeneous":
        if index_kind != "brute":
            raise ValueError("tree indexes need all-numeric features; use brute for mixed data")
        schema = train.schema
        w = metric.weights or schema.weights
        wn = [w[i] for i in schema.numeric_positions]
        wc = [w[i] for i in schema.categorical_positions]
        return MixedBruteIndex(train.numeric, train.categorical, wn, wc)
    if train.categorical.shape[1]:
        raise ValueError(f"{metric.kind} metric needs all-numeric features")
    x = _weighted_view(train.numeric, metric)
    if index_kind == "brute":
        return BruteForceIndex(x, metric)
    if index_kind == "kd":
        return KdTree(x, leaf_size=leaf_size, metric=metric)
    if index_kind == "ball":
        return BallTree(x, leaf_size=leaf_size, metric=metric)
    return RpForest(x, n_trees=n_trees, leaf_size=leaf_size, seed=seed, metric=metric)


def _weighted_view(x: np.ndarray, metric: MetricConfig) -> np.ndarray:
    # fold minkowski feature weights into the data: w|a-b|^p == |w^(1/p) a - w^(1/p) b|^p
    if metric.kind != "minkowski" or metric.weights is None:
        return x
    w = np.asarray(metric.weights, dtype=np.float64)
    if w.shape != (x.shape[1],):
        raise ValueError("metric weights length must match the feature count")
    return x * w ** (1.0 / metric.p)


def evaluate_cv(data: Dataset, folds: FoldPlan, metric: MetricConfig | None = None,
                index_kind: str = "brute", k: int = 3,
                scheme: VotingScheme | None = None, leaf_size: int = 16,
                n_trees: int = 10, search_budget: int = 0,
                train_subset=None) -> EvalReport:
    """Cross-validate a neighbour classifier.

    Per fold: fit the normaliser on the training split only, build the index
    on the normalised training data, classify every test row, and record the
    accuracy plus separate build and query wall-clock times.

    ``train_subset`` optionally restricts the rows eligible for training
    (e.g. an edited set); test folds still cover the full dataset, so the
    accuracy stays comparable with an unrestricted run on the same folds.
    """
    if folds.assignments.shape[0] != data.n:
        raise ValueError("fold plan does not cover this dataset")
    if data.labels is None:
        raise ValueError("cross-validation needs class labels")
    if k < 1:
        raise ValueError("k must be at least 1")
    metric = metric or MetricConfig()
    scheme = scheme or VotingScheme()
    subset_mask = None
    if train_subset is not None:
        subset_mask = np.zeros(data.n, dtype=bool)
        subset_mask[np.asarray(train_subset, dtype=np.int64)] = True

    def run_fold(fold: int) -> tuple[float, float, float]:
        try:
            train_idx = folds.train_indices(fold)
            if subset_mask is not None:
                train_idx = train_idx[subset_mask[train_idx]]
                if train_idx.size == 0:
                    raise ValueError("train subset leaves no training rows in this fold")
            test_idx = folds.test_indices(fold)
            train = data.subset(train_idx)
            test = data.subset(test_idx)
            t0 = time.perf_counter()
            norm = fit_normalizer(train)
            train_n = norm.transform(train)
            idx = build_index(train_n, metric, index_kind, leaf_size, n_trees, folds.seed)
            t_build = time.perf_counter() - t0
            test_num = norm.transform_matrix(test.numeric) if test.numeric.shape[1] else test.numeric
            if metric.kind == "minkowski" and metric.weights is not None:
                test_num = _weighted_view(test_num, metric)
            kk = min(k, train.n)
            correct = 0
            t0 = time.perf_counter()
            for r in range(test.n):
                if metric.kind == "heterogeneous":
                    nb = idx.query(test_num[r], test.categorical[r], kk)
                elif index_kind == "rpforest":
                    nb = idx.query(test_num[r], kk, search_budget)
                else:
                    nb = idx.query(test_num[r], kk)
                pred = classify(nb, train.labels, scheme, n_classes=data.n_classes)
                correct += int(pred.label == test.labels[r])
            t_query = time.perf_counter() - t0
            return correct / test.n, t_build, t_query
        except Exception as exc:
            raise RuntimeError(f"fold {fold} failed: {exc}") from exc

    cap = worker_cap()
    fold_ids = range(folds.k_folds)
    if cap > 1:
        with ThreadPoolExecutor(max_workers=min(cap, folds.k_folds)) as pool:
            results = list(pool.map(run_fold, fold_ids))
    else:
        results = [run_fold(f) for f in fold_ids]
    accs = tuple(r[0] for r in results)
    return EvalReport(
        fold_accuracies=accs,
        mean_accuracy=float(np.mean(accs)),
        build_times=tuple(r[1] for r in results),
        query_times=tuple(r[2] for r in results),
        config={
            "metric": metric.kind,
            "p": metric.p,
            "index": index_kind,
            "k": k,
            "scheme": scheme.kind,
            "vote_p": scheme.p,
            "leaf_size": leaf_size,
            "n_trees": n_trees,
            "search_budget": search_budget,
            "k_folds": folds.k_folds,
            "seed": folds.seed,
        },
    )
