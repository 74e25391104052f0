"""Training-set editing: competence model, CNN, ENN, RENN and CRR."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .core import Dataset
from .metrics import MetricConfig

_CHUNK = 256


def pairwise_distances(data: Dataset, metric: MetricConfig | None = None) -> np.ndarray:
    """Symmetric n x n distance matrix under the configured metric."""
    metric = metric or MetricConfig()
    n = data.n
    if metric.kind == "heterogeneous":
        w = metric.weights or data.schema.weights
        wn = np.asarray([w[i] for i in data.schema.numeric_positions])
        wc = np.asarray([w[i] for i in data.schema.categorical_positions])
        out = np.zeros((n, n))
        num, cat = data.numeric, data.categorical
        for lo in range(0, n, _CHUNK):
            hi = min(lo + _CHUNK, n)
            block = np.abs(num[lo:hi, None, :] - num[None, :, :]) @ wn
            if cat.shape[1]:
                block = block + (cat[lo:hi, None, :] != cat[None, :, :]).astype(float) @ wc
            out[lo:hi] = block
        return _symmetrise(out)
    if data.categorical.shape[1]:
        raise ValueError(f"{metric.kind} metric needs all-numeric features")
    x = data.numeric
    if metric.kind == "minkowski" and metric.p == 2.0 and metric.weights is None:
        sq = (x * x).sum(axis=1)
        gram = x @ x.T
        d2 = np.maximum(sq[:, None] + sq[None, :] - 2.0 * gram, 0.0)
        np.fill_diagonal(d2, 0.0)
        return _symmetrise(np.sqrt(d2))
    if metric.kind in ("minkowski", "chebyshev"):
        p = np.inf if metric.kind == "chebyshev" else metric.p
        w = None if metric.weights is None else np.asarray(metric.weights)
        out = np.zeros((n, n))
        for lo in range(0, n, _CHUNK):
            hi = min(lo + _CHUNK, n)
            gaps = np.abs(x[lo:hi, None, :] - x[None, :, :])
            if p == np.inf:
                out[lo:hi] = gaps.max(axis=2)
            elif w is None:
                out[lo:hi] = (gaps**p).sum(axis=2) ** (1.0 / p)
            else:
                out[lo:hi] = (w * gaps**p).sum(axis=2) ** (1.0 / p)
        return _symmetrise(out)
    out = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            out[i, j] = out[j, i] = metric.distance(x[i], x[j])
    return out


def _symmetrise(d: np.ndarray) -> np.ndarray:
    return 0.5 * (d + d.T)


def _loo_nearest(dists: np.ndarray) -> np.ndarray:
    """Leave-one-out nearest neighbour per row; ties go to the lowest index."""
    d = dists.copy()
    np.fill_diagonal(d, np.inf)
    return d.argmin(axis=1)


@dataclass(frozen=True)
class CompetenceModel:
    """Coverage and reachability sets under leave-one-out 1-NN.

    ``coverage[c]`` holds the cases c correctly classifies (c is their
    nearest neighbour and shares their label); ``reachability[c]`` holds the
    cases that correctly classify c. The two are transposes of each other,
    and neither includes the case itself.
    """

    coverage: tuple[frozenset, ...]
    reachability: tuple[frozenset, ...]


def build_competence(data: Dataset, metric: MetricConfig | None = None,
                     dists: np.ndarray | None = None) -> CompetenceModel:
    if data.n < 2:
        raise ValueError("competence model needs at least two cases")
    if data.labels is None:
        raise ValueError("competence model needs class labels")
    if dists is None:
        dists = pairwise_distances(data, metric)
    nn = _loo_nearest(dists)
    labels = data.labels
    coverage: list[set] = [set() for _ in range(data.n)]
    reachability: list[set] = [set() for _ in range(data.n)]
    for case in range(data.n):
        guide = int(nn[case])
        if labels[guide] == labels[case]:
            coverage[guide].add(case)
            reachability[case].add(guide)
    return CompetenceModel(
        coverage=tuple(frozenset(s) for s in coverage),
        reachability=tuple(frozenset(s) for s in reachability),
    )


@dataclass(frozen=True)
class EditedSet:
    """Retained indices plus a log of what was dropped and why."""

    retained: np.ndarray
    provenance: dict
    removal_log: tuple[tuple[int, str, int], ...] = ()

    def __post_init__(self) -> None:
        retained = np.asarray(self.retained, dtype=np.int64)
        retained.setflags(write=False)
        object.__setattr__(self, "retained", retained)

    def to_dict(self) -> dict:
        return {
            "retained": self.retained.tolist(),
            "provenance": dict(self.provenance),
            "removals": [
                {"index": int(i), "reason": r, "round": int(rd)}
                for i, r, rd in self.removal_log
            ],
        }


def _nearest_retained(dists: np.ndarray, case: int, retained: list[int]) -> int:
    """Index (into the original set) of the retained case closest to ``case``;
    distance ties go to the lowest original index."""
    arr = np.asarray(retained)
    row = dists[case, arr]
    return int(arr[np.lexsort((arr, row))[0]])


def _consistency_passes(dists: np.ndarray, labels: np.ndarray, order: np.ndarray,
                        alg: str, params: dict) -> EditedSet:
    """Shared incremental loop of CNN-style editors: repeatedly sweep the
    cases in ``order``, adding any case the current edited set misclassifies,
    until a full sweep adds nothing."""
    n = labels.size
    retained: list[int] = []
    member = np.zeros(n, dtype=bool)
    sweep = 0
    while True:
        sweep += 1
        added = False
        for case in order:
            case = int(case)
            if member[case]:
                continue
            if retained:
                guide = _nearest_retained(dists, case, retained)
                misclassified = labels[guide] != labels[case]
            else:
                misclassified = True
            if misclassified:
                retained.append(case)
                member[case] = True
                added = True
        if not added:
            break
    removed = np.flatnonzero(~member)
    log = tuple((int(i), "classified by the retained set", sweep) for i in removed)
    return EditedSet(
        retained=np.sort(np.asarray(retained, dtype=np.int64)),
        provenance={"algorithm": alg, "sweeps": sweep, **params},
        removal_log=log,
    )


def cnn(data: Dataset, metric: MetricConfig | None = None, seed: int = 0) -> EditedSet:
    """Condensed editing: seeded-shuffled sweeps add every case the current
    edited set misclassifies, until the set is training-consistent."""
    if data.labels is None:
        raise ValueError("cnn needs class labels")
    dists = pairwise_distances(data, metric)
    order = np.random.default_rng(seed).permutation(data.n)
    return _consistency_passes(dists, data.labels, order, "cnn", {"seed": seed})


def enn(data: Dataset, metric: MetricConfig | None = None, k: int = 3) -> EditedSet:
    """Wilson editing: drop every case whose k leave-one-out neighbours
    (majority vote, computed on the original set) disagree with its label.
    All marked cases are removed in one batch."""
    edited, _ = _enn_pass(data, metric, k)
    return edited


def _enn_pass(data: Dataset, metric: MetricConfig | None, k: int,
              dists: np.ndarray | None = None, live: np.ndarray | None = None,
              round_no: int = 1) -> tuple[EditedSet, np.ndarray]:
    if data.labels is None:
        raise ValueError("enn needs class labels")
    if k < 1:
        raise ValueError("k must be at least 1")
    if dists is None:
        dists = pairwise_distances(data, metric)
    labels = data.labels
    if live is None:
        live = np.ones(data.n, dtype=bool)
    pool = np.flatnonzero(live)
    if pool.size <= k:
        raise ValueError(f"need more than k={k} cases, have {pool.size}")
    marked = []
    for case in pool:
        others = pool[pool != case]
        row = dists[case, others]
        neigh = others[np.lexsort((others, row))[:k]]
        votes = np.bincount(labels[neigh], minlength=int(labels.max()) + 1)
        if int(votes.argmax()) != labels[case]:
            marked.append(int(case))
    keep = live.copy()
    keep[marked] = False
    if not keep.any():
        # refusing to empty the training set: keep the survivors of the
        # previous round and stop editing
        keep = live.copy()
        marked = []
    log = tuple((i, "k-neighbour majority disagrees", round_no) for i in marked)
    edited = EditedSet(
        retained=np.flatnonzero(keep).astype(np.int64),
        provenance={"algorithm": "enn", "k": k},
        removal_log=log,
    )
    return edited, keep


def renn(data: Dataset, metric: MetricConfig | None = None, k: int = 3) -> EditedSet:
    """Repeat the ENN pass on the survivors until a pass removes nothing."""
    dists = pairwise_distances(data, metric)
    live = np.ones(data.n, dtype=bool)
    log: list[tuple[int, str, int]] = []
    round_no = 0
    while True:
        round_no += 1
        before = int(live.sum())
        if before <= k:
            break
        edited, live = _enn_pass(data, metric, k, dists, live, round_no)
        log.extend(edited.removal_log)
        if int(live.sum()) == before:
            break
    return EditedSet(
        retained=np.flatnonzero(live).astype(np.int64),
        provenance={"algorithm": "renn", "k": k, "rounds": round_no},
        removal_log=tuple(log),
    )


def crr(data: Dataset, metric: MetricConfig | None = None,
        ordering: Callable[[CompetenceModel], np.ndarray] | None = None) -> EditedSet:
    """Redundancy removal guided by the competence model.

    Cases are presented in ascending coverage-set size (border cases first;
    ties by index), added only when the current edited set misclassifies
    them, never deleted, and the competence model is computed once up front.
    The result classifies the whole training set correctly under 1-NN.

    ``ordering`` may replace the presentation policy with any callable
    mapping the competence model to a permutation of case indices.
    """
    if data.n < 2:
        raise ValueError("crr needs at least two cases")
    dists = pairwise_distances(data, metric)
    model = build_competence(data, metric, dists)
    if ordering is None:
        sizes = np.array([len(s) for s in model.coverage])
        order = np.lexsort((np.arange(data.n), sizes))
    else:
        order = np.asarray(ordering(model), dtype=np.int64)
        if sorted(order.tolist()) != list(range(data.n)):
            raise ValueError("ordering must be a permutation of the case indices")
    return _consistency_passes(dists, data.labels, order, "crr",
                               {"ordering": "coverage_ascending" if ordering is None else "custom"})
