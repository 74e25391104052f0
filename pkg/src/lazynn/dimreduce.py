"""Feature scoring and selection, and variance-based intrinsic dimension."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import CATEGORICAL, NUMERIC, Dataset, stratified_folds
from .learner import VotingScheme, evaluate_cv
from .metrics import MetricConfig

CRITERIA = ("ig", "or_class", "or_nonclass")


def entropy(labels) -> float:
    """Shannon entropy of a label multiset, in bits."""
    labels = np.asarray(labels)
    if labels.size == 0:
        raise ValueError("entropy of an empty label set is undefined")
    _, counts = np.unique(labels, return_counts=True)
    probs = counts / labels.size
    return float(-(probs * np.log2(probs)).sum())


def _feature_position(data: Dataset, feature: str) -> int:
    try:
        return data.schema.names.index(feature)
    except ValueError:
        raise ValueError(f"unknown feature {feature!r}") from None


def _column(data: Dataset, pos: int) -> tuple[str, np.ndarray]:
    kind = data.schema.kinds[pos]
    if kind == NUMERIC:
        col = data.numeric[:, data.schema.numeric_positions.index(pos)]
    else:
        col = data.categorical[:, data.schema.categorical_positions.index(pos)]
    return kind, col


def information_gain(data: Dataset, feature: str) -> float:
    """Expected entropy reduction from partitioning on one feature.

    Categorical features partition by value. Numeric features are binarised
    at the threshold that maximises the gain, scanning the midpoints between
    consecutive distinct values.
    """
    if data.labels is None:
        raise ValueError("information gain needs class labels")
    pos = _feature_position(data, feature)
    kind, col = _column(data, pos)
    labels = data.labels
    base = entropy(labels)
    n = labels.size
    if kind == CATEGORICAL:
        cond = 0.0
        for v in np.unique(col):
            part = labels[col == v]
            cond += part.size / n * entropy(part)
        return max(base - cond, 0.0)
    distinct = np.unique(col)
    if distinct.size < 2:
        return 0.0
    best = 0.0
    for lo, hi in zip(distinct, distinct[1:]):
        t = 0.5 * (lo + hi)
        below = labels[col <= t]
        above = labels[col > t]
        cond = below.size / n * entropy(below) + above.size / n * entropy(above)
        best = max(best, base - cond)
    return best


def _or_counts(data: Dataset, feature: str, positive_class: int) -> tuple[float, float, float, float]:
    pos = _feature_position(data, feature)
    kind, col = _column(data, pos)
    if kind != NUMERIC:
        raise ValueError("odds ratio needs a numeric presence feature (non-zero means present)")
    present = col != 0
    in_class = data.labels == positive_class
    a = float(np.sum(present & in_class))
    b = float(np.sum(~present & in_class))
    c = float(np.sum(present & ~in_class))
    d = float(np.sum(~present & ~in_class))
    if min(a, b, c, d) == 0.0:
        # rescue empty contingency cells with a small fixed value
        a, b, c, d = a + 0.5, b + 0.5, c + 0.5, d + 0.5
    return a, b, c, d


def odds_ratio(data: Dataset, feature: str, positive_class: int | str | None = None) -> float:
    """Odds of the feature occurring in the class over the odds in the rest.

    Binary classification only. A feature is 'present' when its numeric
    value is non-zero. Zero contingency cells are smoothed by adding 0.5 to
    every cell, so the ratio is always finite and positive.
    """
    cls = _resolve_class(data, positive_class)
    a, b, c, d = _or_counts(data, feature, cls)
    return (a / b) / (c / d)


def _resolve_class(data: Dataset, positive_class) -> int:
    if data.labels is None:
        raise ValueError("odds ratio needs class labels")
    if data.n_classes != 2:
        raise ValueError(f"odds ratio is defined for binary tasks, got {data.n_classes} classes")
    if positive_class is None:
        return 1
    if isinstance(positive_class, str):
        try:
            return data.label_names.index(positive_class)
        except ValueError:
            raise ValueError(f"unknown class {positive_class!r}") from None
    if positive_class not in (0, 1):
        raise ValueError("positive_class must be 0 or 1")
    return int(positive_class)


@dataclass(frozen=True)
class FeatureScore:
    feature: str
    criterion: str
    value: float


def rank_features(data: Dataset, criterion: str, top_n: int,
                  positive_class: int | str | None = None) -> list[FeatureScore]:
    """Score every feature and return the ``top_n`` best, descending.

    ``criterion`` is ``ig``, ``or_class`` or ``or_nonclass``. Ties keep
    schema order.
    """
    if criterion not in CRITERIA:
        raise ValueError(f"unknown criterion {criterion!r}, expected one of {CRITERIA}")
    p = len(data.schema.features)
    if not 1 <= top_n <= p:
        raise ValueError(f"top_n must be between 1 and the feature count {p}")
    if criterion == "ig":
        scores = [information_gain(data, name) for name in data.schema.names]
    else:
        cls = _resolve_class(data, positive_class)
        if criterion == "or_nonclass":
            cls = 1 - cls
        scores = [odds_ratio(data, name, cls) for name in data.schema.names]
    order = np.argsort(-np.asarray(scores), kind="stable")[:top_n]
    return [FeatureScore(data.schema.names[i], criterion, float(scores[i])) for i in order]


@dataclass(frozen=True)
class SubsetSearchState:
    """Outcome of a wrapper search: the chosen mask, its CV accuracy, and the
    full trace of every mask evaluated on the way."""

    mask: tuple[bool, ...]
    cv_accuracy: float
    history: tuple[tuple[tuple[bool, ...], float], ...]


def cv_mask_evaluator(data: Dataset, k_folds: int = 3, seed: int = 0,
                      metric: MetricConfig | None = None, k: int = 3,
                      scheme: VotingScheme | None = None) -> Callable:
    """Default wrapper evaluator: CV accuracy of the classifier restricted to
    a feature mask. The empty mask scores the majority-class baseline."""
    folds = stratified_folds(data, k_folds, seed)

    def evaluate(mask) -> float:
        mask = np.asarray(mask, dtype=bool)
        if not mask.any():
            correct = 0
            for f in range(folds.k_folds):
                train_labels = data.labels[folds.train_indices(f)]
                test_labels = data.labels[folds.test_indices(f)]
                majority = int(np.bincount(train_labels).argmax())
                correct += int(np.sum(test_labels == majority))
            return correct / data.n
        sub = data.select_features(mask)
        sub_metric = metric
        if metric is not None and metric.kind == "heterogeneous":
            sub_metric = MetricConfig("heterogeneous", schema=sub.schema)
        report = evaluate_cv(sub, folds, sub_metric, "brute", k, scheme)
        return report.mean_accuracy

    return evaluate


def wrapper_search(data: Dataset, direction: str, evaluate: Callable | None = None,
                   tol: float = 1e-6) -> SubsetSearchState:
    """Greedy forward or backward feature-subset hill climb.

    Each round evaluates every single-feature addition (or deletion) and
    accepts the best one if it improves the CV accuracy by more than ``tol``;
    otherwise the search stops. The trace records every evaluated mask.
    """
    if direction not in ("forward", "backward"):
        raise ValueError("direction must be 'forward' or 'backward'")
    if evaluate is None:
        evaluate = cv_mask_evaluator(data)
    p = len(data.schema.features)
    history: list[tuple[tuple[bool, ...], float]] = []

    def score(mask: np.ndarray) -> float:
        acc = float(evaluate(mask))
        history.append((tuple(bool(b) for b in mask), acc))
        return acc

    mask = np.zeros(p, dtype=bool) if direction == "forward" else np.ones(p, dtype=bool)
    best = score(mask)
    while True:
        flips = np.flatnonzero(~mask) if direction == "forward" else np.flatnonzero(mask)
        if flips.size == 0:
            break
        cand_best = -np.inf
        cand_flip = -1
        for f in flips:
            trial = mask.copy()
            trial[f] = not trial[f]
            acc = score(trial)
            if acc > cand_best:
                cand_best = acc
                cand_flip = int(f)
        if cand_best <= best + tol:
            break
        mask[cand_flip] = not mask[cand_flip]
        best = cand_best
    return SubsetSearchState(tuple(bool(b) for b in mask), best, tuple(history))


@dataclass(frozen=True)
class PrincipalSpectrum:
    """Explained-variance ratios of the principal components, descending."""

    ratios: np.ndarray

    def __post_init__(self) -> None:
        ratios = np.asarray(self.ratios, dtype=np.float64)
        if ratios.ndim != 1 or ratios.size < 1:
            raise ValueError("spectrum needs at least one ratio")
        if np.any(ratios < -1e-9) or np.any(np.diff(ratios) > 1e-9):
            raise ValueError("ratios must be non-negative and non-increasing")
        if abs(ratios.sum() - 1.0) > 1e-9:
            raise ValueError("ratios must sum to one")
        ratios = np.maximum(ratios, 0.0)
        ratios.setflags(write=False)
        object.__setattr__(self, "ratios", ratios)


def pca_spectrum(data) -> PrincipalSpectrum:
    """Explained-variance ratios from the covariance eigen-decomposition.

    Accepts a numeric matrix or an all-numeric Dataset; rows are mean-centred
    internally. At most min(n, p) components are reported.
    """
    if isinstance(data, Dataset):
        if data.categorical.shape[1]:
            raise ValueError("pca needs all-numeric features")
        x = data.numeric
    else:
        x = np.asarray(data, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2:
        raise ValueError("pca needs a 2-D matrix with at least two samples")
    centred = x - x.mean(axis=0)
    cov = centred.T @ centred / (x.shape[0] - 1)
    eigvals = np.linalg.eigvalsh(cov)[::-1]
    eigvals = np.maximum(eigvals, 0.0)[: min(x.shape)]
    total = eigvals.sum()
    if total <= 0:
        raise ValueError("data has zero variance; spectrum undefined")
    return PrincipalSpectrum(eigvals / total)


def intrinsic_dimension(spectrum, epsilon: float) -> int:
    """Smallest component count whose cumulative ratio reaches 1 - epsilon."""
    if not 0.0 < epsilon < 1.0:
        raise ValueError("epsilon must lie strictly between 0 and 1")
    ratios = spectrum.ratios if isinstance(spectrum, PrincipalSpectrum) else np.asarray(spectrum, dtype=np.float64)
    cumulative = np.cumsum(ratios)
    hits = np.flatnonzero(cumulative >= 1.0 - epsilon - 1e-12)
    return int(hits[0]) + 1 if hits.size else ratios.size
