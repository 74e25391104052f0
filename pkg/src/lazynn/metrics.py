"""Vector-space, correlation, histogram and compression (dis)similarity measures."""

from __future__ import annotations

import math
import zlib
from dataclasses import dataclass

import numpy as np

from .core import CATEGORICAL, NUMERIC, FeatureSchema

_RANGE_SLACK = 1e-9


@dataclass(frozen=True)
class MetricConfig:
    """Declares which distance a neighbour search should use.

    ``kind`` is one of ``minkowski`` (with exponent ``p``), ``chebyshev``,
    ``heterogeneous``, ``cosine``, ``pearson`` or ``spearman``. ``weights``
    are the per-feature multipliers of the mixed/weighted forms.
    """

    kind: str = "minkowski"
    p: float = 2.0
    weights: tuple[float, ...] | None = None
    schema: FeatureSchema | None = None

    _KINDS = ("minkowski", "chebyshev", "heterogeneous", "cosine", "pearson", "spearman")

    def __post_init__(self) -> None:
        if self.kind not in self._KINDS:
            raise ValueError(f"unknown metric kind {self.kind!r}")
        if self.kind == "minkowski" and not self.p >= 1.0:
            raise ValueError("minkowski exponent p must be >= 1 (smaller p breaks the triangle inequality)")
        if self.kind == "heterogeneous" and self.schema is None:
            raise ValueError("heterogeneous metric needs a schema")
        if self.weights is not None:
            object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
            if any(w < 0 for w in self.weights):
                raise ValueError("metric weights must be non-negative")

    @property
    def is_proper_metric(self) -> bool:
        """True when the configured distance satisfies all four metric axioms."""
        return self.kind in ("minkowski", "chebyshev", "heterogeneous")

    def distance(self, q, x) -> float:
        if self.kind == "minkowski":
            return minkowski(q, x, self.p, self.weights)
        if self.kind == "chebyshev":
            return chebyshev(q, x)
        if self.kind == "heterogeneous":
            return heterogeneous(q, x, self.schema, self.weights)
        if self.kind == "cosine":
            return to_distance(cosine_similarity(q, x))
        if self.kind == "pearson":
            return to_distance(pearson(q, x))
        return to_distance(spearman(q, x))


def _pair(q, x) -> tuple[np.ndarray, np.ndarray]:
    q = np.asarray(q, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if q.shape != x.shape or q.ndim != 1:
        raise ValueError(f"vectors must be 1-D and of equal length, got {q.shape} vs {x.shape}")
    return q, x


def minkowski(q, x, p: float = 2.0, weights=None) -> float:
    """Weighted L_p distance: (sum_f w_f |q_f - x_f|^p)^(1/p).

    p=1 is the Manhattan distance, p=2 the Euclidean. Larger p gives more
    weight to the features on which the vectors differ most.
    """
    q, x = _pair(q, x)
    if not p >= 1.0:
        raise ValueError("p must be >= 1")
    gaps = np.abs(q - x)
    if weights is not None:
        w = np.asarray(weights, dtype=np.float64)
        if w.shape != q.shape:
            raise ValueError("weights length must match the vectors")
    else:
        w = None
    top = gaps.max() if gaps.size else 0.0
    if top == 0.0:
        return 0.0
    # factor out the largest gap so big exponents cannot overflow
    scaled = gaps / top
    powered = scaled**p if w is None else w * scaled**p
    return float(top * powered.sum() ** (1.0 / p))


def chebyshev(q, x) -> float:
    """L_inf distance: the largest per-feature gap (the p -> infinity limit)."""
    q, x = _pair(q, x)
    return float(np.abs(q - x).max())


def heterogeneous(q, x, schema: FeatureSchema, weights=None) -> float:
    """Weighted mixed-row distance: absolute difference on numeric features,
    0/1 overlap on categorical ones."""
    if schema is None:
        raise ValueError("heterogeneous distance needs a schema")
    if len(q) != len(schema.features) or len(x) != len(schema.features):
        raise ValueError("rows must have one value per schema feature")
    w = schema.weights if weights is None else tuple(weights)
    if len(w) != len(schema.features):
        raise ValueError("weights length must match the feature count")
    total = 0.0
    for (name, kind), wf, qv, xv in zip(schema.features, w, q, x):
        if kind == NUMERIC:
            try:
                total += wf * abs(float(qv) - float(xv))
            except (TypeError, ValueError):
                raise ValueError(f"feature {name!r} is numeric but got {qv!r} / {xv!r}") from None
        else:
            if isinstance(qv, float) or isinstance(xv, float):
                raise ValueError(f"feature {name!r} is categorical but got a number")
            total += wf * (0.0 if qv == xv else 1.0)
    return total


@dataclass(frozen=True)
class SimilarityScore:
    """A similarity value together with its declared legal range."""

    value: float
    kind: str  # "cosine" or "correlation"
    lo: float
    hi: float

    def __post_init__(self) -> None:
        if self.kind not in ("cosine", "correlation"):
            raise ValueError(f"unknown similarity kind {self.kind!r}")
        if not (self.lo - _RANGE_SLACK <= self.value <= self.hi + _RANGE_SLACK):
            raise ValueError(
                f"similarity {self.value} outside declared range [{self.lo}, {self.hi}]"
            )


def cosine_similarity(q, x, allow_negative: bool = False) -> SimilarityScore:
    """Dot product of the vectors normalised by their lengths.

    By default all components must be non-negative, which pins the score to
    [0, 1]; pass ``allow_negative=True`` to accept arbitrary sign (range then
    widens to [-1, 1]).
    """
    q, x = _pair(q, x)
    if not allow_negative and (np.any(q < 0) or np.any(x < 0)):
        raise ValueError("cosine similarity expects non-negative components (or allow_negative=True)")
    nq = float(np.linalg.norm(q))
    nx = float(np.linalg.norm(x))
    if nq == 0.0 or nx == 0.0:
        raise ValueError("cosine similarity is undefined for zero-norm vectors")
    lo = -1.0 if allow_negative else 0.0
    value = float(np.clip(np.dot(q, x) / (nq * nx), lo, 1.0))
    return SimilarityScore(value, "cosine", lo, 1.0)


def pearson(q, x) -> SimilarityScore:
    """Linear correlation of the two vectors, in [-1, 1]."""
    q, x = _pair(q, x)
    if q.size < 2:
        raise ValueError("correlation needs vectors of length >= 2")
    qc = q - q.mean()
    xc = x - x.mean()
    denom = math.sqrt(float(np.dot(qc, qc)) * float(np.dot(xc, xc)))
    if denom == 0.0:
        raise ValueError("correlation is undefined for a constant vector (zero variance)")
    value = float(np.clip(np.dot(qc, xc) / denom, -1.0, 1.0))
    return SimilarityScore(value, "correlation", -1.0, 1.0)


def average_ranks(x) -> np.ndarray:
    """Rank transform with ties assigned the average of their rank positions."""
    x = np.asarray(x, dtype=np.float64)
    order = np.argsort(x, kind="stable")
    ranks = np.empty(x.size, dtype=np.float64)
    i = 0
    while i < x.size:
        j = i
        while j + 1 < x.size and x[order[j + 1]] == x[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def spearman(q, x) -> SimilarityScore:
    """Pearson correlation of the average-rank-transformed vectors."""
    q, x = _pair(q, x)
    score = pearson(average_ranks(q), average_ranks(x))
    return SimilarityScore(score.value, "correlation", -1.0, 1.0)


def to_distance(score: SimilarityScore, scaled: bool = False) -> float:
    """Turn a similarity into a dissimilarity.

    Cosine: 1 - s. Correlation: 1 - r, spanning [0, 2]; with ``scaled=True``
    the result is (1 - r) / 2, mapped onto [0, 1].
    """
    if score.kind == "cosine":
        return 1.0 - score.value
    return (1.0 - score.value) / 2.0 if scaled else 1.0 - score.value


@dataclass(frozen=True)
class Histogram:
    """A binned distribution: N non-negative bin masses."""

    bins: np.ndarray
    normalised: bool = False

    def __post_init__(self) -> None:
        bins = np.asarray(self.bins, dtype=np.float64)
        if bins.ndim != 1 or bins.size < 1:
            raise ValueError("histogram needs at least one bin")
        if not np.all(np.isfinite(bins)):
            raise ValueError("histogram bins must be finite")
        if np.any(bins < 0):
            raise ValueError("histogram bins must be non-negative")
        bins = bins.copy()
        bins.setflags(write=False)
        object.__setattr__(self, "bins", bins)

    def distribution(self) -> np.ndarray:
        """Bins rescaled to sum to one."""
        total = self.bins.sum()
        if total <= 0:
            raise ValueError("cannot normalise an all-zero histogram")
        return self.bins / total


def as_histogram(h) -> Histogram:
    return h if isinstance(h, Histogram) else Histogram(np.asarray(h, dtype=np.float64))


def _paired_bins(h, k) -> tuple[Histogram, Histogram]:
    h = as_histogram(h)
    k = as_histogram(k)
    if h.bins.size != k.bins.size:
        raise ValueError(f"bin counts differ: {h.bins.size} vs {k.bins.size}")
    return h, k


def kl_divergence(h, k) -> float:
    """Kullback-Leibler divergence in bits, after renormalising both inputs.

    Asymmetric; raises if the first distribution has mass where the second
    has none (the divergence would be infinite).
    """
    h, k = _paired_bins(h, k)
    hp = h.distribution()
    kp = k.distribution()
    support = hp > 0
    if np.any(kp[support] == 0):
        raise ValueError("infinite divergence: first histogram has mass where the second is zero")
    val = float(np.sum(hp[support] * np.log2(hp[support] / kp[support])))
    return max(val, 0.0)


def jeffrey_divergence(h, k) -> float:
    """Symmetrised Kullback-Leibler against the bin-wise mean distribution.

    Finite even when either histogram has empty bins.
    """
    h, k = _paired_bins(h, k)
    hp = h.distribution()
    kp = k.distribution()
    m = 0.5 * (hp + kp)
    total = 0.0
    hs = hp > 0
    ks = kp > 0
    total += float(np.sum(hp[hs] * np.log2(hp[hs] / m[hs])))
    total += float(np.sum(kp[ks] * np.log2(kp[ks] / m[ks])))
    return max(total, 0.0)


def chi_square(h, k, literal: bool = False) -> float:
    """Chi-squared histogram statistic against the bin-wise means m_i.

    Default form: sum (h_i - m_i)^2 / m_i, which is symmetric and
    non-negative. ``literal=True`` computes sum (h_i - m_i) / h_i instead
    (sign-indefinite and asymmetric; terms with h_i = 0 are skipped); it is
    kept only for fidelity with the source formulation.
    """
    h, k = _paired_bins(h, k)
    hb = h.bins
    kb = k.bins
    m = 0.5 * (hb + kb)
    if literal:
        live = hb > 0
        return float(np.sum((hb[live] - m[live]) / hb[live]))
    live = m > 0
    return float(np.sum((hb[live] - m[live]) ** 2 / m[live]))


def deflate_size(data: bytes, level: int = 9) -> int:
    """Compressed size of ``data`` under a deterministic DEFLATE codec."""
    return len(zlib.compress(data, level))


def ncd(x: bytes, y: bytes, compressor=None, denominator: str = "min") -> float:
    """Normalised compression distance between two byte sequences.

    (C(xy) - min(C(x), C(y))) / denom where C is the compressed size.
    ``denominator`` selects ``"min"`` (default) or ``"max"`` of C(x), C(y).
    The result is clipped to be non-negative.
    """
    if not x or not y:
        raise ValueError("ncd inputs must be non-empty byte sequences")
    if denominator not in ("min", "max"):
        raise ValueError("denominator must be 'min' or 'max'")
    size = compressor if compressor is not None else deflate_size
    try:
        cx = int(size(bytes(x)))
        cy = int(size(bytes(y)))
        cxy = int(size(bytes(x) + bytes(y)))
    except Exception as exc:
        raise RuntimeError(f"compressor failed: {exc}") from exc
    if cx <= 0 or cy <= 0:
        raise RuntimeError("compressor reported a non-positive size")
    lo, hi = min(cx, cy), max(cx, cy)
    denom = lo if denominator == "min" else hi
    return max(0.0, (cxy - lo) / denom)
