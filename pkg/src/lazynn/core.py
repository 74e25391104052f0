"""Dataset model, CSV ingestion, min-max normalisation and fold planning.

Everything here is immutable after construction: datasets, normalizers and
fold plans can be shared freely across threads.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

NUMERIC = "numeric"
CATEGORICAL = "categorical"

_KINDS = (NUMERIC, CATEGORICAL)


@dataclass(frozen=True)
class FeatureSchema:
    """Ordered feature declaration plus the label column and feature weights."""

    features: tuple[tuple[str, str], ...]
    label_column: str
    weights: tuple[float, ...] = ()
    task: str = "classification"

    def __post_init__(self) -> None:
        if not self.features:
            raise ValueError("schema needs at least one feature")
        names = [name for name, _ in self.features]
        if len(set(names)) != len(names):
            raise ValueError("feature names must be unique")
        for name, kind in self.features:
            if kind not in _KINDS:
                raise ValueError(f"unknown feature kind {kind!r} for {name!r}")
        if self.label_column in names:
            raise ValueError("label column must not appear in the feature list")
        if not self.weights:
            object.__setattr__(self, "weights", (1.0,) * len(self.features))
        if len(self.weights) != len(self.features):
            raise ValueError("weights length must match the feature count")
        if any(w < 0 for w in self.weights):
            raise ValueError("feature weights must be non-negative")
        if self.task not in ("classification", "regression"):
            raise ValueError(f"unknown task {self.task!r}")

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.features)

    @property
    def kinds(self) -> tuple[str, ...]:
        return tuple(kind for _, kind in self.features)

    @property
    def numeric_positions(self) -> tuple[int, ...]:
        return tuple(i for i, (_, k) in enumerate(self.features) if k == NUMERIC)

    @property
    def categorical_positions(self) -> tuple[int, ...]:
        return tuple(i for i, (_, k) in enumerate(self.features) if k == CATEGORICAL)

    def subset(self, mask) -> "FeatureSchema":
        """Schema restricted to the features where ``mask`` is truthy."""
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != (len(self.features),):
            raise ValueError("mask length must match the feature count")
        if not mask.any():
            raise ValueError("cannot select an empty feature set")
        feats = tuple(f for f, keep in zip(self.features, mask) if keep)
        w = tuple(w for w, keep in zip(self.weights, mask) if keep)
        return FeatureSchema(feats, self.label_column, w, self.task)

    @classmethod
    def from_manifest(cls, manifest: dict) -> "FeatureSchema":
        """Build a schema from a sidecar manifest dictionary.

        Expected keys: ``features`` (list of ``{"name", "kind"}``), ``label``,
        optional ``weights`` (name -> weight) and optional ``task``.
        """
        try:
            feats = tuple((f["name"], f["kind"]) for f in manifest["features"])
            label = manifest["label"]
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed schema manifest: {exc}") from exc
        weight_map = manifest.get("weights") or {}
        unknown = set(weight_map) - {name for name, _ in feats}
        if unknown:
            raise ValueError(f"weights refer to unknown features: {sorted(unknown)}")
        weights = tuple(float(weight_map.get(name, 1.0)) for name, _ in feats)
        return cls(feats, label, weights, manifest.get("task", "classification"))


def load_schema(path) -> FeatureSchema:
    """Read a JSON schema manifest from disk."""
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"schema manifest not found: {p}")
    with open(p, encoding="utf-8") as fh:
        return FeatureSchema.from_manifest(json.load(fh))


def _freeze(arr: np.ndarray) -> np.ndarray:
    out = np.ascontiguousarray(arr)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class Dataset:
    """n samples over a feature schema, with class labels or real targets.

    Numeric values live in ``numeric`` (column order = schema numeric order),
    categorical values are interned into integer codes in ``categorical`` with
    the per-feature vocabulary kept in ``cat_values``.
    """

    schema: FeatureSchema
    numeric: np.ndarray
    categorical: np.ndarray
    cat_values: tuple[tuple[str, ...], ...]
    labels: np.ndarray | None = None
    label_names: tuple[str, ...] = ()
    targets: np.ndarray | None = None

    def __post_init__(self) -> None:
        num = np.asarray(self.numeric, dtype=np.float64)
        cat = np.asarray(self.categorical, dtype=np.int32)
        if num.ndim != 2 or cat.ndim != 2:
            raise ValueError("numeric and categorical blocks must be 2-D")
        n = num.shape[0] if num.shape[1] else cat.shape[0]
        if n < 1:
            raise ValueError("dataset must contain at least one sample")
        if num.shape != (n, len(self.schema.numeric_positions)):
            raise ValueError("numeric block shape does not match the schema")
        if cat.shape != (n, len(self.schema.categorical_positions)):
            raise ValueError("categorical block shape does not match the schema")
        if len(self.cat_values) != cat.shape[1]:
            raise ValueError("need one vocabulary per categorical feature")
        if self.labels is None and self.targets is None:
            raise ValueError("dataset needs labels or regression targets")
        object.__setattr__(self, "numeric", _freeze(num))
        object.__setattr__(self, "categorical", _freeze(cat))
        if self.labels is not None:
            lab = np.asarray(self.labels, dtype=np.int64)
            if lab.shape != (n,):
                raise ValueError("labels length must equal the sample count")
            if lab.size and (lab.min() < 0 or lab.max() >= len(self.label_names)):
                raise ValueError("label codes out of range of label_names")
            object.__setattr__(self, "labels", _freeze(lab))
        if self.targets is not None:
            tgt = np.asarray(self.targets, dtype=np.float64)
            if tgt.shape != (n,):
                raise ValueError("targets length must equal the sample count")
            object.__setattr__(self, "targets", _freeze(tgt))

    @property
    def n(self) -> int:
        block = self.numeric if self.numeric.shape[1] else self.categorical
        return block.shape[0]

    @property
    def n_classes(self) -> int:
        return len(self.label_names)

    def row(self, i: int) -> tuple:
        """Materialise sample ``i`` as a mixed tuple in schema feature order."""
        out: list = [None] * len(self.schema.features)
        for col, pos in enumerate(self.schema.numeric_positions):
            out[pos] = float(self.numeric[i, col])
        for col, pos in enumerate(self.schema.categorical_positions):
            out[pos] = self.cat_values[col][self.categorical[i, col]]
        return tuple(out)

    def subset(self, indices) -> "Dataset":
        """Dataset restricted to the given sample indices (order preserved)."""
        idx = np.asarray(indices, dtype=np.int64)
        return Dataset(
            schema=self.schema,
            numeric=self.numeric[idx],
            categorical=self.categorical[idx],
            cat_values=self.cat_values,
            labels=None if self.labels is None else self.labels[idx],
            label_names=self.label_names,
            targets=None if self.targets is None else self.targets[idx],
        )

    def select_features(self, mask) -> "Dataset":
        """Dataset restricted to the features where ``mask`` is truthy."""
        mask = np.asarray(mask, dtype=bool)
        sub = self.schema.subset(mask)
        num_keep = [c for c, pos in enumerate(self.schema.numeric_positions) if mask[pos]]
        cat_keep = [c for c, pos in enumerate(self.schema.categorical_positions) if mask[pos]]
        return Dataset(
            schema=sub,
            numeric=self.numeric[:, num_keep],
            categorical=self.categorical[:, cat_keep],
            cat_values=tuple(self.cat_values[c] for c in cat_keep),
            labels=self.labels,
            label_names=self.label_names,
            targets=self.targets,
        )


def load_csv(path, schema: FeatureSchema) -> Dataset:
    """Parse an RFC-4180 style CSV file against ``schema``.

    The header row must contain exactly the schema's feature columns plus the
    label column (any order). Numeric cells are parsed as reals, categorical
    values interned in first-appearance order. Rows keep file order.
    """
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"data file not found: {p}")
    with open(p, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ValueError(f"{p}: file is empty, expected a header row")
        expected = set(schema.names) | {schema.label_column}
        if len(set(header)) != len(header):
            raise ValueError(f"{p}: duplicate column names in header")
        if set(header) != expected:
            missing = sorted(expected - set(header))
            extra = sorted(set(header) - expected)
            raise ValueError(
                f"{p}: header does not match schema"
                f" (missing {missing}, unexpected {extra})"
            )
        col_of = {name: header.index(name) for name in header}
        num_pos = schema.numeric_positions
        cat_pos = schema.categorical_positions
        num_cols = [col_of[schema.names[i]] for i in num_pos]
        cat_cols = [col_of[schema.names[i]] for i in cat_pos]
        num_names = [schema.names[i] for i in num_pos]
        label_col = col_of[schema.label_column]

        numeric_rows: list[list[float]] = []
        cat_code_rows: list[list[int]] = []
        vocab: list[dict[str, int]] = [{} for _ in cat_cols]
        raw_labels: list = []
        for row_no, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise ValueError(f"{p}: row {row_no} has {len(row)} cells, expected {len(header)}")
            nums = []
            for name, col in zip(num_names, num_cols):
                cell = row[col].strip()
                if not cell:
                    raise ValueError(f"{p}: missing value at row {row_no}, column {name!r}")
                try:
                    nums.append(float(cell))
                except ValueError:
                    raise ValueError(
                        f"{p}: cannot parse {cell!r} as a number at row {row_no}, column {name!r}"
                    ) from None
            codes = []
            for j, col in enumerate(cat_cols):
                cell = row[col]
                if not cell.strip():
                    raise ValueError(
                        f"{p}: missing value at row {row_no}, column {schema.names[cat_pos[j]]!r}"
                    )
                codes.append(vocab[j].setdefault(cell, len(vocab[j])))
            numeric_rows.append(nums)
            cat_code_rows.append(codes)
            raw_labels.append(row[label_col])
    if not numeric_rows:
        raise ValueError(f"{p}: no data rows after the header")

    n = len(numeric_rows)
    numeric = np.asarray(numeric_rows, dtype=np.float64).reshape(n, len(num_cols))
    categorical = np.asarray(cat_code_rows, dtype=np.int32).reshape(n, len(cat_cols))
    cat_values = tuple(tuple(v) for v in (list(m) for m in vocab))

    labels = label_names = targets = None
    if schema.task == "regression":
        try:
            targets = np.asarray([float(v) for v in raw_labels], dtype=np.float64)
        except ValueError:
            raise ValueError(f"{p}: regression targets must be numeric") from None
        label_names = ()
    else:
        interned: dict[str, int] = {}
        labels = np.asarray([interned.setdefault(v, len(interned)) for v in raw_labels])
        label_names = tuple(interned)
    return Dataset(
        schema=schema,
        numeric=numeric,
        categorical=categorical,
        cat_values=cat_values,
        labels=labels,
        label_names=label_names or (),
        targets=targets,
    )


@dataclass(frozen=True)
class Normalizer:
    """Per numeric feature (min, max) fitted on training data.

    Maps v to (v - min) / (max - min). A constant feature (max == min) maps
    to 0 for every input, keeping it inert. Out-of-range query values are
    deliberately not clamped, so a value above the fitted max maps above 1.
    """

    mins: np.ndarray
    maxs: np.ndarray

    def __post_init__(self) -> None:
        mins = np.asarray(self.mins, dtype=np.float64)
        maxs = np.asarray(self.maxs, dtype=np.float64)
        if mins.shape != maxs.shape or mins.ndim != 1:
            raise ValueError("mins and maxs must be matching 1-D arrays")
        if np.any(maxs < mins):
            raise ValueError("max must be >= min for every feature")
        object.__setattr__(self, "mins", _freeze(mins))
        object.__setattr__(self, "maxs", _freeze(maxs))

    def transform_matrix(self, values: np.ndarray) -> np.ndarray:
        values = np.asarray(values, dtype=np.float64)
        if values.ndim == 1:
            return self.transform_matrix(values[None, :])[0]
        if values.shape[1] != self.mins.shape[0]:
            raise ValueError(
                f"row width {values.shape[1]} does not match the fitted"
                f" feature count {self.mins.shape[0]}"
            )
        span = self.maxs - self.mins
        out = np.zeros_like(values)
        live = span > 0
        out[:, live] = (values[:, live] - self.mins[live]) / span[live]
        return out

    def transform(self, data: Dataset) -> Dataset:
        return Dataset(
            schema=data.schema,
            numeric=self.transform_matrix(data.numeric),
            categorical=data.categorical,
            cat_values=data.cat_values,
            labels=data.labels,
            label_names=data.label_names,
            targets=data.targets,
        )


def fit_normalizer(data: Dataset) -> Normalizer:
    """Fit per-feature min/max on ``data`` (call on the training split only)."""
    num = data.numeric
    if num.shape[1] == 0:
        return Normalizer(np.zeros(0), np.zeros(0))
    return Normalizer(num.min(axis=0), num.max(axis=0))


@dataclass(frozen=True)
class FoldPlan:
    """Deterministic stratified assignment of samples to cross-validation folds."""

    k_folds: int
    assignments: np.ndarray
    seed: int

    def __post_init__(self) -> None:
        arr = np.asarray(self.assignments, dtype=np.int64)
        if arr.ndim != 1:
            raise ValueError("assignments must be a 1-D array")
        if self.k_folds < 2:
            raise ValueError("k_folds must be at least 2")
        if arr.size and (arr.min() < 0 or arr.max() >= self.k_folds):
            raise ValueError("fold ids out of range")
        object.__setattr__(self, "assignments", _freeze(arr))

    def test_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignments == fold)

    def train_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignments != fold)


def stratified_folds(data: Dataset, k_folds: int, seed: int) -> FoldPlan:
    """Assign samples to ``k_folds`` folds, keeping class proportions within
    one sample of the global proportions per fold. Identical inputs yield
    identical assignments."""
    if k_folds < 2:
        raise ValueError("k_folds must be at least 2")
    if data.labels is None:
        raise ValueError("stratified folds require class labels")
    labels = data.labels
    rng = np.random.default_rng(seed)
    assignments = np.empty(data.n, dtype=np.int64)
    offset = 0
    for class_id in range(data.n_classes):
        members = np.flatnonzero(labels == class_id)
        if members.size < k_folds:
            raise ValueError(
                f"class {data.label_names[class_id]!r} has {members.size} samples,"
                f" fewer than k_folds={k_folds}"
            )
        perm = rng.permutation(members)
        assignments[perm] = (np.arange(members.size) + offset) % k_folds
        offset = (offset + members.size) % k_folds
    return FoldPlan(k_folds=k_folds, assignments=assignments, seed=seed)
