"""Synthetic dataset generators standing in for external benchmark data."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .core import Dataset, FeatureSchema


def uniform_points(n: int, d: int, seed: int = 0) -> np.ndarray:
    """n points drawn uniformly from the d-dimensional unit box."""
    return np.random.default_rng(seed).random((n, d))


def labeled_uniform(n: int, d: int, seed: int = 0, classes: int = 2) -> tuple[np.ndarray, np.ndarray]:
    """Uniform points with arbitrary class labels (for timing benchmarks)."""
    rng = np.random.default_rng(seed)
    x = rng.random((n, d))
    y = rng.integers(classes, size=n)
    return x, y


def gaussian_blobs(n: int, centers=((0.0, 0.0), (6.0, 0.0)), std: float = 1.0,
                   seed: int = 0, flip: float = 0.0) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Isotropic Gaussian class blobs, optionally with a fraction of labels
    flipped to another class. Returns (points, labels, flipped indices)."""
    centers = np.asarray(centers, dtype=np.float64)
    n_classes = centers.shape[0]
    rng = np.random.default_rng(seed)
    counts = [n // n_classes] * n_classes
    for i in range(n - sum(counts)):
        counts[i] += 1
    xs, ys = [], []
    for c, count in enumerate(counts):
        xs.append(centers[c] + std * rng.standard_normal((count, centers.shape[1])))
        ys.append(np.full(count, c))
    x = np.vstack(xs)
    y = np.concatenate(ys).astype(np.int64)
    perm = rng.permutation(n)
    x, y = x[perm], y[perm]
    flipped = np.array([], dtype=np.int64)
    if flip > 0.0:
        n_flip = int(round(flip * n))
        flipped = rng.choice(n, size=n_flip, replace=False)
        y[flipped] = (y[flipped] + 1 + rng.integers(n_classes - 1, size=n_flip)) % n_classes
    return x, y, np.sort(flipped)


def make_dataset(x: np.ndarray, y=None, targets=None, feature_prefix: str = "f") -> Dataset:
    """Wrap a numeric matrix (and labels or targets) as a Dataset."""
    x = np.asarray(x, dtype=np.float64)
    names = tuple((f"{feature_prefix}{i}", "numeric") for i in range(x.shape[1]))
    task = "regression" if targets is not None else "classification"
    schema = FeatureSchema(names, "label", task=task)
    labels = label_names = None
    if y is not None:
        y = np.asarray(y, dtype=np.int64)
        label_names = tuple(f"c{c}" for c in range(int(y.max()) + 1))
        labels = y
    return Dataset(
        schema=schema,
        numeric=x,
        categorical=np.zeros((x.shape[0], 0), dtype=np.int32),
        cat_values=(),
        labels=labels,
        label_names=label_names or (),
        targets=None if targets is None else np.asarray(targets, dtype=np.float64),
    )


def write_csv_dataset(x: np.ndarray, y: np.ndarray, data_path, schema_path) -> None:
    """Write a numeric dataset plus its sidecar schema manifest to disk."""
    x = np.asarray(x, dtype=np.float64)
    names = [f"f{i}" for i in range(x.shape[1])]
    with open(data_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(names + ["label"])
        for row, label in zip(x, y):
            writer.writerow([repr(float(v)) for v in row] + [f"c{int(label)}"])
    manifest = {
        "features": [{"name": n, "kind": "numeric"} for n in names],
        "label": "label",
    }
    with open(schema_path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)
