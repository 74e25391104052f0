import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from lazynn.synth import gaussian_blobs, make_dataset


@pytest.fixture(scope="session")
def blob_dataset():
    """Two well-separated Gaussian blobs, 500 points, clean labels."""
    x, y, _ = gaussian_blobs(500, centers=((0.0, 0.0), (8.0, 0.0)), std=1.0, seed=11)
    return make_dataset(x, y)


@pytest.fixture(scope="session")
def noisy_blob_dataset():
    """1,000-point blobs with 10% of the labels flipped."""
    x, y, flipped = gaussian_blobs(1000, centers=((0.0, 0.0), (8.0, 0.0)),
                                   std=1.0, seed=23, flip=0.10)
    return make_dataset(x, y), flipped


def brute_knn_oracle(data: np.ndarray, q: np.ndarray, k: int, p: float = 2.0) -> np.ndarray:
    """Reference k-NN by full sort of explicitly computed distances."""
    gaps = np.abs(data - q)
    if p == np.inf:
        dists = gaps.max(axis=1)
    else:
        dists = (gaps**p).sum(axis=1) ** (1.0 / p)
    order = np.lexsort((np.arange(len(data)), dists))[:k]
    return dists[order]
