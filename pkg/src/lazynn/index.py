"""Neighbour-search structures: brute force, kd-tree, ball tree, rp-forest.

The tree query paths are numba-compiled; builds are plain numpy. All built
indexes are immutable and safe for concurrent queries.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .metrics import MetricConfig

DEFAULT_LEAF_SIZE = 16


@dataclass(frozen=True)
class NeighbourList:
    """k (sample index, distance) pairs sorted by ascending distance."""

    indices: np.ndarray
    distances: np.ndarray

    def __post_init__(self) -> None:
        idx = np.asarray(self.indices, dtype=np.int64)
        dist = np.asarray(self.distances, dtype=np.float64)
        if idx.shape != dist.shape or idx.ndim != 1:
            raise ValueError("indices and distances must be matching 1-D arrays")
        if idx.size and np.any(np.diff(dist) < 0):
            raise ValueError("distances must be non-decreasing")
        if len(set(idx.tolist())) != idx.size:
            raise ValueError("neighbour indices must be distinct")
        idx.setflags(write=False)
        dist.setflags(write=False)
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "distances", dist)

    def __len__(self) -> int:
        return self.indices.size

    def __iter__(self):
        return iter(zip(self.indices.tolist(), self.distances.tolist()))


# ---------------------------------------------------------------------------
# compiled kernels
# ---------------------------------------------------------------------------

@njit(cache=True)
def _pdist(a, b, p):
    d = a.shape[0]
    if p == np.inf:
        m = 0.0
        for i in range(d):
            v = abs(a[i] - b[i])
            if v > m:
                m = v
        return m
    if p == 2.0:
        s = 0.0
        for i in range(d):
            v = a[i] - b[i]
            s += v * v
        return np.sqrt(s)
    if p == 1.0:
        s = 0.0
        for i in range(d):
            s += abs(a[i] - b[i])
        return s
    s = 0.0
    for i in range(d):
        s += abs(a[i] - b[i]) ** p
    return s ** (1.0 / p)


@njit(cache=True)
def _insert_topk(best_d, best_i, d, i):
    # ties keep the earlier (lower) index in front
    k = best_d.shape[0]
    if d >= best_d[k - 1]:
        return
    j = k - 1
    while j > 0 and best_d[j - 1] > d:
        best_d[j] = best_d[j - 1]
        best_i[j] = best_i[j - 1]
        j -= 1
    best_d[j] = d
    best_i[j] = i


@njit(cache=True)
def _brute_knn(data, q, k, p):
    best_d = np.full(k, np.inf)
    best_i = np.full(k, -1, dtype=np.int64)
    for i in range(data.shape[0]):
        _insert_topk(best_d, best_i, _pdist(data[i], q, p), i)
    return best_i, best_d


@njit(cache=True)
def _kd_knn(data, idxs, nfeat, nval, nleft, nright, nstart, nend, q, k, p):
    n_nodes = nfeat.shape[0]
    best_d = np.full(k, np.inf)
    best_i = np.full(k, -1, dtype=np.int64)
    stack_node = np.empty(n_nodes + 1, dtype=np.int64)
    stack_bound = np.empty(n_nodes + 1, dtype=np.float64)
    stack_node[0] = 0
    stack_bound[0] = 0.0
    sp = 1
    while sp > 0:
        sp -= 1
        node = stack_node[sp]
        bound = stack_bound[sp]
        if bound >= best_d[k - 1]:
            continue
        while nfeat[node] >= 0:
            f = nfeat[node]
            gap = q[f] - nval[node]
            if gap <= 0.0:
                near = nleft[node]
                far = nright[node]
                g = -gap
            else:
                near = nright[node]
                far = nleft[node]
                g = gap
            fb = bound if bound > g else g
            if fb < best_d[k - 1]:
                stack_node[sp] = far
                stack_bound[sp] = fb
                sp += 1
            node = near
        for t in range(nstart[node], nend[node]):
            i = idxs[t]
            _insert_topk(best_d, best_i, _pdist(data[i], q, p), i)
    return best_i, best_d


@njit(cache=True)
def _ball_knn(data, idxs, centres, radii, nleft, nright, nstart, nend, q, k, p):
    n_nodes = radii.shape[0]
    best_d = np.full(k, np.inf)
    best_i = np.full(k, -1, dtype=np.int64)
    stack_node = np.empty(n_nodes + 1, dtype=np.int64)
    stack_bound = np.empty(n_nodes + 1, dtype=np.float64)
    root_gap = _pdist(q, centres[0], p) - radii[0]
    stack_node[0] = 0
    stack_bound[0] = root_gap if root_gap > 0.0 else 0.0
    sp = 1
    while sp > 0:
        sp -= 1
        node = stack_node[sp]
        bound = stack_bound[sp]
        if bound >= best_d[k - 1]:
            continue
        pruned = False
        while nleft[node] >= 0:
            lc = nleft[node]
            rc = nright[node]
            bl = _pdist(q, centres[lc], p) - radii[lc]
            if bl < 0.0:
                bl = 0.0
            if bl < bound:
                bl = bound
            br = _pdist(q, centres[rc], p) - radii[rc]
            if br < 0.0:
                br = 0.0
            if br < bound:
                br = bound
            if bl <= br:
                near, nb, far, fb = lc, bl, rc, br
            else:
                near, nb, far, fb = rc, br, lc, bl
            if fb < best_d[k - 1]:
                stack_node[sp] = far
                stack_bound[sp] = fb
                sp += 1
            if nb >= best_d[k - 1]:
                pruned = True
                break
            node = near
            bound = nb
        if pruned:
            continue
        for t in range(nstart[node], nend[node]):
            i = idxs[t]
            _insert_topk(best_d, best_i, _pdist(data[i], q, p), i)
    return best_i, best_d


@njit(cache=True)
def _heap_push(keys, vals, size, key, val):
    i = size
    keys[i] = key
    vals[i] = val
    while i > 0:
        parent = (i - 1) // 2
        if keys[parent] <= keys[i]:
            break
        keys[parent], keys[i] = keys[i], keys[parent]
        vals[parent], vals[i] = vals[i], vals[parent]
        i = parent
    return size + 1


@njit(cache=True)
def _heap_pop(keys, vals, size):
    top_key = keys[0]
    top_val = vals[0]
    size -= 1
    keys[0] = keys[size]
    vals[0] = vals[size]
    i = 0
    while True:
        l = 2 * i + 1
        r = l + 1
        smallest = i
        if l < size and keys[l] < keys[smallest]:
            smallest = l
        if r < size and keys[r] < keys[smallest]:
            smallest = r
        if smallest == i:
            break
        keys[smallest], keys[i] = keys[i], keys[smallest]
        vals[smallest], vals[i] = vals[i], vals[smallest]
        i = smallest
    return top_key, top_val, size


@njit(cache=True)
def _rp_descend(dirs, offs, nleft, nright, q, node, heap_keys, heap_vals, heap_size):
    # walk to the leaf, queueing the margin to every far child on the way
    while nleft[node] >= 0:
        proj = 0.0
        for t in range(q.shape[0]):
            proj += dirs[node, t] * q[t]
        margin = proj - offs[node]
        if margin <= 0.0:
            near = nleft[node]
            far = nright[node]
            m = -margin
        else:
            near = nright[node]
            far = nleft[node]
            m = margin
        heap_size = _heap_push(heap_keys, heap_vals, heap_size, m, far)
        node = near
    return node, heap_size


@njit(cache=True)
def _rp_ann(data, idxs, dirs, offs, nleft, nright, nstart, nend, roots, q, k, budget, p):
    n = data.shape[0]
    n_nodes = offs.shape[0]
    seen = np.zeros(n, dtype=np.uint8)
    cand = np.empty(n, dtype=np.int64)
    n_cand = 0
    heap_keys = np.empty(n_nodes + 2, dtype=np.float64)
    heap_vals = np.empty(n_nodes + 2, dtype=np.int64)
    heap_size = 0
    for t in range(roots.shape[0]):
        leaf, heap_size = _rp_descend(dirs, offs, nleft, nright, q, roots[t], heap_keys, heap_vals, heap_size)
        for s in range(nstart[leaf], nend[leaf]):
            i = idxs[s]
            if seen[i] == 0:
                seen[i] = 1
                cand[n_cand] = i
                n_cand += 1
    while n_cand < budget and heap_size > 0:
        _, node, heap_size = _heap_pop(heap_keys, heap_vals, heap_size)
        leaf, heap_size = _rp_descend(dirs, offs, nleft, nright, q, node, heap_keys, heap_vals, heap_size)
        for s in range(nstart[leaf], nend[leaf]):
            i = idxs[s]
            if seen[i] == 0:
                seen[i] = 1
                cand[n_cand] = i
                n_cand += 1
    kk = min(k, n_cand)
    best_d = np.full(kk, np.inf)
    best_i = np.full(kk, -1, dtype=np.int64)
    for s in range(n_cand):
        i = cand[s]
        _insert_topk(best_d, best_i, _pdist(data[i], q, p), i)
    return best_i, best_d


def warm_kernels() -> None:
    """Force-compile the query kernels on a toy problem.

    Call before timing anything so JIT compilation never lands inside a
    measured section.
    """
    data = np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 0.5]])
    BruteForceIndex(data).query(np.array([0.1, 0.2]), 2)
    KdTree(data, leaf_size=1).query(np.array([0.1, 0.2]), 2)
    BallTree(data, leaf_size=1).query(np.array([0.1, 0.2]), 2)
    RpForest(data, n_trees=2, leaf_size=1, seed=0).query(np.array([0.1, 0.2]), 2, search_budget=3)


# ---------------------------------------------------------------------------
# index classes
# ---------------------------------------------------------------------------

def _as_matrix(data) -> np.ndarray:
    arr = np.ascontiguousarray(data, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] < 1:
        raise ValueError("index data must be a non-empty 2-D numeric matrix")
    if not np.all(np.isfinite(arr)):
        raise ValueError("index data must be finite")
    return arr


def _check_query(q, dim: int, k: int) -> np.ndarray:
    if k < 1:
        raise ValueError("k must be at least 1")
    q = np.ascontiguousarray(q, dtype=np.float64)
    if q.shape != (dim,):
        raise ValueError(f"query has dimension {q.shape}, index expects ({dim},)")
    return q


def _minkowski_p(metric: MetricConfig | None) -> float:
    metric = metric or MetricConfig()
    if metric.kind == "chebyshev":
        return np.inf
    if metric.kind == "minkowski":
        return float(metric.p)
    raise ValueError(f"tree indexes support minkowski-family metrics only, not {metric.kind!r}")


class BruteForceIndex:
    """Linear-scan index. Exact for every metric, including callables.

    ``metric`` may be a MetricConfig (minkowski family runs compiled;
    cosine / pearson / spearman run vectorised) or any ``f(q, row)``
    callable, in which case ``data`` may hold arbitrary objects (for
    example variable-length series).
    """

    def __init__(self, data, metric: MetricConfig | None = None):
        self._callable = callable(metric) and not isinstance(metric, MetricConfig)
        if self._callable:
            self._rows = list(data)
            if not self._rows:
                raise ValueError("index data must be non-empty")
            self._metric = metric
            self.n = len(self._rows)
            return
        self._metric = metric or MetricConfig()
        self._data = _as_matrix(data)
        self.n = self._data.shape[0]
        kind = self._metric.kind
        if kind in ("minkowski", "chebyshev"):
            self._p = _minkowski_p(self._metric)
        elif kind == "cosine":
            norms = np.linalg.norm(self._data, axis=1)
            if np.any(norms == 0):
                raise ValueError("cosine index rows must have non-zero norm")
            self._unit = self._data / norms[:, None]
        elif kind in ("pearson", "spearman"):
            rows = self._data
            if kind == "spearman":
                from .metrics import average_ranks

                rows = np.vstack([average_ranks(r) for r in rows])
            centred = rows - rows.mean(axis=1, keepdims=True)
            norms = np.linalg.norm(centred, axis=1)
            if np.any(norms == 0):
                raise ValueError("correlation index rows must be non-constant")
            self._unit = centred / norms[:, None]
            self._rank_rows = kind == "spearman"
        else:
            raise ValueError("heterogeneous search is provided by MixedBruteIndex")

    def query(self, q, k: int) -> NeighbourList:
        if self._callable:
            if k < 1:
                raise ValueError("k must be at least 1")
            dists = np.array([float(self._metric(q, row)) for row in self._rows])
            return _rank_all(dists, k)
        kind = self._metric.kind
        if kind in ("minkowski", "chebyshev"):
            q = _check_query(q, self._data.shape[1], k)
            kk = min(k, self.n)
            idx, dist = _brute_knn(self._data, q, kk, self._p)
            return NeighbourList(idx, dist)
        q = _check_query(q, self._data.shape[1], k)
        if kind == "cosine":
            nq = np.linalg.norm(q)
            if nq == 0:
                raise ValueError("cosine query must have non-zero norm")
            dists = 1.0 - self._unit @ (q / nq)
        else:
            if getattr(self, "_rank_rows", False):
                from .metrics import average_ranks

                q = average_ranks(q)
            qc = q - q.mean()
            nq = np.linalg.norm(qc)
            if nq == 0:
                raise ValueError("correlation query must be non-constant")
            dists = 1.0 - self._unit @ (qc / nq)
        return _rank_all(dists, k)


def _rank_all(dists: np.ndarray, k: int) -> NeighbourList:
    n = dists.size
    kk = min(k, n)
    order = np.lexsort((np.arange(n), dists))[:kk]
    return NeighbourList(order.astype(np.int64), dists[order])


class MixedBruteIndex:
    """Linear scan over mixed numeric + categorical rows.

    Distance is the weighted sum of absolute numeric gaps and 0/1
    categorical overlap.
    """

    def __init__(self, numeric, categorical, num_weights, cat_weights):
        self._num = np.ascontiguousarray(numeric, dtype=np.float64)
        self._cat = np.ascontiguousarray(categorical, dtype=np.int64)
        if self._num.shape[0] != self._cat.shape[0] or self._num.shape[0] < 1:
            raise ValueError("numeric and categorical blocks must share a non-zero row count")
        self._wn = np.asarray(num_weights, dtype=np.float64)
        self._wc = np.asarray(cat_weights, dtype=np.float64)
        if self._wn.shape != (self._num.shape[1],) or self._wc.shape != (self._cat.shape[1],):
            raise ValueError("need one weight per numeric and per categorical column")
        self.n = self._num.shape[0]

    def query(self, q_num, q_cat, k: int) -> NeighbourList:
        if k < 1:
            raise ValueError("k must be at least 1")
        q_num = np.asarray(q_num, dtype=np.float64)
        q_cat = np.asarray(q_cat, dtype=np.int64)
        if q_num.shape != (self._num.shape[1],) or q_cat.shape != (self._cat.shape[1],):
            raise ValueError("query blocks do not match the index schema")
        dists = np.abs(self._num - q_num) @ self._wn
        if self._cat.shape[1]:
            dists = dists + (self._cat != q_cat).astype(np.float64) @ self._wc
        return _rank_all(dists, k)


class KdTree:
    """Axis-aligned binary partition with bounded-backtracking exact search.

    At each internal node the feature with the largest variance is split at
    its lower median; samples with values at or below the split go left.
    Leaves hold up to ``leaf_size`` samples.
    """

    def __init__(self, data, leaf_size: int = DEFAULT_LEAF_SIZE, metric: MetricConfig | None = None):
        if leaf_size < 1:
            raise ValueError("leaf_size must be at least 1")
        self._data = _as_matrix(data)
        self._p = _minkowski_p(metric)
        self.leaf_size = leaf_size
        n = self._data.shape[0]
        self._idx = np.arange(n, dtype=np.int64)
        feat: list[int] = []
        val: list[float] = []
        left: list[int] = []
        right: list[int] = []
        start: list[int] = []
        end: list[int] = []

        def build(lo: int, hi: int) -> int:
            node = len(feat)
            feat.append(-1)
            val.append(0.0)
            left.append(-1)
            right.append(-1)
            start.append(lo)
            end.append(hi)
            count = hi - lo
            if count <= leaf_size:
                return node
            sub = self._data[self._idx[lo:hi]]
            spreads = sub.var(axis=0)
            f = int(np.argmax(spreads))
            if spreads[f] <= 0.0:
                return node  # every remaining sample is identical
            vals = sub[:, f]
            split = float(np.partition(vals, (count - 1) // 2)[(count - 1) // 2])
            mask = vals <= split
            n_left = int(mask.sum())
            if n_left == count:
                return node  # duplicates collapse the split; keep as leaf
            segment = self._idx[lo:hi]
            self._idx[lo:hi] = np.concatenate([segment[mask], segment[~mask]])
            feat[node] = f
            val[node] = split
            left[node] = build(lo, lo + n_left)
            right[node] = build(lo + n_left, hi)
            return node

        build(0, n)
        self._feat = np.asarray(feat, dtype=np.int64)
        self._val = np.asarray(val, dtype=np.float64)
        self._left = np.asarray(left, dtype=np.int64)
        self._right = np.asarray(right, dtype=np.int64)
        self._start = np.asarray(start, dtype=np.int64)
        self._end = np.asarray(end, dtype=np.int64)

    @property
    def n(self) -> int:
        return self._data.shape[0]

    @property
    def n_nodes(self) -> int:
        return self._feat.size

    def leaf_buckets(self) -> list[np.ndarray]:
        out = []
        for node in range(self.n_nodes):
            if self._feat[node] < 0:
                out.append(self._idx[self._start[node] : self._end[node]].copy())
        return out

    def leaf_for(self, q) -> np.ndarray:
        """Defeatist descent: the bucket of the leaf whose region contains q."""
        q = _check_query(q, self._data.shape[1], 1)
        node = 0
        while self._feat[node] >= 0:
            node = self._left[node] if q[self._feat[node]] <= self._val[node] else self._right[node]
        return self._idx[self._start[node] : self._end[node]].copy()

    def query(self, q, k: int) -> NeighbourList:
        q = _check_query(q, self._data.shape[1], k)
        kk = min(k, self.n)
        idx, dist = _kd_knn(
            self._data, self._idx, self._feat, self._val, self._left, self._right,
            self._start, self._end, q, kk, self._p,
        )
        return NeighbourList(idx, dist)

    def query_audit(self, q, k: int) -> tuple[NeighbourList, list[int]]:
        """Pure-python mirror of the compiled query that also reports every
        subtree pruned during backtracking. Used to audit pruning soundness."""
        from .metrics import chebyshev as _cheb, minkowski as _mink

        q = _check_query(q, self._data.shape[1], k)
        kk = min(k, self.n)
        dist_fn = (lambda a, b: _cheb(a, b)) if self._p == np.inf else (
            lambda a, b: _mink(a, b, self._p)
        )
        best: list[tuple[float, int]] = []
        pruned: list[int] = []

        def kth() -> float:
            return best[-1][0] if len(best) == kk else np.inf

        stack: list[tuple[int, float]] = [(0, 0.0)]
        while stack:
            node, bound = stack.pop()
            if bound >= kth():
                pruned.append(node)
                continue
            while self._feat[node] >= 0:
                f = self._feat[node]
                gap = float(q[f] - self._val[node])
                near, far = (
                    (self._left[node], self._right[node])
                    if gap <= 0
                    else (self._right[node], self._left[node])
                )
                fb = max(bound, abs(gap))
                if fb < kth():
                    stack.append((int(far), fb))
                else:
                    pruned.append(int(far))
                node = int(near)
            for i in self._idx[self._start[node] : self._end[node]]:
                d = dist_fn(self._data[i], q)
                if len(best) < kk or (d, int(i)) < best[-1]:
                    best.append((d, int(i)))
                    best.sort()
                    best = best[:kk]
        idx = np.array([i for _, i in best], dtype=np.int64)
        dist = np.array([d for d, _ in best])
        return NeighbourList(idx, dist), pruned

    def subtree_indices(self, node: int) -> np.ndarray:
        return self._idx[self._start[node] : self._end[node]].copy()


class BallTree:
    """Metric tree of nested bounding balls built top-down.

    Pivots approximate the farthest pair of the node (pick a random point,
    take the farthest point b from it, then the farthest c from b); samples
    go to the closer pivot. Requires a proper metric, since pruning relies
    on the triangle inequality.
    """

    def __init__(self, data, leaf_size: int = DEFAULT_LEAF_SIZE,
                 metric: MetricConfig | None = None, seed: int = 0):
        if leaf_size < 1:
            raise ValueError("leaf_size must be at least 1")
        metric = metric or MetricConfig()
        if not getattr(metric, "is_proper_metric", False):
            name = getattr(metric, "kind", type(metric).__name__)
            raise ValueError(
                f"ball tree needs a proper metric (triangle inequality); {name!r} is not one"
            )
        self._p = _minkowski_p(metric)
        self._data = _as_matrix(data)
        self.leaf_size = leaf_size
        n, dim = self._data.shape
        self._idx = np.arange(n, dtype=np.int64)
        rng = np.random.default_rng(seed)
        p = self._p

        def dist_to(point: np.ndarray, rows: np.ndarray) -> np.ndarray:
            diff = np.abs(self._data[rows] - point)
            if p == np.inf:
                return diff.max(axis=1)
            if p == 1.0:
                return diff.sum(axis=1)
            if p == 2.0:
                return np.sqrt((diff * diff).sum(axis=1))
            return (diff**p).sum(axis=1) ** (1.0 / p)

        centres: list[np.ndarray] = []
        radii: list[float] = []
        left: list[int] = []
        right: list[int] = []
        start: list[int] = []
        end: list[int] = []

        def build(lo: int, hi: int) -> int:
            node = len(radii)
            rows = self._idx[lo:hi]
            centre = self._data[rows].mean(axis=0)
            radius = float(dist_to(centre, rows).max())
            centres.append(centre)
            radii.append(radius)
            left.append(-1)
            right.append(-1)
            start.append(lo)
            end.append(hi)
            count = hi - lo
            if count <= leaf_size:
                return node
            a = rows[int(rng.integers(count))]
            b = rows[int(np.argmax(dist_to(self._data[a], rows)))]
            c = rows[int(np.argmax(dist_to(self._data[b], rows)))]
            db = dist_to(self._data[b], rows)
            dc = dist_to(self._data[c], rows)
            mask = db <= dc
            n_left = int(mask.sum())
            if n_left == count or n_left == 0:
                return node  # all points coincide with both pivots
            segment = self._idx[lo:hi]
            self._idx[lo:hi] = np.concatenate([segment[mask], segment[~mask]])
            left[node] = build(lo, lo + n_left)
            right[node] = build(lo + n_left, hi)
            return node

        build(0, n)
        self._centres = np.ascontiguousarray(np.vstack(centres))
        self._radii = np.asarray(radii, dtype=np.float64)
        self._left = np.asarray(left, dtype=np.int64)
        self._right = np.asarray(right, dtype=np.int64)
        self._start = np.asarray(start, dtype=np.int64)
        self._end = np.asarray(end, dtype=np.int64)

    @property
    def n(self) -> int:
        return self._data.shape[0]

    @property
    def n_nodes(self) -> int:
        return self._radii.size

    def node_members(self, node: int) -> np.ndarray:
        return self._idx[self._start[node] : self._end[node]].copy()

    def node_ball(self, node: int) -> tuple[np.ndarray, float]:
        return self._centres[node].copy(), float(self._radii[node])

    def children(self, node: int) -> tuple[int, int]:
        return int(self._left[node]), int(self._right[node])

    def query(self, q, k: int) -> NeighbourList:
        q = _check_query(q, self._data.shape[1], k)
        kk = min(k, self.n)
        idx, dist = _ball_knn(
            self._data, self._idx, self._centres, self._radii, self._left,
            self._right, self._start, self._end, q, kk, self._p,
        )
        return NeighbourList(idx, dist)


class RpForest:
    """Forest of random-projection trees for approximate neighbour search.

    Each internal node splits on the perpendicular bisector of two randomly
    chosen samples. Queries descend every tree to a leaf (defeatist search),
    then optionally widen the candidate set through a shared priority queue
    over split margins until ``search_budget`` candidates are gathered, and
    finally re-rank candidates by exact distance.
    """

    def __init__(self, data, n_trees: int, leaf_size: int = DEFAULT_LEAF_SIZE,
                 seed: int = 0, metric: MetricConfig | None = None):
        if n_trees < 1:
            raise ValueError("n_trees must be at least 1")
        if leaf_size < 1:
            raise ValueError("leaf_size must be at least 1")
        self._data = _as_matrix(data)
        self._p = _minkowski_p(metric)
        self.n_trees = n_trees
        self.leaf_size = leaf_size
        self.seed = seed
        n, dim = self._data.shape

        dirs: list[np.ndarray] = []
        offs: list[float] = []
        left: list[int] = []
        right: list[int] = []
        start: list[int] = []
        end: list[int] = []
        roots: list[int] = []
        idx_segments: list[np.ndarray] = []
        zero_dir = np.zeros(dim)

        for stream in np.random.SeedSequence(seed).spawn(n_trees):
            rng = np.random.default_rng(stream)
            tree_idx = np.arange(n, dtype=np.int64)
            base = sum(seg.size for seg in idx_segments)

            def build(lo: int, hi: int) -> int:
                node = len(offs)
                dirs.append(zero_dir)
                offs.append(0.0)
                left.append(-1)
                right.append(-1)
                start.append(base + lo)
                end.append(base + hi)
                count = hi - lo
                if count <= leaf_size:
                    return node
                rows = tree_idx[lo:hi]
                direction = None
                for _ in range(8):
                    a, b = rng.choice(count, size=2, replace=False)
                    cand = self._data[rows[b]] - self._data[rows[a]]
                    norm = float(np.linalg.norm(cand))
                    if norm > 1e-12:
                        direction = cand / norm
                        offset = float(direction @ (self._data[rows[a]] + self._data[rows[b]])) / 2.0
                        break
                if direction is None:
                    return node  # too many duplicate points to split
                proj = self._data[rows] @ direction
                mask = proj <= offset
                n_left = int(mask.sum())
                if n_left == 0 or n_left == count:
                    return node
                segment = tree_idx[lo:hi]
                tree_idx[lo:hi] = np.concatenate([segment[mask], segment[~mask]])
                dirs[node] = direction
                offs[node] = offset
                left[node] = build(lo, lo + n_left)
                right[node] = build(lo + n_left, hi)
                return node

            roots.append(build(0, n))
            idx_segments.append(tree_idx)

        self._idx = np.concatenate(idx_segments)
        self._dirs = np.ascontiguousarray(np.vstack(dirs))
        self._offs = np.asarray(offs, dtype=np.float64)
        self._left = np.asarray(left, dtype=np.int64)
        self._right = np.asarray(right, dtype=np.int64)
        self._start = np.asarray(start, dtype=np.int64)
        self._end = np.asarray(end, dtype=np.int64)
        self._roots = np.asarray(roots, dtype=np.int64)

    @property
    def n(self) -> int:
        return self._data.shape[0]

    def tree_leaf_assignment(self, tree: int) -> np.ndarray:
        """leaf-node id per sample for one tree (diagnostic)."""
        out = np.empty(self.n, dtype=np.int64)
        stack = [int(self._roots[tree])]
        while stack:
            node = stack.pop()
            if self._left[node] < 0:
                out[self._idx[self._start[node] : self._end[node]]] = node
            else:
                stack.append(int(self._left[node]))
                stack.append(int(self._right[node]))
        return out

    def query(self, q, k: int, search_budget: int = 0) -> NeighbourList:
        q = _check_query(q, self._data.shape[1], k)
        if search_budget < 0:
            raise ValueError("search_budget must be non-negative")
        idx, dist = _rp_ann(
            self._data, self._idx, self._dirs, self._offs, self._left,
            self._right, self._start, self._end, self._roots, q, k,
            search_budget, self._p,
        )
        return NeighbourList(idx, dist)


def knn_query(index, q, k: int) -> NeighbourList:
    """Exact k nearest neighbours from a brute, kd or ball index."""
    return index.query(q, k)


def ann_query(forest: RpForest, q, k: int, search_budget: int = 0) -> NeighbourList:
    """Approximate k nearest neighbours from a random-projection forest."""
    return forest.query(q, k, search_budget)
