"""Structured-object distances: time-series alignment and signature transport."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, ClassVar

import numpy as np

_EPS = 1e-12


def as_series(values) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1 or arr.size < 1:
        raise ValueError("a time series must be a non-empty 1-D sequence")
    if not np.all(np.isfinite(arr)):
        raise ValueError("time series values must be finite")
    return arr


@dataclass(frozen=True)
class WarpPath:
    """Monotone alignment between two series as 0-based (i, j) index pairs.

    Starts at (0, 0), ends at (m-1, n-1), and every step advances i, j or
    both by one.
    """

    steps: tuple[tuple[int, int], ...]

    def __post_init__(self) -> None:
        if not self.steps:
            raise ValueError("a warp path cannot be empty")
        if self.steps[0] != (0, 0):
            raise ValueError("warp path must start at (0, 0)")
        for (i0, j0), (i1, j1) in zip(self.steps, self.steps[1:]):
            if (i1 - i0, j1 - j0) not in ((1, 0), (0, 1), (1, 1)):
                raise ValueError(f"illegal warp step {(i0, j0)} -> {(i1, j1)}")

    @property
    def length(self) -> int:
        return len(self.steps)


def dtw(q, x, band: int | None = None) -> tuple[float, WarpPath]:
    """Dynamic time warping distance and an optimal alignment path.

    The cost of a path is sqrt(sum of squared value differences along it);
    the returned distance is the minimum over all monotone alignments.
    ``band`` restricts the path to |i - j| <= band around the diagonal and
    must be at least |len(q) - len(x)| for a path to exist.

    Backtracking ties prefer the diagonal step, then advancing the second
    series, then the first, so the returned path is deterministic.
    """
    q = as_series(q)
    x = as_series(x)
    m, n = q.size, x.size
    if band is not None:
        if band < 0:
            raise ValueError("band must be non-negative")
        if band < abs(m - n):
            raise ValueError(
                f"band {band} is narrower than the length difference {abs(m - n)}: no feasible path"
            )
    acc = np.full((m, n), np.inf)
    for i in range(m):
        lo, hi = 0, n
        if band is not None:
            lo, hi = max(0, i - band), min(n, i + band + 1)
        qi = q[i]
        for j in range(lo, hi):
            cost = (qi - x[j]) ** 2
            if i == 0 and j == 0:
                acc[i, j] = cost
            elif i == 0:
                acc[i, j] = cost + acc[0, j - 1]
            elif j == 0:
                acc[i, j] = cost + acc[i - 1, 0]
            else:
                acc[i, j] = cost + min(acc[i - 1, j - 1], acc[i, j - 1], acc[i - 1, j])

    steps = [(m - 1, n - 1)]
    i, j = m - 1, n - 1
    while (i, j) != (0, 0):
        if i == 0:
            j -= 1
        elif j == 0:
            i -= 1
        else:
            diag, horiz, vert = acc[i - 1, j - 1], acc[i, j - 1], acc[i - 1, j]
            best = min(diag, horiz, vert)
            if diag == best:
                i, j = i - 1, j - 1
            elif horiz == best:
                j -= 1
            else:
                i -= 1
        steps.append((i, j))
    steps.reverse()
    return float(np.sqrt(max(acc[m - 1, n - 1], 0.0))), WarpPath(tuple(steps))


@dataclass(frozen=True)
class DtwDistance:
    """DTW wrapped as a pairwise callable for neighbour search over series.

    Not a proper metric: identical distance zero does not imply equal series
    and the triangle inequality can fail, so metric-tree indexes refuse it.
    """

    band: int | None = None
    is_proper_metric: ClassVar[bool] = False

    def __call__(self, q, x) -> float:
        return dtw(q, x, self.band)[0]


@dataclass(frozen=True)
class Signature:
    """A weighted set of cluster modes generalising a histogram."""

    modes: np.ndarray
    weights: np.ndarray

    def __post_init__(self) -> None:
        modes = np.atleast_2d(np.asarray(self.modes, dtype=np.float64))
        weights = np.asarray(self.weights, dtype=np.float64).ravel()
        if modes.shape[0] != weights.size or weights.size < 1:
            raise ValueError("need one weight per cluster mode")
        if not (np.all(np.isfinite(modes)) and np.all(np.isfinite(weights))):
            raise ValueError("signature values must be finite")
        if np.any(weights <= 0):
            raise ValueError("cluster weights must be strictly positive")
        modes = modes.copy()
        weights = weights.copy()
        modes.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "modes", modes)
        object.__setattr__(self, "weights", weights)

    @property
    def size(self) -> int:
        return self.weights.size

    @property
    def dim(self) -> int:
        return self.modes.shape[1]

    @property
    def total_weight(self) -> float:
        return float(self.weights.sum())

    @classmethod
    def from_pairs(cls, pairs) -> "Signature":
        """Build from an iterable of (mode vector, weight) pairs."""
        modes = [np.atleast_1d(np.asarray(m, dtype=np.float64)) for m, _ in pairs]
        weights = [float(w) for _, w in pairs]
        return cls(np.vstack(modes), np.asarray(weights))


@dataclass(frozen=True)
class FlowMatrix:
    """Mass moved between source cluster j and sink cluster k."""

    flows: np.ndarray

    def __post_init__(self) -> None:
        flows = np.asarray(self.flows, dtype=np.float64)
        if flows.ndim != 2:
            raise ValueError("flows must be a 2-D matrix")
        if np.any(flows < -_EPS):
            raise ValueError("flows must be non-negative")
        flows = np.maximum(flows, 0.0)
        flows.setflags(write=False)
        object.__setattr__(self, "flows", flows)

    @property
    def total(self) -> float:
        return float(self.flows.sum())


def euclidean_ground(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.linalg.norm(np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64)))


def _min_cost_transport(cost: np.ndarray, supply: np.ndarray, demand: np.ndarray) -> np.ndarray:
    """Exact min-cost flow on the bipartite transportation graph.

    Successive shortest augmenting paths with node potentials (Dijkstra on
    reduced costs). Moves min(total supply, total demand) units of mass.
    """
    ns, nd = cost.shape
    n_nodes = ns + nd + 2
    src = ns + nd
    snk = ns + nd + 1
    target = min(supply.sum(), demand.sum())
    scale = max(target, 1.0)

    flow = np.zeros((ns, nd))
    used_supply = np.zeros(ns)
    used_demand = np.zeros(nd)
    potential = np.zeros(n_nodes)
    moved = 0.0
    max_rounds = 4 * (ns + 1) * (nd + 1) + 16

    for _ in range(max_rounds):
        if moved >= target - _EPS * scale:
            break
        # Dijkstra over the residual graph with reduced costs
        dist = np.full(n_nodes, np.inf)
        parent = np.full(n_nodes, -1, dtype=np.int64)
        done = np.zeros(n_nodes, dtype=bool)
        dist[src] = 0.0
        while True:
            u = -1
            best = np.inf
            for v in range(n_nodes):
                if not done[v] and dist[v] < best:
                    best = dist[v]
                    u = v
            if u < 0:
                break
            done[u] = True
            if u == src:
                for j in range(ns):
                    if supply[j] - used_supply[j] > _EPS * scale:
                        nd_cost = dist[u] + 0.0 + potential[u] - potential[j]
                        if nd_cost < dist[j] - 1e-15:
                            dist[j] = nd_cost
                            parent[j] = u
            elif u < ns:
                j = u
                for k in range(nd):
                    node = ns + k
                    rc = dist[u] + cost[j, k] + potential[u] - potential[node]
                    if rc < dist[node] - 1e-15:
                        dist[node] = rc
                        parent[node] = u
                if used_supply[j] > _EPS * scale:  # residual arc back to source
                    rc = dist[u] + 0.0 + potential[u] - potential[src]
                    if rc < dist[src] - 1e-15:
                        dist[src] = rc
                        parent[src] = u
            elif u < ns + nd:
                k = u - ns
                if demand[k] - used_demand[k] > _EPS * scale:
                    rc = dist[u] + 0.0 + potential[u] - potential[snk]
                    if rc < dist[snk] - 1e-15:
                        dist[snk] = rc
                        parent[snk] = u
                for j in range(ns):
                    if flow[j, k] > _EPS * scale:  # residual arc back to source j
                        rc = dist[u] - cost[j, k] + potential[u] - potential[j]
                        if rc < dist[j] - 1e-15:
                            dist[j] = rc
                            parent[j] = u
        if not np.isfinite(dist[snk]):
            break
        finite = np.isfinite(dist)
        potential[finite] += dist[finite]

        # walk the path backwards to find the bottleneck
        path = []
        v = snk
        while v != src:
            u = parent[v]
            path.append((u, v))
            v = u
        path.reverse()
        push = target - moved
        for u, v in path:
            if u == src:
                push = min(push, supply[v] - used_supply[v])
            elif v == snk:
                push = min(push, demand[u - ns] - used_demand[u - ns])
            elif u < ns:  # forward arc has unlimited capacity
                continue
            else:  # residual of a forward arc
                push = min(push, flow[v, u - ns])
        if push <= _EPS * scale:
            break
        for u, v in path:
            if u == src:
                used_supply[v] += push
            elif v == snk:
                used_demand[u - ns] += push
            elif u < ns:
                flow[u, v - ns] += push
            else:
                flow[v, u - ns] -= push
        moved += push
    else:
        raise RuntimeError("transportation solve did not converge")
    return flow


def emd(
    s: Signature,
    q: Signature,
    ground: Callable[[np.ndarray, np.ndarray], float] | None = None,
) -> tuple[float, FlowMatrix]:
    """Earth mover distance between two signatures.

    Solves the transportation problem exactly, then divides the optimal work
    by the total mass moved, which is min of the two total weights (partial
    matching when the totals differ). Returns the distance and the optimal
    flow matrix.
    """
    if not isinstance(s, Signature) or not isinstance(q, Signature):
        raise TypeError("emd expects Signature inputs")
    if s.dim != q.dim:
        raise ValueError(f"mode dimensionality differs: {s.dim} vs {q.dim}")
    metric = ground if ground is not None else euclidean_ground
    cost = np.empty((s.size, q.size))
    for j in range(s.size):
        for k in range(q.size):
            d = float(metric(s.modes[j], q.modes[k]))
            if d < 0:
                raise ValueError("ground metric returned a negative distance")
            cost[j, k] = d
    flow = _min_cost_transport(cost, s.weights.copy(), q.weights.copy())
    total = flow.sum()
    if total <= 0:
        raise RuntimeError("transportation solve moved no mass")
    work = float((cost * flow).sum())
    return work / total, FlowMatrix(flow)
