"""Graph construction and the primitives every estimator runs on.

Nodes are ids 0..n-1. Edges are stored as oriented pairs (e+, e-) with
e+ < e-; the incidence row of edge e maps a node signal theta to
theta[e+] - theta[e-]. All operations are pure; Graph instances are
treated as immutable after construction and cache derived structure.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components, depth_first_order

from .validation import as_signal


@dataclass(frozen=True, eq=False)
class Graph:
    """Undirected graph with a fixed edge orientation (e+ < e-).

    Parameters
    ----------
    n : int
        Node count; nodes are the ids 0..n-1.
    edges : np.ndarray, shape (m, 2)
        Oriented edge endpoints, each row (e+, e-) with e+ < e-.
    kind : str or None
        Constructor tag ("chain", "grid", "knn") used to pick fast solver
        paths; None for generic edge lists.
    meta : dict
        Constructor-specific details (grid side/dim, knn k).
    coords : np.ndarray or None
        Node coordinates when the graph was built from points.
    """

    n: int
    edges: np.ndarray
    kind: str | None = field(default=None, compare=False)
    meta: dict = field(default_factory=dict, compare=False)
    coords: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"node count must be >= 1, got {self.n}")
        edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        object.__setattr__(self, "edges", edges)
        if edges.size:
            if edges.min() < 0 or edges.max() >= self.n:
                raise ValueError("edge endpoint out of range")
            if np.any(edges[:, 0] == edges[:, 1]):
                raise ValueError("self-loops are not allowed")
            if np.any(edges[:, 0] > edges[:, 1]):
                raise ValueError("edges must be oriented with e+ < e-")
            uniq = np.unique(edges, axis=0)
            if uniq.shape[0] != edges.shape[0]:
                raise ValueError("duplicate edges are not allowed")

    @property
    def n_edges(self) -> int:
        return self.edges.shape[0]

    @cached_property
    def adjacency(self) -> sp.csr_matrix:
        """Symmetric 0/1 adjacency with sorted indices."""
        m = self.n_edges
        if m == 0:
            return sp.csr_matrix((self.n, self.n))
        r = np.concatenate([self.edges[:, 0], self.edges[:, 1]])
        c = np.concatenate([self.edges[:, 1], self.edges[:, 0]])
        a = sp.csr_matrix((np.ones(2 * m), (r, c)), shape=(self.n, self.n))
        a.sort_indices()
        return a

    @cached_property
    def laplacian(self) -> sp.csr_matrix:
        ep, em = self.edges[:, 0], self.edges[:, 1]
        m = self.n_edges
        ones = np.ones(m)
        rows = np.concatenate([ep, em, ep, em])
        cols = np.concatenate([ep, em, em, ep])
        vals = np.concatenate([ones, ones, -ones, -ones])
        return sp.csr_matrix((vals, (rows, cols)), shape=(self.n, self.n))

    @cached_property
    def _components(self) -> tuple[int, np.ndarray]:
        count, labels = connected_components(self.adjacency, directed=False)
        return int(count), labels

    @property
    def n_components(self) -> int:
        return self._components[0]

    def is_connected(self) -> bool:
        return self.n_components == 1


@dataclass(frozen=True, eq=False)
class DfsOrder:
    """Depth-first visit order with the seed that chose the start node."""

    sigma: np.ndarray
    start: int
    seed: object

    def __post_init__(self):
        sigma = np.asarray(self.sigma, dtype=np.int64)
        object.__setattr__(self, "sigma", sigma)
        if sigma.size and sigma[0] != self.start:
            raise ValueError("sigma[0] must equal the start node")


def build_chain(n: int) -> Graph:
    """Chain graph: edges (i, i+1) for i = 0..n-2."""
    n = int(n)
    if n < 1:
        raise ValueError(f"chain needs n >= 1 nodes, got {n}")
    ids = np.arange(n - 1, dtype=np.int64)
    edges = np.stack([ids, ids + 1], axis=1)
    return Graph(n=n, edges=edges, kind="chain")


def build_grid(m: int, d: int = 2) -> Graph:
    """d-dimensional lattice {1..m}^d, nodes in row-major order.

    Lattice points at l1-distance 1 are connected; the edge list is laid
    out axis block by axis block (axis 0 first), each block in row-major
    order of its source point. Edge count is d * m**(d-1) * (m-1).
    """
    m, d = int(m), int(d)
    if m < 1 or d < 1:
        raise ValueError(f"grid needs m >= 1 and d >= 1, got m={m}, d={d}")
    n = m**d
    if n > 2**31:
        raise ValueError(f"grid size m**d = {n} exceeds addressable limit")
    ids = np.arange(n, dtype=np.int64).reshape((m,) * d)
    blocks = []
    for axis in range(d):
        lo = np.moveaxis(ids, axis, 0)[:-1]
        hi = np.moveaxis(ids, axis, 0)[1:]
        blocks.append(np.stack([lo.ravel(), hi.ravel()], axis=1))
    edges = np.concatenate(blocks) if blocks else np.empty((0, 2), np.int64)
    return Graph(n=n, edges=edges, kind="grid", meta={"m": m, "d": d})


# working-set budget (entries) for the blocked pairwise-distance scan
_KNN_BLOCK = 1 << 22


def build_knn_graph(points, k: int) -> Graph:
    """Symmetrized-union K-NN graph under the Euclidean metric.

    Edge (i, j) is present iff j is among the k nearest neighbors of i or
    vice versa. Distance ties are broken toward the smaller node id, so
    the construction is deterministic even with duplicate points.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.ndim != 2:
        raise ValueError("points must be an (n, d) array")
    if not np.all(np.isfinite(pts)):
        raise ValueError("coordinates must be finite")
    n = pts.shape[0]
    k = int(k)
    if not 1 <= k < n:
        raise ValueError(f"k must satisfy 1 <= k < n, got k={k}, n={n}")

    pairs = []
    block = max(1, _KNN_BLOCK // max(n, 1))
    for s in range(0, n, block):
        e = min(n, s + block)
        # exact per-coordinate differences keep ties (and duplicates) exact
        dist = np.zeros((e - s, n))
        for a in range(pts.shape[1]):
            dist += (pts[s:e, a, None] - pts[None, :, a]) ** 2
        dist[np.arange(e - s), np.arange(s, e)] = np.inf
        kth = np.partition(dist, k - 1, axis=1)[:, k - 1]
        for r in range(e - s):
            row = dist[r]
            take = np.nonzero(row < kth[r])[0]
            if take.size < k:
                ties = np.nonzero(row == kth[r])[0]
                take = np.concatenate([take, ties[: k - take.size]])
            i = s + r
            lo = np.minimum(i, take)
            hi = np.maximum(i, take)
            pairs.append(np.stack([lo, hi], axis=1))
    edges = np.unique(np.concatenate(pairs), axis=0)
    return Graph(n=n, edges=edges, kind="knn", meta={"k": k}, coords=pts)


def incidence_apply(g: Graph, theta) -> np.ndarray:
    """Edge differences theta[e+] - theta[e-] under the stored orientation."""
    theta = as_signal(theta, g.n, "theta")
    if g.n_edges == 0:
        return np.empty(0)
    return theta[g.edges[:, 0]] - theta[g.edges[:, 1]]


def incidence_adjoint(g: Graph, w) -> np.ndarray:
    """Adjoint action: node divergence of an edge vector."""
    w = as_signal(w, g.n_edges, "edge vector")
    out = np.bincount(g.edges[:, 0], weights=w, minlength=g.n)
    out -= np.bincount(g.edges[:, 1], weights=w, minlength=g.n)
    return out


def total_variation(g: Graph, theta) -> float:
    """Sum of |theta[e+] - theta[e-]| over the edge set."""
    return float(np.abs(incidence_apply(g, theta)).sum())


def dfs_order(g: Graph, seed=None) -> DfsOrder:
    """Depth-first visit order from a uniformly drawn start node.

    Neighbors are expanded in ascending node id, which makes the order a
    deterministic function of (graph, seed). Requires a connected graph:
    the order must cover every node.
    """
    if not g.is_connected():
        raise ValueError("dfs_order requires a connected graph")
    rng = np.random.default_rng(seed)
    start = int(rng.integers(g.n))
    return _dfs_from(g, start, seed)


def _dfs_from(g: Graph, start: int, seed=None) -> DfsOrder:
    if g.n == 1:
        return DfsOrder(sigma=np.zeros(1, np.int64), start=0, seed=seed)
    order = depth_first_order(g.adjacency, start, directed=False,
                              return_predecessors=False)
    if order.shape[0] != g.n:
        raise ValueError("dfs_order requires a connected graph")
    return DfsOrder(sigma=order.astype(np.int64), start=start, seed=seed)


def level_components(g: Graph, theta, tol: float) -> tuple[int, np.ndarray]:
    """Connected components after removing edges with |difference| > tol."""
    theta = as_signal(theta, g.n, "theta")
    if tol < 0:
        raise ValueError(f"tol must be nonnegative, got {tol}")
    if g.n_edges == 0:
        return g.n, np.arange(g.n, dtype=np.int64)
    diffs = np.abs(theta[g.edges[:, 0]] - theta[g.edges[:, 1]])
    kept = g.edges[diffs <= tol]
    if kept.shape[0] == 0:
        return g.n, np.arange(g.n, dtype=np.int64)
    a = sp.csr_matrix(
        (np.ones(kept.shape[0]), (kept[:, 0], kept[:, 1])), shape=(g.n, g.n)
    )
    count, labels = connected_components(a, directed=False)
    return int(count), labels
