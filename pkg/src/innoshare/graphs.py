"""Communication topologies and doubly stochastic consensus weights."""

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class DirectedGraph:
    """Directed communication graph with mandatory self-loops.

    out_neighbors[i] is the sorted tuple of nodes that receive messages
    from i; in_neighbors is the derived inverse map. Every node must be
    its own in- and out-neighbor.
    """

    n: int
    out_neighbors: dict
    in_neighbors: dict = field(init=False)

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("graph needs at least one node")
        if set(self.out_neighbors) != set(range(self.n)):
            raise ValueError("out_neighbors must have one entry per node id 0..n-1")
        cleaned = {}
        inn = {i: [] for i in range(self.n)}
        for i in range(self.n):
            nbrs = sorted(set(self.out_neighbors[i]))
            if any(j < 0 or j >= self.n for j in nbrs):
                raise ValueError(f"node {i} has an out-neighbor outside 0..n-1")
            if i not in nbrs:
                raise ValueError(f"node {i} is missing its self-loop")
            cleaned[i] = tuple(nbrs)
            for j in nbrs:
                inn[j].append(i)
        object.__setattr__(self, "out_neighbors", cleaned)
        object.__setattr__(self, "in_neighbors", {i: tuple(sorted(v)) for i, v in inn.items()})

    def has_edge(self, i, j):
        """True if i sends to j."""
        return j in self.out_neighbors[i]

    def edges(self):
        """Sorted list of directed edges (i, j), self-loops included."""
        return [(i, j) for i in range(self.n) for j in self.out_neighbors[i]]

    def is_symmetric(self):
        """True if i->j implies j->i for every edge."""
        return all(i in self.out_neighbors[j] for i, j in self.edges())


@dataclass(frozen=True)
class WeightMatrix:
    """Doubly stochastic consensus weights supported on a graph's edges."""

    w: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.w, dtype=float)
        object.__setattr__(self, "w", w)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise ValueError("weight matrix must be square")
        if np.any(w < -1e-15) or np.any(w > 1 + 1e-15):
            raise ValueError("weights must lie in [0, 1]")
        if np.max(np.abs(w.sum(axis=1) - 1.0)) > 1e-12:
            raise ValueError("rows must sum to 1 within 1e-12")
        if np.max(np.abs(w.sum(axis=0) - 1.0)) > 1e-12:
            raise ValueError("columns must sum to 1 within 1e-12")

    @property
    def n(self):
        return self.w.shape[0]


def generate_random_strongly_connected(n, extra_edge_prob, seed):
    """Random symmetric graph: ring backbone + extra edges + self-loops.

    The undirected ring guarantees strong connectivity; each remaining
    unordered pair becomes a bidirectional edge with probability
    extra_edge_prob. Deterministic for fixed (n, extra_edge_prob, seed).
    """
    if n < 2:
        raise ValueError("need at least 2 nodes")
    if not 0.0 <= extra_edge_prob <= 1.0:
        raise ValueError("extra_edge_prob must be in [0, 1]")
    rng = np.random.default_rng(seed)
    nbrs = {i: {i, (i - 1) % n, (i + 1) % n} for i in range(n)}
    for i in range(n):
        for j in range(i + 1, n):
            if j == (i + 1) % n or (i == 0 and j == n - 1):
                continue  # ring edge already present
            if rng.random() < extra_edge_prob:
                nbrs[i].add(j)
                nbrs[j].add(i)
    return DirectedGraph(n, {i: tuple(sorted(v)) for i, v in nbrs.items()})


def is_strongly_connected(g):
    """True iff every node reaches every other along directed edges.

    Two-pass reachability from node 0: forward along out-edges and
    backward along in-edges; both covering all nodes is equivalent to
    strong connectivity.
    """

    def reach(start, nbr_map):
        seen = {start}
        frontier = [start]
        while frontier:
            nxt = []
            for u in frontier:
                for v in nbr_map[u]:
                    if v not in seen:
                        seen.add(v)
                        nxt.append(v)
            frontier = nxt
        return seen

    if g.n == 1:
        return True
    return (len(reach(0, g.out_neighbors)) == g.n
            and len(reach(0, g.in_neighbors)) == g.n)


def metropolis_weights(g):
    """Metropolis weights: w_ij = 1/(1+max(deg_i, deg_j)) on edges, rest on the diagonal.

    Requires a symmetric edge set (mutual neighbors), which makes the
    result doubly stochastic by construction.
    """
    if not g.is_symmetric():
        raise ValueError("Metropolis weights need a symmetric edge set")
    deg = [len(g.out_neighbors[i]) - 1 for i in range(g.n)]  # self-loop excluded
    w = np.zeros((g.n, g.n))
    for i in range(g.n):
        for j in g.out_neighbors[i]:
            if j != i:
                w[i, j] = 1.0 / (1.0 + max(deg[i], deg[j]))
        w[i, i] = 1.0 - w[i].sum()
    return WeightMatrix(w)
