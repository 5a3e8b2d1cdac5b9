"""Directed communication graphs and column-stochastic mixing weights.

Agents communicate over a fixed digraph with an implicit self-loop at every
node.  The base mixing matrix assigns each sender a uniform share `1/outdeg`
of its mass to every out-neighbor (itself included), which makes every column
sum to one without any coordination beyond knowing one's own out-degree.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class GraphError(ValueError):
    """Raised when a graph does not meet an operation's requirements."""


@dataclass(frozen=True)
class Digraph:
    """Fixed directed graph on nodes ``0..n-1``.

    ``edges`` holds ordered pairs ``(j, i)`` meaning node ``j`` can send to
    node ``i``.  Self-loops are implicit: every node is always its own
    in-neighbor and is never stored in ``edges``.
    """

    n: int
    edges: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        if self.n < 1:
            raise GraphError(f"need at least one node, got n={self.n}")
        object.__setattr__(self, "edges", frozenset(self.edges))
        for j, i in self.edges:
            if not (0 <= j < self.n and 0 <= i < self.n):
                raise GraphError(f"edge ({j},{i}) out of range for n={self.n}")
            if j == i:
                raise GraphError("self-loops are implicit; do not list them")

    def in_neighbors(self, i):
        """In-neighbor set of ``i``, including ``i`` itself."""
        return {j for j, k in self.edges if k == i} | {i}

    def out_neighbors(self, j):
        """Out-neighbor set of ``j``, including ``j`` itself."""
        return {i for k, i in self.edges if k == j} | {j}

    def out_degree(self, j):
        """Number of out-neighbors of ``j``, counting the self-loop."""
        return len(self.out_neighbors(j))

    @property
    def num_directed_edges(self):
        """Directed edge count, self-loops excluded."""
        return len(self.edges)

    def adjacency(self):
        """Dense 0/1 matrix with ``adj[i, j] = 1`` iff ``j`` sends to ``i``.

        The diagonal is set (self-loops are part of the model).
        """
        adj = np.eye(self.n)
        for j, i in self.edges:
            adj[i, j] = 1.0
        return adj

    def is_symmetric(self):
        return all((i, j) in self.edges for j, i in self.edges)


@dataclass(frozen=True, eq=False)
class WeightMatrix:
    """Column-stochastic matrix matching a digraph.

    ``matrix[i, j] > 0`` iff ``j`` sends to ``i`` or ``j == i``; every
    column sums to one and every positive entry is at least
    ``min_positive_weight``.
    """

    matrix: np.ndarray
    min_positive_weight: float

    @property
    def n(self):
        return self.matrix.shape[0]


def generate_erdos_renyi(n, p, seed):
    """Sample an Erdos-Renyi graph, realized as a symmetric digraph.

    Each unordered pair is kept with probability ``p``; a kept pair
    contributes both directed edges.  Deterministic for a fixed seed.
    """
    if n < 1:
        raise GraphError(f"need at least one node, got n={n}")
    if not 0.0 <= p <= 1.0:
        raise GraphError(f"edge probability must be in [0,1], got {p}")
    rng = np.random.default_rng(seed)
    edges = set()
    for j in range(n):
        for i in range(j + 1, n):
            if rng.random() < p:
                edges.add((j, i))
                edges.add((i, j))
    return Digraph(n=n, edges=frozenset(edges))


def generate_connected_erdos_renyi(n, p, seed, max_attempts=1000):
    """Erdos-Renyi sampling rejected until strongly connected.

    Attempt ``k`` uses the sub-seed ``(seed, k)``, so results are
    reproducible and independent of how many rejections occur for other
    seeds.  Exhausting ``max_attempts`` is a hard error.
    """
    for attempt in range(max_attempts):
        g = generate_erdos_renyi(n, p, np.random.SeedSequence([seed, attempt]))
        if is_strongly_connected(g):
            return g
    raise GraphError(
        f"no strongly connected graph in {max_attempts} attempts "
        f"(n={n}, p={p}, seed={seed}); increase p"
    )


def _reachable(n, succ, start):
    seen = {start}
    stack = [start]
    while stack:
        u = stack.pop()
        for v in succ[u]:
            if v not in seen:
                seen.add(v)
                stack.append(v)
    return seen


def is_strongly_connected(g):
    """True iff every node reaches every other along directed edges."""
    if g.n == 1:
        return True
    fwd = [[] for _ in range(g.n)]
    rev = [[] for _ in range(g.n)]
    for j, i in g.edges:
        fwd[j].append(i)
        rev[i].append(j)
    return (
        len(_reachable(g.n, fwd, 0)) == g.n
        and len(_reachable(g.n, rev, 0)) == g.n
    )


def algebraic_connectivity(g):
    """Second-smallest eigenvalue of the undirected Laplacian.

    Requires a symmetric digraph (the undirected realization); self-loops
    are ignored.  Zero iff the undirected graph is disconnected.
    """
    if not g.is_symmetric():
        raise GraphError("algebraic connectivity needs a symmetric digraph")
    lap = np.zeros((g.n, g.n))
    for j, i in g.edges:
        lap[i, j] = -1.0
        lap[i, i] += 0.5  # each undirected pair appears twice
        lap[j, j] += 0.5
    if g.n == 1:
        return 0.0
    eigvals = np.linalg.eigvalsh(lap)
    return float(eigvals[1])


def build_column_stochastic(g):
    """Uniform-share column-stochastic weights for a digraph.

    Column ``j`` puts ``1/outdeg(j)`` on every out-neighbor of ``j``
    (self included) and zero elsewhere.  The smallest positive entry is
    ``1/max_j outdeg(j)``.
    """
    mat = np.zeros((g.n, g.n))
    max_outdeg = 1
    for j in range(g.n):
        outs = g.out_neighbors(j)
        w = 1.0 / len(outs)
        max_outdeg = max(max_outdeg, len(outs))
        for i in outs:
            mat[i, j] = w
    return WeightMatrix(matrix=mat, min_positive_weight=1.0 / max_outdeg)


def save_edge_list(g, path):
    """Write the graph as text: first line ``n``, then sorted ``j i`` pairs."""
    lines = [str(g.n)]
    lines += [f"{j} {i}" for j, i in sorted(g.edges)]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_edge_list(path):
    """Read a graph written by :func:`save_edge_list`."""
    with open(path) as fh:
        raw = [ln.strip() for ln in fh if ln.strip()]
    if not raw:
        raise GraphError(f"{path}: empty edge-list file")
    n = int(raw[0])
    edges = set()
    for ln in raw[1:]:
        j, i = ln.split()
        edges.add((int(j), int(i)))
    return Digraph(n=n, edges=frozenset(edges))
