"""Structural kernels: core decomposition, maximal k-cores, connected
components and minimum degrees of induced subgraphs.

A `Subgraph` never copies adjacency. It keeps a reference to the parent
graph's adjacency lists and a membership set; induced degrees are computed by
filtering neighbors by membership.
"""

from collections import deque
from dataclasses import dataclass


class Subgraph:
    """Induced subgraph of a parent graph.

    Args:
        adjacency (sequence): Per-vertex neighbor sequences of the parent graph
            (indexed by vertex id).
        vertices (iterable of int): The member vertices.
    """

    def __init__(self, adjacency, vertices):
        self.adjacency = adjacency
        self.vertices = frozenset(vertices)
        self._max_degree = None

    def __len__(self):
        return len(self.vertices)

    def __contains__(self, v):
        return v in self.vertices

    def __iter__(self):
        return iter(sorted(self.vertices))

    def neighbors(self, v):
        members = self.vertices
        return [u for u in self.adjacency[v] if u in members]

    def degree(self, v):
        members = self.vertices
        return sum(1 for u in self.adjacency[v] if u in members)

    @property
    def max_degree(self):
        if self._max_degree is None:
            self._max_degree = max(
                (self.degree(v) for v in self.vertices), default=0
            )
        return self._max_degree

    def edge_count(self):
        return sum(self.degree(v) for v in self.vertices) // 2

    def restrict(self, vertices):
        """Return the subgraph induced by `vertices` (which must be members)."""
        return Subgraph(self.adjacency, vertices)


@dataclass(frozen=True)
class CoreDecomposition:
    """Core numbers of the vertices of one subgraph."""

    core_number: dict
    max_core: int


def core_decomposition(h):
    """Bucket-based peeling in the manner of Batagelj and Zaversnik. Runs in
    `O(|V| + |E|)` for the subgraph `h`. The buckets start in ascending id
    order, but moving a vertex to a lower bucket swaps it with the bucket head,
    so equal-degree vertices are not peeled in id order in general. The core
    numbers do not depend on the peeling order.

    Args:
        h (Subgraph): The subgraph to decompose.

    Returns:
        A `CoreDecomposition` whose `core_number[v]` is the largest `k` such
        that `v` belongs to the maximal k-core of `h`.
    """
    order = sorted(h.vertices)
    n = len(order)
    if n == 0:
        return CoreDecomposition(core_number={}, max_core=0)
    index = {v: i for i, v in enumerate(order)}
    nbrs = [[index[u] for u in h.neighbors(v)] for v in order]
    deg = [len(nb) for nb in nbrs]
    max_deg = max(deg)

    # Bucket sort the vertices by degree (stable, so ids stay ascending)
    bin_start = [0] * (max_deg + 1)
    for d in deg:
        bin_start[d] += 1
    start = 0
    for d in range(max_deg + 1):
        count = bin_start[d]
        bin_start[d] = start
        start += count
    pos = [0] * n
    vert = [0] * n
    for i in range(n):
        pos[i] = bin_start[deg[i]]
        vert[pos[i]] = i
        bin_start[deg[i]] += 1
    for d in range(max_deg, 0, -1):
        bin_start[d] = bin_start[d - 1]
    bin_start[0] = 0

    # Peel: move every higher-degree neighbor one bucket down
    for p in range(n):
        i = vert[p]
        for j in nbrs[i]:
            if deg[j] > deg[i]:
                dj = deg[j]
                pj = pos[j]
                pw = bin_start[dj]
                w = vert[pw]
                if j != w:
                    pos[j], vert[pj] = pw, w
                    pos[w], vert[pw] = pj, j
                bin_start[dj] += 1
                deg[j] -= 1

    core_number = {order[i]: deg[i] for i in range(n)}
    return CoreDecomposition(core_number=core_number, max_core=max(deg))


def maximal_k_core(h, cd, k):
    """Vertex set of the maximal k-core of `h`, i.e. `{v : c(v) >= k}`."""
    if k < 0:
        raise ValueError(f"Invalid k = {k}")
    return frozenset(v for v, c in cd.core_number.items() if c >= k)


def connected_components(h, restrict=None):
    """Partition `restrict` (default: all vertices of `h`) into connected
    components of the subgraph it induces.

    Returns:
        A list of frozensets ordered by smallest member id.
    """
    members = h.vertices if restrict is None else frozenset(restrict)
    adjacency = h.adjacency
    seen = set()
    components = []
    for start in sorted(members):
        if start in seen:
            continue
        seen.add(start)
        component = [start]
        queue = deque([start])
        while queue:
            v = queue.popleft()
            for u in adjacency[v]:
                if u in members and u not in seen:
                    seen.add(u)
                    component.append(u)
                    queue.append(u)
        components.append(frozenset(component))
    return components


def min_degree(h, restrict=None):
    """Minimum degree in the subgraph induced by `restrict` (default: `h`)."""
    members = h.vertices if restrict is None else frozenset(restrict)
    if not members:
        raise ValueError("Invalid restrict: min_degree of an empty vertex set")
    adjacency = h.adjacency
    return min(
        sum(1 for u in adjacency[v] if u in members) for v in members
    )


class UnionFind:
    """Disjoint sets with union by rank and path compression. Elements are
    added lazily on first use.
    """

    def __init__(self):
        self._leader = {}
        self._rank = {}

    def __contains__(self, item):
        return item in self._leader

    def add(self, item):
        if item not in self._leader:
            self._leader[item] = item
            self._rank[item] = 0

    def find(self, item):
        leader = self._leader
        root = item
        while leader[root] != root:
            root = leader[root]
        while leader[item] != root:
            leader[item], item = root, leader[item]
        return root

    def union(self, a, b):
        """Merge the sets of `a` and `b` and return the new leader."""
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return ra
        if self._rank[ra] < self._rank[rb]:
            ra, rb = rb, ra
        self._leader[rb] = ra
        if self._rank[ra] == self._rank[rb]:
            self._rank[ra] += 1
        return ra
