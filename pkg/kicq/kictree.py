"""KIC-tree index and the tree-guided search.

The tree has one node per pair `(k, C)` where `C` is a connected component of
the maximal k-core that contains a vertex of core number exactly `k`. A node
stores only those vertices (so every vertex is stored once); the vertices of
its whole subtree (`allV`) are exactly `C`. The root is a synthetic node with
`k = 0` that holds the isolated vertices.

Every node keeps, per keyword present in its subtree, the vertices of the
node carrying it (`rel_vertices`) and two influence bounds:

- `max_kn_score`: sum of the keyword's scores over `allV` of the node,
- `max_kd_score`: maximum of `max_kn_score` over the children.
"""

import logging
import math
from collections import namedtuple
from dataclasses import dataclass, field

from kicq.binfmt import (
    SectionBuilder,
    decode_container,
    encode_container,
    read_bytes,
    write_bytes,
)
from kicq.coreops import Subgraph, UnionFind, core_decomposition
from kicq.errors import IndexFormatError, QueryError
from kicq.query import Predicate, QuerySubgraph, relevance_score
from kicq.scoring import GraphStats, upper_bound_score
from kicq.search import ResultHeap, SearchStats, modified_pruned_explore
from kicq.utils import round_up_sum

logger = logging.getLogger(__name__)

TREE_MAGIC = b"KICQT"
TREE_VERSION = 1
_TREE_SECTIONS = ["stats", "nodes", "vertices", "ilists", "rel_vertices"]


@dataclass(frozen=True)
class IListEntry:
    rel_vertices: tuple
    max_kn_score: float
    max_kd_score: float


@dataclass
class KicTreeNode:
    node_id: int
    k: int
    vertex_set: tuple
    children: tuple = ()
    parent: int = None
    k_max: int = 0
    ilist: dict = field(default_factory=dict)


class KicTree:
    """The nodes of a KIC-tree in pre-order (the root has id 0, children are
    ordered by their smallest subtree vertex).

    Args:
        nodes (list of KicTreeNode): The nodes, `nodes[i].node_id == i`.
        graph_stats (GraphStats): Statistics of the indexed graph.
    """

    def __init__(self, nodes, graph_stats):
        self.nodes = list(nodes)
        self.graph_stats = GraphStats(*graph_stats)
        self.vertex_node = {}
        for node in self.nodes:
            for v in node.vertex_set:
                self.vertex_node[v] = node.node_id

    def __len__(self):
        return len(self.nodes)

    def __eq__(self, other):
        if not isinstance(other, KicTree):
            return NotImplemented
        return (
            self.graph_stats == other.graph_stats and self.nodes == other.nodes
        )

    @property
    def root(self):
        return self.nodes[0]

    def depth(self):
        """Number of edges on the longest root-to-leaf path."""
        depths = [0] * len(self.nodes)
        for node in self.nodes[1:]:
            depths[node.node_id] = depths[node.parent] + 1
        return max(depths)

    def subtree(self, node_id):
        """Ids of the nodes of the subtree rooted at `node_id`."""
        stack, result = [node_id], []
        while stack:
            u = stack.pop()
            result.append(u)
            stack.extend(self.nodes[u].children)
        return result

    def subtree_vertices(self, node_id):
        """Decompress a node: all vertices stored in its subtree."""
        vertices = set()
        for u in self.subtree(node_id):
            vertices.update(self.nodes[u].vertex_set)
        return frozenset(vertices)


# ------------------------------------------------------------------------------
# Construction
# ------------------------------------------------------------------------------


def build_kic_tree(g):
    """Build the KIC-tree of `g`.

    The core decomposition is followed by a bottom-up pass over the core
    levels, from the highest to 1, that activates the vertices of the level
    and unions them with their active neighbors. Each union-find set that
    received vertices of the level becomes a node whose children are the
    nodes previously built inside that set.
    """
    n = g.vertex_count
    cd = core_decomposition(Subgraph(g.adjacency, range(n)))
    core = cd.core_number
    levels = {}
    for v in range(n):
        levels.setdefault(core[v], []).append(v)

    # Temporary nodes: [k, vertices, children]
    built = []
    tops = []  # (representative vertex, temporary node id) of parentless nodes
    uf = UnionFind()
    for k in range(cd.max_core, 0, -1):
        level = levels.get(k, [])
        if not level:
            continue
        for v in level:
            uf.add(v)
        for v in level:
            for u in g.adjacency[v]:
                if core[u] >= k:
                    uf.union(v, u)

        groups = {}
        for v in level:
            groups.setdefault(uf.find(v), []).append(v)
        absorbed = {}
        remaining = []
        for rep, node in tops:
            leader = uf.find(rep)
            if leader in groups:
                absorbed.setdefault(leader, []).append(node)
            else:
                remaining.append((rep, node))
        for leader, vertices in groups.items():
            built.append([k, vertices, absorbed.get(leader, [])])
            remaining.append((vertices[0], len(built) - 1))
        tops = remaining

    built.append([0, levels.get(0, []), [node for _, node in tops]])
    tree = _finalize(g, built, len(built) - 1)
    logger.info(
        "Built KIC-tree with %d nodes, depth %d", len(tree), tree.depth()
    )
    return tree


def _finalize(g, built, root):
    # Smallest subtree vertex per temporary node; children precede parents
    smallest = [None] * len(built)
    for i, (_, vertices, children) in enumerate(built):
        candidates = list(vertices) + [smallest[c] for c in children]
        smallest[i] = min(candidates) if candidates else -1

    # Pre-order renumbering
    order = []
    stack = [root]
    while stack:
        i = stack.pop()
        order.append(i)
        children = sorted(built[i][2], key=lambda c: smallest[c])
        built[i][2] = children
        stack.extend(reversed(children))
    new_id = {old: new for new, old in enumerate(order)}

    nodes = []
    for old in order:
        k, vertices, children = built[old]
        nodes.append(
            KicTreeNode(
                node_id=new_id[old],
                k=k,
                vertex_set=tuple(sorted(vertices)),
                children=tuple(new_id[c] for c in children),
            )
        )
    for node in nodes:
        for c in node.children:
            nodes[c].parent = node.node_id

    _fill_ilists(g, nodes)
    return KicTree(nodes, g.stats)


def _fill_ilists(g, nodes):
    """Compute `k_max` and the ilists bottom-up. The per-keyword score lists
    of the largest child are reused by its parent.
    """
    pending = {}
    # Pre-order reversed, so children come before their parent
    for node in reversed(nodes):
        node.k_max = max([node.k] + [nodes[c].k_max for c in node.children])

        # Merge the children's score lists into the largest one
        children = sorted(
            node.children, key=lambda c: -sum(map(len, pending[c].values()))
        )
        scores = pending.pop(children[0]) if children else {}
        for c in children[1:]:
            for kw, values in pending.pop(c).items():
                scores.setdefault(kw, []).extend(values)

        # Own vertices, stored at the node of their core number
        rel_vertices = {}
        for v in node.vertex_set:
            for kw, s in g.attrs[v].items():
                if s > 0.0:
                    scores.setdefault(kw, []).append(s)
                    rel_vertices.setdefault(kw, []).append(v)

        # maxKN over the whole subtree, maxKD over the children only
        ilist = {}
        for kw in sorted(scores):
            kd = max(
                (
                    nodes[c].ilist[kw].max_kn_score
                    for c in node.children
                    if kw in nodes[c].ilist
                ),
                default=0.0,
            )
            ilist[kw] = IListEntry(
                rel_vertices=tuple(rel_vertices.get(kw, ())),
                max_kn_score=math.fsum(scores[kw]),
                max_kd_score=kd,
            )
        node.ilist = ilist
        pending[node.node_id] = scores


# ------------------------------------------------------------------------------
# Query-time bounds
# ------------------------------------------------------------------------------

BoundScore = namedtuple("BoundScore", ["score", "s_k", "s_inf"])


def _bound(node, q, graph_stats, k, attribute):
    per_term = []
    for keywords in q.term_sets:
        per_term.append(
            [
                getattr(node.ilist[w], attribute)
                for w in sorted(keywords)
                if w in node.ilist
            ]
        )
    if q.predicate is Predicate.AND:
        total = min(round_up_sum(values) for values in per_term)
    else:
        total = round_up_sum(s for values in per_term for s in values)

    n, max_degree = graph_stats
    s_inf = total / n if total > 0.0 else 0.0
    s_k = k / max_degree if max_degree > 0 else 0.0
    score = upper_bound_score(total, k, graph_stats, q.beta)
    return BoundScore(score, s_k, s_inf)


def max_node_score(u, q, graph_stats):
    """Upper bound on the score of any community containing a vertex of `u`
    and lying in its subtree. Missing keywords contribute 0; term sums are
    added (OR) or minimized (AND).
    """
    return _bound(u, q, graph_stats, u.k, "max_kn_score")


def max_des_score(u, q, graph_stats):
    """Upper bound on the score of any community lying strictly below `u`."""
    return _bound(u, q, graph_stats, u.k_max, "max_kd_score")


def relevant_tree_nodes(tree, q):
    """Nodes storing a vertex that carries a query keyword, together with all
    their ancestors.
    """
    keywords = q.keywords
    relevant = set()
    for node in tree.nodes:
        if any(
            node.ilist[w].rel_vertices for w in keywords if w in node.ilist
        ):
            u = node.node_id
            while u is not None and u not in relevant:
                relevant.add(u)
                u = tree.nodes[u].parent
    return frozenset(relevant)


# ------------------------------------------------------------------------------
# Tree-guided search
# ------------------------------------------------------------------------------


class TreeExplorer:
    """State of one tree-guided query: the graph, the tree, the heap, the
    counters and the per-query caches of relevant vertices and relevance
    scores.
    """

    def __init__(self, g, tree, q, heap, stats):
        self.g = g
        self.tree = tree
        self.q = q
        self.heap = heap
        self.stats = stats
        self.relevance = {}
        self._relevant = {}

    def _own_relevant(self, node):
        per_term = []
        for keywords in self.q.term_sets:
            vertices = set()
            for w in keywords:
                entry = node.ilist.get(w)
                if entry is not None:
                    vertices.update(entry.rel_vertices)
            per_term.append(vertices)
        if self.q.predicate is Predicate.AND:
            return set.intersection(*per_term)
        return set.union(*per_term)

    def relevant_vertices(self, u, U):
        """Vertices of the subtree of `u` with positive relevance."""
        if u not in self._relevant:
            node = self.tree.nodes[u]
            vertices = self._own_relevant(node)
            for c in node.children:
                if c in U:
                    vertices |= self.relevant_vertices(c, U)
            self._relevant[u] = frozenset(vertices)
        return self._relevant[u]

    def _record(self, kind, u, k_low, k_high, bound):
        if self.stats.record_prunes:
            vertices = self.tree.subtree_vertices(u)
            if kind == "subtree":
                vertices -= frozenset(self.tree.nodes[u].vertex_set)
            self.stats.record(
                kind, vertices, k_low, k_high, bound, self.heap.threshold
            )

    def tree_explore(self, u, U):
        """Post-order traversal of the subtree of `u` restricted to `U`."""
        tree, q, heap, stats = self.tree, self.q, self.heap, self.stats
        graph_stats = tree.graph_stats
        node = tree.nodes[u]
        stats.tree_nodes_visited += 1

        # Descendants first, at levels above node.k
        children = [c for c in node.children if c in U]
        if children:
            des = max_des_score(node, q, graph_stats)
            if des.s_inf > 0.0 and not heap.prunable(des.score):
                for c in children:
                    self.tree_explore(c, U)
            else:
                stats.tree_nodes_pruned += 1
                kind = "subtree" if des.s_inf > 0.0 else "empty"
                self._record(kind, u, node.k + 1, None, des.score)

        # The node itself: communities with parent.k < k <= node.k
        parent_k = -1 if node.parent is None else tree.nodes[node.parent].k
        k_low = max(q.k_min, parent_k + 1)
        if node.k < k_low:
            return
        # Without relevant vertices or with a low bound the node is skipped
        bound = max_node_score(node, q, graph_stats)
        if bound.s_inf == 0.0 or heap.prunable(bound.score):
            stats.tree_nodes_pruned += 1
            kind = "node" if bound.s_inf > 0.0 else "empty"
            self._record(kind, u, k_low, node.k, bound.score)
            return

        # Search the relevant vertices of the whole subtree, capped at node.k
        vertices = self.relevant_vertices(u, U)
        if not vertices:
            return
        for v in vertices:
            if v not in self.relevance:
                self.relevance[v] = relevance_score(v, q, self.g)
        h = QuerySubgraph(
            self.g.adjacency, vertices, self.relevance, graph_stats
        )
        modified_pruned_explore(h, k_low, node.k, q, heap, stats)


def tree_search(g, tree, q, stats=None):
    """Answer `q` with the tree-guided search.

    Returns:
        A tuple `(communities, stats)`, communities best first.

    Raises:
        QueryError: If `tree` was not built from a graph like `g`.
    """
    if tree.graph_stats != g.stats:
        raise QueryError(
            f"index built for {tree.graph_stats}, graph has {g.stats}"
        )
    heap = ResultHeap(q.r)
    stats = SearchStats() if stats is None else stats
    U = relevant_tree_nodes(tree, q)
    if U:
        TreeExplorer(g, tree, q, heap, stats).tree_explore(tree.root.node_id, U)
    return heap.communities(), stats


# ------------------------------------------------------------------------------
# Persistence
# ------------------------------------------------------------------------------


def encode_tree(tree):
    """Serialize `tree` into the canonical `KICQT` container (bytes)."""
    stats = SectionBuilder()
    stats.u32(tree.graph_stats.vertex_count)
    stats.u32(tree.graph_stats.max_degree)

    nodes = SectionBuilder()
    vertices = SectionBuilder()
    ilists = SectionBuilder()
    rel_vertices = SectionBuilder()
    nodes.u32(len(tree))
    vertex_offset = 0
    rel_offset = 0
    for node in tree.nodes:
        nodes.u32(node.k)
        nodes.u32(node.k_max)
        nodes.i32(-1 if node.parent is None else node.parent)
        nodes.u32(vertex_offset)
        nodes.u32(len(node.vertex_set))
        vertices.u32_array(node.vertex_set)
        vertex_offset += len(node.vertex_set)

        ilists.u32(len(node.ilist))
        for kw in sorted(node.ilist):
            entry = node.ilist[kw]
            ilists.u32(kw)
            ilists.u32(rel_offset)
            ilists.u32(len(entry.rel_vertices))
            ilists.f64(entry.max_kn_score)
            ilists.f64(entry.max_kd_score)
            rel_vertices.u32_array(entry.rel_vertices)
            rel_offset += len(entry.rel_vertices)

    sections = [stats, nodes, vertices, ilists, rel_vertices]
    return encode_container(
        TREE_MAGIC, TREE_VERSION, [s.getvalue() for s in sections]
    )


def decode_tree(data):
    """Inverse of `encode_tree`, verifying the tree structure.

    Raises:
        ChecksumError: If the data is truncated or corrupted.
        IndexFormatError: On a bad header or an inconsistent tree.
    """
    stats, nodes_sec, vertices_sec, ilists_sec, rel_sec = decode_container(
        data, TREE_MAGIC, TREE_VERSION, _TREE_SECTIONS
    )
    graph_stats = GraphStats(stats.u32(), stats.u32())
    stats.finish()

    n = nodes_sec.u32()
    rows = [
        (
            nodes_sec.u32(),
            nodes_sec.u32(),
            nodes_sec.i32(),
            nodes_sec.u32(),
            nodes_sec.u32(),
        )
        for _ in range(n)
    ]
    nodes_sec.finish()
    total_vertices = sum(row[4] for row in rows)
    flat_vertices = vertices_sec.u32_array(total_vertices)
    vertices_sec.finish()

    raw_ilists = []
    total_rel = 0
    for _ in range(n):
        entries = []
        for _ in range(ilists_sec.u32()):
            entry = (
                ilists_sec.u32(),
                ilists_sec.u32(),
                ilists_sec.u32(),
                ilists_sec.f64(),
                ilists_sec.f64(),
            )
            total_rel += entry[2]
            entries.append(entry)
        raw_ilists.append(entries)
    ilists_sec.finish()
    flat_rel = rel_sec.u32_array(total_rel)
    rel_sec.finish()

    nodes = []
    for i, (k, k_max, parent, offset, count) in enumerate(rows):
        ilist = {
            kw: IListEntry(flat_rel[start : start + size], kn, kd)
            for kw, start, size, kn, kd in raw_ilists[i]
        }
        nodes.append(
            KicTreeNode(
                node_id=i,
                k=k,
                vertex_set=flat_vertices[offset : offset + count],
                parent=None if parent < 0 else parent,
                k_max=k_max,
                ilist=ilist,
            )
        )
    _link_and_verify(nodes)
    return KicTree(nodes, graph_stats)


def _link_and_verify(nodes):
    if not nodes or nodes[0].parent is not None or nodes[0].k != 0:
        raise IndexFormatError("tree has no synthetic root")
    children = [[] for _ in nodes]
    for node in nodes[1:]:
        if node.parent is None or not 0 <= node.parent < node.node_id:
            raise IndexFormatError(f"node {node.node_id} has a bad parent")
        if nodes[node.parent].k >= node.k:
            raise IndexFormatError(f"node {node.node_id} has k <= parent k")
        children[node.parent].append(node.node_id)
    for node in reversed(nodes):
        node.children = tuple(children[node.node_id])
        expected = max([node.k] + [nodes[c].k_max for c in node.children])
        if node.k_max != expected:
            raise IndexFormatError(f"node {node.node_id} has a bad k_max")
        for kw, entry in node.ilist.items():
            kd = max(
                (
                    nodes[c].ilist[kw].max_kn_score
                    for c in node.children
                    if kw in nodes[c].ilist
                ),
                default=0.0,
            )
            if entry.max_kd_score != kd:
                raise IndexFormatError(
                    f"node {node.node_id} has a bad bound for keyword {kw}"
                )


def persist_tree(tree, path):
    """Write `tree` to `path` and return the number of bytes written."""
    data = encode_tree(tree)
    write_bytes(path, data)
    return len(data)


def load_tree(path):
    """Read a tree written by `persist_tree`."""
    tree = decode_tree(read_bytes(path))
    logger.info("Loaded KIC-tree %s with %d nodes", path, len(tree))
    return tree
