"""Top-r search over the query essential subgraph: the exhaustive level-by-
level search (`basic_explore`) and the recursive search with score-bound and
minimum-degree pruning (`pruned_explore`).

Every community is reported once, at its maximal cohesion factor, which is the
minimum induced degree of its member set. Results are totally ordered by
`Community.rank_key`, so all search algorithms return identical lists.
"""

import logging
import math
from bisect import bisect_left
from dataclasses import dataclass, field, fields

from kicq.coreops import (
    connected_components,
    core_decomposition,
    maximal_k_core,
    min_degree,
)
from kicq.errors import QueryError
from kicq.query import query_essential_subgraph
from kicq.scoring import make_community, upper_bound_score

logger = logging.getLogger(__name__)

ALGORITHMS = ("basic", "pruned", "tree")


class ResultHeap:
    """The `r` best communities found so far, deduplicated by member set.

    Args:
        r (int): Capacity, `r >= 1`.
    """

    def __init__(self, r):
        if r < 1:
            raise ValueError(f"Invalid r = {r}")
        self.r = r
        self._keys = []
        self._entries = []
        self._by_members = {}

    @classmethod
    def seeded(cls, r, score):
        """A full heap of `r` placeholder entries with the given score. The
        placeholders rank above real communities of equal score and are never
        returned.
        """
        heap = cls(r)
        for i in range(r):
            heap._keys.append((-score, -math.inf, -1, (i,)))
            heap._entries.append(None)
        return heap

    def __len__(self):
        return len(self._entries)

    @property
    def threshold(self):
        """Score of the r-th entry, 0 while fewer than `r` entries exist."""
        if len(self._entries) < self.r:
            return 0.0
        return -self._keys[-1][0]

    def prunable(self, bound):
        """True iff no community scoring at most `bound` can enter the heap."""
        return len(self._entries) >= self.r and bound < self.threshold

    def _insert(self, key, community):
        pos = bisect_left(self._keys, key)
        self._keys.insert(pos, key)
        self._entries.insert(pos, community)
        if community is not None:
            self._by_members[community.members] = community

    def _pop(self, pos):
        self._keys.pop(pos)
        community = self._entries.pop(pos)
        if community is not None:
            del self._by_members[community.members]

    def offer(self, community):
        """Insert `community` if it ranks among the best `r`.

        Returns:
            `True` if the heap changed.
        """
        key = community.rank_key()
        existing = self._by_members.get(community.members)
        if existing is not None:
            old_key = existing.rank_key()
            if old_key <= key:
                return False
            self._pop(bisect_left(self._keys, old_key))
        if len(self._entries) >= self.r:
            if key >= self._keys[-1]:
                return False
            self._pop(len(self._entries) - 1)
        self._insert(key, community)
        return True

    def communities(self):
        """The real entries, best first."""
        return [c for c in self._entries if c is not None]


@dataclass(frozen=True)
class PruneEvent:
    """A pruning decision: every community inside `vertices` with cohesion
    factor in `[k_low, k_high]` (`k_high=None`: unbounded) was skipped because
    its score cannot exceed `bound`, which is below `threshold`.
    """

    kind: str
    vertices: frozenset
    k_low: int
    k_high: int
    bound: float
    threshold: float


@dataclass
class SearchStats:
    """Counters of one query. With `record_prunes`, every pruning decision is
    also kept as a `PruneEvent`.
    """

    subgraphs_explored: int = 0
    core_decompositions: int = 0
    components_scored: int = 0
    prunes_by_bound: int = 0
    prunes_by_mindeg: int = 0
    tree_nodes_visited: int = 0
    tree_nodes_pruned: int = 0
    record_prunes: bool = field(default=False, repr=False, compare=False)
    prune_events: list = field(default_factory=list, repr=False, compare=False)

    def record(self, kind, vertices, k_low, k_high, bound, threshold):
        if self.record_prunes:
            self.prune_events.append(
                PruneEvent(
                    kind, frozenset(vertices), k_low, k_high, bound, threshold
                )
            )

    def as_dict(self):
        return {
            f.name: getattr(self, f.name) for f in fields(self) if f.compare
        }


def basic_explore(gq, q, stats=None):
    """Score every connected component of every maximal k-core of `gq` for
    `k_min <= k <= max_degree(gq)` and keep the best `q.r`.

    Returns:
        A tuple `(communities, stats)`, communities best first.
    """
    heap = ResultHeap(q.r)
    stats = SearchStats() if stats is None else stats
    if not gq:
        return [], stats

    cd = core_decomposition(gq)
    stats.core_decompositions += 1
    for k in range(q.k_min, gq.max_degree + 1):
        core = maximal_k_core(gq, cd, k)
        if not core:
            break
        for component in connected_components(gq, core):
            stats.subgraphs_explored += 1
            # Components with a larger minimum degree reappear at that level
            if min_degree(gq, component) != k:
                continue
            community = make_community(
                component, k, gq.relevance, gq.graph_stats, q.beta
            )
            stats.components_scored += 1
            heap.offer(community)
    return heap.communities(), stats


def pruned_explore(h, k, q, heap, stats):
    """Recursive search of subgraph `h` from cohesion factor `k` upwards.

    `k` is lifted to the minimum degree of `h`. Every component of the
    maximal k-core is scored at its own minimum degree `d`. The search then
    recurses into the component at the first `k' > d` whose upper bound can
    still enter the heap; smaller `k'` are pruned and larger ones are handled
    by the recursion.
    """
    modified_pruned_explore(h, k, h.max_degree, q, heap, stats)


def modified_pruned_explore(h, k, k_max, q, heap, stats):
    """`pruned_explore` with the scan over `k'` capped at `k_max`."""
    if not h:
        return
    # Up to its minimum degree the k-core of `h` is `h` itself
    lowest = min_degree(h)
    if lowest > k:
        stats.prunes_by_mindeg += 1
        k = lowest

    cd = core_decomposition(h)
    stats.core_decompositions += 1
    graph_stats = h.graph_stats
    # Every component of the maximal k-core is a community at its own k
    for component in connected_components(h, maximal_k_core(h, cd, k)):
        stats.subgraphs_explored += 1
        sub = h.restrict(component)
        d = min_degree(sub)
        community = make_community(
            component, d, h.relevance, graph_stats, q.beta
        )
        stats.components_scored += 1
        heap.offer(community)

        # Skip levels whose bound cannot enter the heap, recurse into the
        # first one that can. Higher levels are handled by the recursion.
        for k_next in range(d + 1, min(k_max, sub.max_degree) + 1):
            bound = upper_bound_score(
                community.influence_sum, k_next, graph_stats, q.beta
            )
            if heap.prunable(bound):
                stats.prunes_by_bound += 1
                stats.record(
                    "bound", component, k_next, k_next, bound, heap.threshold
                )
                continue
            modified_pruned_explore(sub, k_next, k_max, q, heap, stats)
            break


def pruned_search(gq, q, stats=None):
    """Run `pruned_explore` on the whole query essential subgraph."""
    heap = ResultHeap(q.r)
    stats = SearchStats() if stats is None else stats
    if gq:
        pruned_explore(gq, q.k_min, q, heap, stats)
    return heap.communities(), stats


def run_query(g, idx, q, algorithm="pruned", kictree=None, stats=None):
    """Answer query `q` on graph `g` with one of the search algorithms.

    Args:
        g (AttributedGraph): The graph.
        idx (InvertedIndex): Its inverted index (unused by `"tree"`).
        q (KicQuery): The query.
        algorithm (str): `"basic"`, `"pruned"` or `"tree"`.
        kictree (KicTree or None): Index built from `g`, required by `"tree"`.
        stats (SearchStats or None): Counters to fill, e.g. with
            `record_prunes=True`.

    Returns:
        A tuple `(communities, stats)`, communities best first.
    """
    if algorithm not in ALGORITHMS:
        raise ValueError(f"Invalid algorithm = {algorithm}")
    stats = SearchStats() if stats is None else stats
    if algorithm == "tree":
        if kictree is None:
            raise QueryError("tree search requires a KIC-tree index")
        # Local import, `kictree` builds on this module
        from kicq.kictree import tree_search

        results, _ = tree_search(g, kictree, q, stats=stats)
    else:
        gq = query_essential_subgraph(g, idx, q)
        search = basic_explore if algorithm == "basic" else pruned_search
        results, _ = search(gq, q, stats=stats)
    logger.info(
        "%s search returned %d communities (%s)",
        algorithm,
        len(results),
        stats.as_dict(),
    )
    return results, stats
