"""Test the result heap and the top-r searches against an exhaustive
enumeration of communities.
"""

import pytest
from test_utils import (
    all_communities,
    graph_from_edges,
    random_graph,
    random_query,
    top_communities,
)

from kicq.errors import QueryError
from kicq.graph import build_inverted_index
from kicq.kictree import build_kic_tree
from kicq.query import KicQuery, Predicate, query_essential_subgraph
from kicq.scoring import Community, GraphStats, make_community
from kicq.search import (
    ResultHeap,
    SearchStats,
    basic_explore,
    modified_pruned_explore,
    pruned_search,
    run_query,
)

ALGORITHMS = ["basic", "pruned", "tree"]
ALGORITHMS_IDS = [f"algorithm = {a}" for a in ALGORITHMS]

SEEDS = list(range(100))
SEEDS_IDS = [f"seed = {s}" for s in SEEDS]

STATS = GraphStats(vertex_count=10, max_degree=4)


def instance(seed):
    """Random graph and query of the equivalence corpus: up to 150 vertices,
    600 edges and 10 keywords, with both predicates and the parameter grid
    `r in {1, 3, 5}`, `k_min in {1, 2, 3}` and `beta in {0, 0.5, 1}`.
    """
    n = 20 + seed % 131
    g = random_graph(
        n,
        min(3 * n, 600),
        n_keywords=2 + seed % 9,
        keyword_prob=0.5,
        seed=seed,
    )
    q = random_query(
        g,
        predicate=[Predicate.AND, Predicate.OR][seed % 2],
        r=[1, 3, 5][seed % 3],
        k_min=[1, 2, 3][(seed // 3) % 3],
        beta=[0.0, 0.5, 1.0][(seed // 9) % 3],
        seed=seed,
    )
    return g, q


def as_tuples(communities):
    return [(c.members, c.k, c.score) for c in communities]


# ------------------------------------------------------------------------------
# Result heap
# ------------------------------------------------------------------------------


def test_result_heap():
    """Bounded at `r`, ordered best first, deduplicated by member set."""

    print("\n===== RUN `test_result_heap` =====")

    relevance = {v: 0.5 for v in range(10)}
    heap = ResultHeap(2)
    assert heap.threshold == 0.0
    assert not heap.prunable(-1.0)

    low = make_community({0, 1}, 1, relevance, STATS, 0.5)
    mid = make_community({2, 3, 4}, 1, relevance, STATS, 0.5)
    high = make_community({5, 6}, 3, relevance, STATS, 0.5)
    assert heap.offer(low)
    assert heap.offer(mid)
    assert heap.threshold == low.score
    assert heap.offer(high)
    assert heap.communities() == [high, mid]
    assert not heap.offer(low)
    assert not heap.offer(mid)
    assert heap.prunable(low.score)
    assert not heap.prunable(mid.score)

    # The same members at a higher cohesion factor replace the old entry
    better = make_community({2, 3, 4}, 2, relevance, STATS, 0.5)
    assert heap.offer(better)
    assert heap.communities() == [high, better]

    with pytest.raises(ValueError):
        ResultHeap(0)


def test_seeded_heap():
    """Placeholders fill the heap and are never returned."""

    print("\n===== RUN `test_seeded_heap` =====")

    heap = ResultHeap.seeded(2, 0.5)
    assert len(heap) == 2
    assert heap.threshold == 0.5
    assert heap.prunable(0.25)
    assert heap.communities() == []
    c = Community(frozenset({0}), 1, 0.5, 0.0)
    assert not heap.offer(c)
    c = Community(frozenset({0}), 1, 0.75, 0.0)
    assert heap.offer(c)
    assert heap.communities() == [c]


# ------------------------------------------------------------------------------
# Searches
# ------------------------------------------------------------------------------


def test_toy_query():
    """Triangle 0-1-2 with the path 2-3-4-5: the triangle is the only 2-core,
    the whole graph the only 1-core.
    """

    print("\n===== RUN `test_toy_query` =====")

    g = graph_from_edges(
        6,
        [(0, 1), (0, 2), (1, 2), (2, 3), (3, 4), (4, 5)],
        {0: {"ml": 0.5}, 1: {"ml": 0.25, "db": 0.5}, 3: {"db": 0.75}},
    )
    ml = g.keyword_id("ml")
    idx = build_inverted_index(g)

    # Only 0 and 1 carry "ml", they form a 1-core
    q = KicQuery([{ml}], Predicate.OR, r=3, k_min=1, beta=0.5)
    for algorithm in ALGORITHMS:
        tree = build_kic_tree(g) if algorithm == "tree" else None
        results, _ = run_query(g, idx, q, algorithm, kictree=tree)
        expected = 0.5 * 1 / 3 + 0.5 * 0.75 / 6
        assert [(c.members, c.k) for c in results] == [(frozenset({0, 1}), 1)]
        assert results[0].score == pytest.approx(expected)

    # No community reaches k = 2
    q = KicQuery([{ml}], Predicate.OR, r=3, k_min=2, beta=0.5)
    for algorithm in ALGORITHMS:
        tree = build_kic_tree(g) if algorithm == "tree" else None
        results, _ = run_query(g, idx, q, algorithm, kictree=tree)
        assert results == []


@pytest.mark.parametrize("seed", SEEDS, ids=SEEDS_IDS)
def test_algorithms_match_oracle(seed):
    """BASIC, PRUNED and TREE return the exhaustive top-r list."""

    print(f"\n===== RUN `test_algorithms_match_oracle` seed={seed} =====")

    g, q = instance(seed)
    idx = build_inverted_index(g)
    tree = build_kic_tree(g)
    expected = top_communities(g, q)

    for algorithm in ALGORITHMS:
        results, stats = run_query(g, idx, q, algorithm, kictree=tree)
        error_msg = (
            f"{algorithm} differs from the oracle for {q}: "
            f"{as_tuples(results)} != {expected}"
        )
        assert as_tuples(results) == expected, error_msg
        for c in results:
            assert 0.0 <= c.score <= 1.0
            assert c.k >= q.k_min


@pytest.mark.parametrize("seed", SEEDS[:20], ids=SEEDS_IDS[:20])
def test_unlimited_search_scores_every_community(seed):
    """Without a result limit BASIC and PRUNED score every community once."""

    print(f"\n===== RUN `test_unlimited_search_scores_every_community` {seed}")

    g, q = instance(seed)
    q = KicQuery(q.term_sets, q.predicate, r=1000, k_min=1, beta=q.beta)
    gq = query_essential_subgraph(g, build_inverted_index(g), q)
    results, basic_stats = basic_explore(gq, q)
    expected = all_communities(g, q)
    assert as_tuples(results) == expected
    assert basic_stats.components_scored == len(expected)
    assert basic_stats.subgraphs_explored >= len(expected)

    _, pruned_stats = pruned_search(gq, q)
    assert pruned_stats.components_scored == len(expected)


def test_modified_pruned_explore_cap():
    """With `k_max = k` no level above the first is scanned."""

    print("\n===== RUN `test_modified_pruned_explore_cap` =====")

    # K4 on 0..3 plus the pendant vertex 4
    edges = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3), (3, 4)]
    g = graph_from_edges(5, edges, {v: {"a": 1.0} for v in range(5)})
    q = KicQuery([{0}], Predicate.OR, r=5, k_min=1, beta=0.5)
    gq = query_essential_subgraph(g, build_inverted_index(g), q)
    heap = ResultHeap(5)
    modified_pruned_explore(gq, 1, 1, q, heap, SearchStats())
    assert [(c.members, c.k) for c in heap.communities()] == [
        (frozenset(range(5)), 1)
    ]

    heap = ResultHeap(5)
    modified_pruned_explore(gq, 1, gq.max_degree, q, heap, SearchStats())
    assert [(c.members, c.k) for c in heap.communities()] == [
        (frozenset(range(4)), 3),
        (frozenset(range(5)), 1),
    ]


def test_run_query_errors():
    """Unknown algorithms and a missing tree are rejected."""

    print("\n===== RUN `test_run_query_errors` =====")

    g = graph_from_edges(2, [(0, 1)], {0: {"a": 1.0}})
    q = KicQuery([{0}], Predicate.OR, r=1, k_min=1)
    idx = build_inverted_index(g)
    with pytest.raises(ValueError):
        run_query(g, idx, q, "fastest")
    with pytest.raises(QueryError):
        run_query(g, idx, q, "tree")


# ------------------------------------------------------------------------------
# Bound soundness
# ------------------------------------------------------------------------------

PRUNE_EVENTS = 10_000
MAX_PRUNE_SEEDS = 40_000


def prune_instance(seed):
    """Small dense instance with `r in 1..5` and `k_min in {1, 2, 3}`."""
    n = 8 + seed % 25
    g = random_graph(n, 3 * n, n_keywords=3, keyword_prob=0.6, seed=seed)
    q = random_query(
        g,
        predicate=[Predicate.AND, Predicate.OR][seed % 2],
        r=1 + seed % 5,
        k_min=1 + (seed // 5) % 3,
        beta=[0.0, 0.3, 0.7, 1.0][(seed // 15) % 4],
        seed=seed,
    )
    return g, q


def check_prune_events(events, communities):
    """Every community a prune event covers scores at most the event's bound,
    which is below the threshold at prune time. Events of kind `"empty"` must
    not cover any community.

    Returns:
        The list of violations.
    """
    violations = []
    for event in events:
        empty = event.kind == "empty"
        if not empty and not event.bound < event.threshold:
            violations.append((event, None))
        for members, k, score in communities:
            if k < event.k_low:
                continue
            if event.k_high is not None and k > event.k_high:
                continue
            if members <= event.vertices and (empty or score > event.bound):
                violations.append((event, (members, k, score)))
    return violations


def test_prune_events_are_sound():
    """Record every pruning decision of PRUNED and TREE on small instances and
    compare it with the exhaustive enumeration.
    """

    print("\n===== RUN `test_prune_events_are_sound` =====")

    n_events = 0
    n_instances = 0
    # Draw instances until enough decisions have been checked
    for seed in range(MAX_PRUNE_SEEDS):
        if n_events >= PRUNE_EVENTS:
            break
        g, q = prune_instance(seed)
        n_instances += 1
        communities = all_communities(g, q)
        idx = build_inverted_index(g)
        tree = build_kic_tree(g)
        for algorithm in ["pruned", "tree"]:
            stats = SearchStats(record_prunes=True)
            run_query(g, idx, q, algorithm, kictree=tree, stats=stats)
            violations = check_prune_events(stats.prune_events, communities)
            error_msg = f"seed {seed}, {algorithm}: unsound {violations[:3]}"
            assert not violations, error_msg
            n_events += len(stats.prune_events)

    print(f"Checked {n_events} prune events on {n_instances} instances")
    assert n_events >= PRUNE_EVENTS


if __name__ == "__main__":

    g, q = instance(seed=4)
    print(f"{g}, {q}")
    for c in top_communities(g, q):
        print(c)
    test_prune_events_are_sound()
