"""Test query parsing, formulation, relevance scores and the query essential
subgraph.
"""

import pytest
import torch
from test_utils import (
    graph_from_edges,
    oracle_query_vertices,
    random_graph,
    random_query,
)

from kicq.errors import QueryError, UnmatchedTermError
from kicq.graph import build_inverted_index
from kicq.query import (
    KicQuery,
    Predicate,
    formulate_query,
    parse_query_expression,
    query_essential_subgraph,
    relevance_score,
)
from kicq.semantics import SimilarityModel

SEEDS = list(range(50))
SEEDS_IDS = [f"seed = {s}" for s in SEEDS]

PREDICATES = [Predicate.AND, Predicate.OR]
PREDICATES_IDS = [f"predicate = {p.value}" for p in PREDICATES]


def test_query_validation():
    """Parameters outside their domain are rejected."""

    print("\n===== RUN `test_query_validation` =====")

    q = KicQuery([{0, 1}, [2]], "AND", r=2, k_min=3, beta=0.25)
    assert q.term_sets == (frozenset({0, 1}), frozenset({2}))
    assert q.predicate is Predicate.AND
    assert q.keywords == frozenset({0, 1, 2})
    assert q.aggregate([0.5, 0.25]) == 0.25

    for kwargs in [
        dict(term_sets=[]),
        dict(term_sets=[set()]),
        dict(term_sets=[{0}], r=0),
        dict(term_sets=[{0}], k_min=0),
        dict(term_sets=[{0}], beta=1.5),
    ]:
        with pytest.raises(ValueError):
            KicQuery(**kwargs)


PARSED = [
    ("ml", (["ml"], Predicate.OR)),
    ("Machine Learning AND db", (["machine learning", "db"], Predicate.AND)),
    ('"data  mining" OR ml OR db', (["data mining", "ml", "db"], Predicate.OR)),
]
PARSED_IDS = ["single term", "AND", "quoted OR"]


@pytest.mark.parametrize("parsed", PARSED, ids=PARSED_IDS)
def test_parse_query_expression(parsed):
    """Terms are normalized, separators give the predicate."""

    print("\n===== RUN `test_parse_query_expression` =====")

    expr, expected = parsed
    assert parse_query_expression(expr) == expected


@pytest.mark.parametrize(
    "expr", ["ml AND db OR x", "AND ml", "ml OR", '"ml'], ids=str
)
def test_parse_query_expression_errors(expr):
    """Mixed predicates, empty terms and unbalanced quotes."""

    print(f"\n===== RUN `test_parse_query_expression_errors` '{expr}' =====")

    with pytest.raises(QueryError):
        parse_query_expression(expr)


def test_formulate_query():
    """Without a model only exact keywords match, with a model every term is
    augmented with its most similar graph keywords.
    """

    print("\n===== RUN `test_formulate_query` =====")

    g = graph_from_edges(
        3, [(0, 1)], {0: {"ml": 0.5}, 1: {"learning": 0.5}, 2: {"db": 0.5}}
    )
    ml, learning, db = (g.keyword_id(w) for w in ["ml", "learning", "db"])

    q = formulate_query(["ML", "db"], "AND", keyword_universe=g.keyword_ids)
    assert q.term_sets == (frozenset({ml}), frozenset({db}))
    assert q.terms == ("ml", "db")
    with pytest.raises(UnmatchedTermError, match="learning theory"):
        formulate_query(["learning theory"], keyword_universe=g.keyword_ids)

    vectors = torch.tensor(
        [[1.0, 0.0], [0.9, 0.1], [0.0, 1.0], [0.8, 0.2]], dtype=torch.float64
    )
    model = SimilarityModel(
        ["ml", "learning", "db", "theory"], vectors, L=1, metric="cosine"
    )
    q = formulate_query(
        ["learning theory", "ml"],
        model=model,
        keyword_universe=g.keyword_ids,
        M=2,
    )
    assert q.term_sets == (frozenset({ml, learning}), frozenset({ml, learning}))

    # M = 1: a graph keyword is its own best match
    q = formulate_query(
        ["db"], model=model, keyword_universe=g.keyword_ids, M=1
    )
    assert q.term_sets == (frozenset({db}),)

    with pytest.raises(UnmatchedTermError):
        formulate_query(
            ["unknown"], model=model, keyword_universe=g.keyword_ids
        )


def test_relevance_score():
    """Maximum within a term set, minimum (AND) or maximum (OR) across."""

    print("\n===== RUN `test_relevance_score` =====")

    g = graph_from_edges(2, [(0, 1)], {0: {"a": 0.5, "b": 0.25, "c": 0.75}})
    a, b, c = (g.keyword_id(w) for w in "abc")
    q_and = KicQuery([{a, b}, {c}], Predicate.AND)
    q_or = KicQuery([{b}, {c}], Predicate.OR)
    assert relevance_score(0, q_and, g) == 0.5
    assert relevance_score(0, q_or, g) == 0.75
    assert relevance_score(1, q_or, g) == 0.0


@pytest.mark.parametrize("seed", SEEDS, ids=SEEDS_IDS)
@pytest.mark.parametrize("predicate", PREDICATES, ids=PREDICATES_IDS)
def test_query_essential_subgraph(seed, predicate):
    """The index-based subgraph equals a full scan of relevance scores."""

    print(f"\n===== RUN `test_query_essential_subgraph` seed={seed} =====")

    g = random_graph(40, 80, n_keywords=6, keyword_prob=0.3, seed=seed)
    q = random_query(g, predicate, r=3, k_min=1, beta=0.5, seed=seed)
    gq = query_essential_subgraph(g, build_inverted_index(g), q)
    expected = oracle_query_vertices(g, q)

    error_msg = f"query vertices {gq.vertex_ids} differ from full scan"
    assert gq.vertices == frozenset(expected), error_msg
    assert gq.relevance == expected
    assert gq.graph_stats == g.stats
    sub = gq.restrict(list(gq.vertices)[:3])
    assert sub.relevance is gq.relevance
