"""Query formulation, vertex relevance and the query essential subgraph."""

import logging
import shlex
from dataclasses import dataclass
from enum import Enum

from kicq.coreops import Subgraph
from kicq.errors import QueryError, UnknownTermError, UnmatchedTermError
from kicq.utils import normalize_keyword

logger = logging.getLogger(__name__)


class Predicate(str, Enum):
    AND = "AND"
    OR = "OR"


@dataclass(frozen=True)
class KicQuery:
    """A keyword-aware influential community query.

    Args:
        term_sets (sequence): One non-empty set of keyword ids per query term
            (the augmented keywords of that term).
        predicate (Predicate or str): `AND` or `OR`.
        r (int): Number of communities to return, `r >= 1`.
        k_min (int): Minimum cohesion factor, `k_min >= 1`.
        beta (float): Weight of cohesiveness against influence, in `[0, 1]`.
        terms (sequence of str): The original terms, for reporting only.
    """

    term_sets: tuple
    predicate: Predicate = Predicate.OR
    r: int = 3
    k_min: int = 10
    beta: float = 0.6
    terms: tuple = ()

    def __post_init__(self):
        term_sets = tuple(frozenset(x) for x in self.term_sets)
        object.__setattr__(self, "term_sets", term_sets)
        object.__setattr__(self, "predicate", Predicate(self.predicate))
        object.__setattr__(self, "terms", tuple(self.terms))

        if not term_sets:
            raise ValueError("Invalid term_sets: no terms")
        if any(not x for x in term_sets):
            raise ValueError("Invalid term_sets: empty keyword set")
        if self.r < 1:
            raise ValueError(f"Invalid r = {self.r}")
        if self.k_min < 1:
            raise ValueError(f"Invalid k_min = {self.k_min}")
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError(f"Invalid beta = {self.beta}")

    @property
    def keywords(self):
        """All keyword ids of the query."""
        return frozenset().union(*self.term_sets)

    def aggregate(self, values):
        """Combine per-term values: minimum for AND, maximum for OR."""
        return min(values) if self.predicate is Predicate.AND else max(values)


class QuerySubgraph(Subgraph):
    """Induced subgraph of the vertices relevant to a query, with their
    relevance scores and the statistics of the whole attributed graph, which
    community scores are normalized by. Restrictions share both.
    """

    def __init__(self, adjacency, vertices, relevance, graph_stats):
        super().__init__(adjacency, vertices)
        self.relevance = relevance
        self.graph_stats = graph_stats

    @property
    def vertex_ids(self):
        return tuple(sorted(self.vertices))

    def restrict(self, vertices):
        return QuerySubgraph(
            self.adjacency, vertices, self.relevance, self.graph_stats
        )


def parse_query_expression(expr):
    """Split a query expression into terms and a predicate.

    Terms are separated by `AND` or by `OR` (one kind per expression). Quoted
    phrases are single terms; consecutive unquoted words are joined.

    Returns:
        A tuple `(terms, predicate)`. A single term yields `Predicate.OR`.

    Raises:
        QueryError: On empty terms, unbalanced quotes or mixed predicates.
    """
    try:
        tokens = shlex.split(expr)
    except ValueError as err:
        raise QueryError(f"cannot parse query '{expr}': {err}") from None

    terms, current, operators = [], [], set()
    for token in tokens + [None]:
        if token in ("AND", "OR", None):
            term = normalize_keyword(" ".join(current))
            if not term:
                raise QueryError(f"empty term in query '{expr}'")
            terms.append(term)
            current = []
            if token is not None:
                operators.add(token)
        else:
            current.append(token)
    if len(operators) > 1:
        raise QueryError(f"mixed AND/OR predicates in query '{expr}'")
    predicate = Predicate(operators.pop()) if operators else Predicate.OR
    return terms, predicate


def formulate_query(
    terms,
    predicate=Predicate.OR,
    r=3,
    k_min=10,
    beta=0.6,
    model=None,
    keyword_universe=None,
    M=10,
):
    """Augment every term with its `M` most similar graph keywords.

    `X_t` is `top_m_similar(t)` over the graph keywords the model resolves,
    plus `t` itself if it is a graph keyword. Without a model only the exact
    keyword is used.

    Args:
        terms (list of str): The query terms.
        keyword_universe (dict): Graph keyword string -> keyword id, e.g.
            `AttributedGraph.keyword_ids`.
        model (SimilarityModel or None): Model used for augmentation.

    Raises:
        UnmatchedTermError: If some term matches no graph keyword.
    """
    # Local import, the model is optional
    from kicq.semantics import top_m_similar

    if not terms:
        raise QueryError("no query terms")
    keyword_universe = keyword_universe or {}
    resolvable = None
    if model is not None:
        resolvable = [kw for kw in keyword_universe if model.can_resolve(kw)]

    term_sets = []
    labels = []
    for term in terms:
        term = normalize_keyword(term)
        keywords = set()
        if term in keyword_universe:
            keywords.add(keyword_universe[term])
        if model is not None and resolvable:
            try:
                similar = top_m_similar(model, term, resolvable, M)
            except UnknownTermError:
                similar = []
            keywords.update(keyword_universe[kw] for kw in similar)
        if not keywords:
            raise UnmatchedTermError(term)
        logger.debug("Term '%s' augmented to %d keywords", term, len(keywords))
        term_sets.append(frozenset(keywords))
        labels.append(term)
    return KicQuery(
        term_sets=tuple(term_sets),
        predicate=predicate,
        r=r,
        k_min=k_min,
        beta=beta,
        terms=tuple(labels),
    )


def relevance_score(v, q, g):
    """Relevance of vertex `v`: the best score over the keywords of each term
    set, combined by minimum (AND) or maximum (OR).
    """
    attrs = g.attrs[v]
    per_term = [max(attrs.get(w, 0.0) for w in x) for x in q.term_sets]
    return q.aggregate(per_term)


def query_essential_subgraph(g, idx, q):
    """Induced subgraph of the vertices with positive relevance, obtained from
    the inverted lists: per term set the union of its lists, across term sets
    the intersection (AND) or union (OR).
    """
    per_term = [idx.vertices(x) for x in q.term_sets]
    if q.predicate is Predicate.AND:
        candidates = set.intersection(*per_term)
    else:
        candidates = set.union(*per_term)

    relevance = {}
    for v in candidates:
        score = relevance_score(v, q, g)
        if score > 0.0:
            relevance[v] = score
    logger.debug("Query essential subgraph has %d vertices", len(relevance))
    return QuerySubgraph(g.adjacency, relevance.keys(), relevance, g.stats)
