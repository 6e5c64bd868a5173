"""Community score, its upper bound and community quality metrics."""

import math
from collections import namedtuple
from dataclasses import dataclass
from itertools import combinations

import networkx as nx

from kicq.errors import InvariantError

GraphStats = namedtuple("GraphStats", ["vertex_count", "max_degree"])


def _check_score_args(k, influence_sum, stats, beta):
    if not 0.0 <= beta <= 1.0:
        raise ValueError(f"Invalid beta = {beta}")
    if k < 0:
        raise ValueError(f"Invalid k = {k}")
    if influence_sum < 0.0:
        raise ValueError(f"Invalid influence_sum = {influence_sum}")
    if stats.max_degree == 0 and k > 0:
        raise InvariantError(
            f"cohesion factor {k} in a graph without edges"
        )
    if stats.max_degree < k:
        raise InvariantError(
            f"cohesion factor {k} exceeds the maximum degree "
            f"{stats.max_degree}"
        )


def community_score(k, influence_sum, stats, beta):
    """Weighted sum of cohesiveness and influence,
    `beta * k / max_degree + (1 - beta) * influence_sum / |V|`.

    Args:
        k (int): Cohesion factor of the community.
        influence_sum (float): Sum of the relevance scores of its members.
        stats (GraphStats): Vertex count and maximum degree of the whole
            attributed graph.
        beta (float): Weight of the cohesiveness term, in `[0, 1]`.

    Returns:
        The score in `[0, 1]`.

    Raises:
        InvariantError: If `k` exceeds the graph's maximum degree.
    """
    _check_score_args(k, influence_sum, stats, beta)
    cohesion = k / stats.max_degree if stats.max_degree > 0 else 0.0
    influence = influence_sum / stats.vertex_count if influence_sum else 0.0
    return beta * cohesion + (1.0 - beta) * influence


def upper_bound_score(subgraph_influence_sum, k, stats, beta):
    """Upper bound on the score of every community with cohesion factor `k`
    inside a subgraph whose relevance scores sum to `subgraph_influence_sum`.
    Equal to the score of the subgraph itself, seen as a community.
    """
    return community_score(k, subgraph_influence_sum, stats, beta)


def influence_sum(members, relevance):
    """Correctly rounded sum of `relevance[v]` over `members`. The result does
    not depend on iteration order and is monotone under set inclusion.
    """
    return math.fsum(relevance[v] for v in members)


@dataclass(frozen=True)
class Community:
    """One search result: a connected member set with its cohesion factor."""

    members: frozenset
    k: int
    score: float
    influence_sum: float

    @property
    def size(self):
        return len(self.members)

    @property
    def min_member(self):
        return min(self.members)

    def rank_key(self):
        """Total order of results: score desc, k desc, smallest member asc,
        then the sorted member tuple.
        """
        members = tuple(sorted(self.members))
        return (-self.score, -self.k, self.min_member, members)

    def to_dict(self, g=None):
        members = sorted(self.members)
        if g is not None:
            members = sorted(g.external_ids[v] for v in members)
        return {
            "score": round(self.score, 9),
            "k": self.k,
            "size": self.size,
            "members": members,
        }


def make_community(members, k, relevance, stats, beta):
    """Score `members` as a community with cohesion factor `k`."""
    total = influence_sum(members, relevance)
    return Community(
        members=frozenset(members),
        k=k,
        score=community_score(k, total, stats, beta),
        influence_sum=total,
    )


# ------------------------------------------------------------------------------
# Quality metrics
# ------------------------------------------------------------------------------


def _jaccard(a, b):
    if not a and not b:
        return 1.0
    return len(a & b) / len(a | b)


def community_cpj(members, g):
    """Mean keyword-set Jaccard similarity over all member pairs of one
    community (`1.0` for a singleton).
    """
    members = sorted(members)
    if len(members) < 2:
        return 1.0
    keyword_sets = [g.keywords_of(v) for v in members]
    values = [_jaccard(a, b) for a, b in combinations(keyword_sets, 2)]
    return math.fsum(values) / len(values)


def cpj(communities, g):
    """Community pairwise Jaccard, averaged over `communities`. Two members
    without keywords count as identical. An empty list yields `0.0`.
    """
    if not communities:
        return 0.0
    values = []
    for c in communities:
        members = c.members if isinstance(c, Community) else c
        if not members:
            raise ValueError("Invalid community: no members")
        values.append(community_cpj(members, g))
    return math.fsum(values) / len(values)


@dataclass(frozen=True)
class StructuralMetrics:
    density: float
    average_degree: float
    clustering_coefficient: float
    diameter: int

    def to_dict(self):
        return {
            "density": self.density,
            "average_degree": self.average_degree,
            "clustering_coefficient": self.clustering_coefficient,
            "diameter": self.diameter,
        }


def structural_metrics(community, g):
    """Density, average degree, mean local clustering coefficient and diameter
    of the subgraph of `g` induced by a community.

    Singleton communities have density 1, average degree 0, clustering 0 and
    diameter 0. Vertices of degree below 2 contribute a clustering of 0.

    Raises:
        ValueError: If the community is empty or not connected.
    """
    if isinstance(community, Community):
        community = community.members
    members = frozenset(community)
    n = len(members)
    if n == 0:
        raise ValueError("Invalid community: no members")
    # Induced subgraph, built from the members only
    sub = nx.Graph()
    sub.add_nodes_from(members)
    sub.add_edges_from(
        (v, u) for v in members for u in g.adjacency[v] if u in members
    )
    if not nx.is_connected(sub):
        raise ValueError("Invalid community: not connected")
    if n == 1:
        return StructuralMetrics(1.0, 0.0, 0.0, 0)

    return StructuralMetrics(
        density=nx.density(sub),
        average_degree=2.0 * sub.number_of_edges() / n,
        clustering_coefficient=nx.average_clustering(sub),
        diameter=nx.diameter(sub),
    )
