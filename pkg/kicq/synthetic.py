"""Seeded synthetic attributed graphs and query workloads for benchmarks."""

import logging

import torch

from kicq.graph import AttributedGraph

logger = logging.getLogger(__name__)

SCORE_DISTRIBUTIONS = ("uniform", "beta")


def _power_law_degrees(n_vertices, n_edges, exponent):
    # Expected degrees proportional to rank^(-1 / (exponent - 1)), which gives
    # a degree distribution with tail exponent `exponent`
    ranks = torch.arange(1, n_vertices + 1, dtype=torch.float64)
    weights = ranks ** (-1.0 / (exponent - 1.0))
    degrees = torch.round(weights / weights.sum() * 2 * n_edges).long()
    degrees = torch.clamp(degrees, min=1, max=max(n_vertices - 1, 1))
    if int(degrees.sum()) % 2 == 1:
        degrees[-1] += 1
    return degrees


def generate_attributed_graph(
    n_vertices=1000,
    n_edges=3000,
    n_keywords=50,
    exponent=2.5,
    zipf_exponent=1.0,
    max_keywords_per_vertex=3,
    score_distribution="uniform",
    beta_params=(0.5, 2.0),
    seed=0,
):
    """Generate a random attributed graph.

    The topology is a configuration model over a power-law degree sequence
    (self-loops and multi-edges removed). Every vertex draws between 1 and
    `max_keywords_per_vertex` distinct keywords with Zipf probabilities
    `p_j ~ (j + 1)^(-zipf_exponent)` and an influence score per keyword, drawn
    uniformly or from a Beta distribution.

    Args:
        n_vertices, n_edges, n_keywords (int): Target sizes. The final edge
            count is a little smaller than `n_edges`.
        exponent (float): Power-law exponent of the degree distribution,
            `> 1`.
        zipf_exponent (float): Skew of the keyword frequencies, `>= 0`.
        max_keywords_per_vertex (int): Maximum keywords per vertex.
        score_distribution (str): `"uniform"` or `"beta"`.
        beta_params (tuple): `(a, b)` of the Beta distribution.
        seed (int): Seed; identical seeds give identical graphs.

    Returns:
        An `AttributedGraph` with vertices `"v0", "v1", ...` and keywords
        `"kw0", "kw1", ...`.
    """
    if n_vertices < 1:
        raise ValueError(f"Invalid n_vertices = {n_vertices}")
    if n_edges < 0:
        raise ValueError(f"Invalid n_edges = {n_edges}")
    if n_keywords < 1:
        raise ValueError(f"Invalid n_keywords = {n_keywords}")
    if exponent <= 1.0:
        raise ValueError(f"Invalid exponent = {exponent}")
    if zipf_exponent < 0.0:
        raise ValueError(f"Invalid zipf_exponent = {zipf_exponent}")
    if max_keywords_per_vertex < 1:
        raise ValueError(
            f"Invalid max_keywords_per_vertex = {max_keywords_per_vertex}"
        )
    if score_distribution not in SCORE_DISTRIBUTIONS:
        raise ValueError(f"Invalid score_distribution = {score_distribution}")

    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(seed)

        # Topology
        if n_edges > 0 and n_vertices > 1:
            degrees = _power_law_degrees(n_vertices, n_edges, exponent)
            stubs = torch.repeat_interleave(torch.arange(n_vertices), degrees)
            stubs = stubs[torch.randperm(len(stubs))].view(-1, 2).tolist()
        else:
            stubs = []

        # Keywords
        probabilities = torch.arange(1, n_keywords + 1, dtype=torch.float64)
        probabilities = probabilities ** (-zipf_exponent)
        per_vertex = min(max_keywords_per_vertex, n_keywords)
        counts = torch.randint(1, per_vertex + 1, (n_vertices,)).tolist()
        chosen = [
            torch.multinomial(probabilities, c, replacement=False).tolist()
            for c in counts
        ]

        # Influence scores
        total = sum(counts)
        if score_distribution == "uniform":
            scores = torch.rand(total, dtype=torch.float64)
        else:
            a, b = beta_params
            dist = torch.distributions.Beta(
                torch.tensor(float(a), dtype=torch.float64),
                torch.tensor(float(b), dtype=torch.float64),
            )
            scores = dist.sample((total,))
        scores = scores.clamp(0.0, 1.0).tolist()

    vertex_records = []
    pos = 0
    for v, keywords in enumerate(chosen):
        attrs = {}
        for j in keywords:
            attrs[f"kw{j}"] = scores[pos]
            pos += 1
        vertex_records.append((f"v{v}", attrs))
    edge_records = [(f"v{a}", f"v{b}") for a, b in stubs]
    g, dropped = AttributedGraph.from_records(vertex_records, edge_records)
    logger.info(
        "Generated %s (%d self-loops or multi-edges removed)",
        g.summary(),
        dropped,
    )
    return g


def generate_query_workload(g, n_queries, terms_per_query, seed=0):
    """Draw `n_queries` lists of distinct graph keywords, each keyword chosen
    with probability proportional to the number of vertices carrying it.
    """
    if n_queries < 0:
        raise ValueError(f"Invalid n_queries = {n_queries}")
    if terms_per_query < 1:
        raise ValueError(f"Invalid terms_per_query = {terms_per_query}")
    frequency = torch.zeros(len(g.keywords), dtype=torch.float64)
    for attr in g.attrs:
        for kw, score in attr.items():
            if score > 0.0:
                frequency[kw] += 1.0
    available = int((frequency > 0).sum())
    if available == 0:
        return [[] for _ in range(n_queries)]
    size = min(terms_per_query, available)

    generator = torch.Generator().manual_seed(seed)
    workload = []
    for _ in range(n_queries):
        picked = torch.multinomial(
            frequency, size, replacement=False, generator=generator
        ).tolist()
        workload.append([g.keywords[kw] for kw in picked])
    return workload
