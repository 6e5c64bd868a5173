"""In-memory attributed graph: text ingestion, binary persistence, the
inverted keyword index and keyword extension through a similarity model.
"""

import logging
import math
from bisect import bisect_left
from warnings import warn

from kicq.binfmt import (
    SectionBuilder,
    decode_container,
    encode_container,
    read_bytes,
    write_bytes,
)
from kicq.errors import IndexFormatError, InputFormatError
from kicq.scoring import GraphStats
from kicq.utils import normalize_keyword

logger = logging.getLogger(__name__)

GRAPH_MAGIC = b"KICQG"
GRAPH_VERSION = 1
_GRAPH_SECTIONS = ["keywords", "vertices", "adjacency", "attributes"]


class AttributedGraph:
    """Undirected simple graph whose vertices carry keyword influence scores.

    Vertex ids are dense integers `0, ..., |V| - 1`. Keywords are stored as
    dense keyword ids; `keywords[i]` is the (normalized) string of keyword id
    `i`.

    Args:
        external_ids (sequence of str): External id of every vertex.
        adjacency (sequence): Neighbor ids of every vertex. Must be symmetric,
            without self-loops and without duplicates.
        attrs (sequence of dict): Mapping keyword id -> score in `[0, 1]` for
            every vertex.
        keywords (sequence of str): Keyword table, indexed by keyword id.
    """

    def __init__(self, external_ids, adjacency, attrs, keywords):
        self.external_ids = tuple(external_ids)
        self.adjacency = tuple(tuple(sorted(nb)) for nb in adjacency)
        self.attrs = tuple(dict(a) for a in attrs)
        self.keywords = tuple(keywords)

        n = len(self.external_ids)
        if len(self.adjacency) != n or len(self.attrs) != n:
            raise ValueError(
                f"Invalid graph: {n} vertices, {len(self.adjacency)} adjacency "
                f"lists, {len(self.attrs)} attribute maps"
            )
        self.keyword_ids = {kw: i for i, kw in enumerate(self.keywords)}
        if len(self.keyword_ids) != len(self.keywords):
            raise ValueError("Invalid keyword table: duplicate keywords")
        self.vertex_ids = {ext: v for v, ext in enumerate(self.external_ids)}
        if len(self.vertex_ids) != n:
            raise ValueError("Invalid vertex table: duplicate external ids")
        self._check_invariants()

        self.vertex_count = n
        self.max_degree = max((len(nb) for nb in self.adjacency), default=0)
        self.edge_count = sum(len(nb) for nb in self.adjacency) // 2

    def _check_invariants(self):
        n = len(self.external_ids)
        for v, nbrs in enumerate(self.adjacency):
            for i, u in enumerate(nbrs):
                if not 0 <= u < n:
                    raise ValueError(f"Invalid neighbor {u} of vertex {v}")
                if u == v:
                    raise ValueError(f"Invalid self-loop at vertex {v}")
                if i > 0 and nbrs[i - 1] == u:
                    raise ValueError(f"Invalid duplicate edge {v}-{u}")
                if not _has_neighbor(self.adjacency[u], v):
                    raise ValueError(f"Invalid asymmetric edge {v}-{u}")
        n_keywords = len(self.keywords)
        for v, attr in enumerate(self.attrs):
            for kw, score in attr.items():
                if not 0 <= kw < n_keywords:
                    raise ValueError(f"Invalid keyword id {kw} at vertex {v}")
                if not 0.0 <= score <= 1.0:
                    raise ValueError(f"Invalid score = {score} at vertex {v}")

    def __eq__(self, other):
        if not isinstance(other, AttributedGraph):
            return NotImplemented
        return (
            self.external_ids == other.external_ids
            and self.adjacency == other.adjacency
            and self.attrs == other.attrs
            and self.keywords == other.keywords
        )

    def __repr__(self):
        return (
            f"AttributedGraph({self.vertex_count} vertices, "
            f"{self.edge_count} edges, {len(self.keywords)} keywords)"
        )

    @property
    def stats(self):
        return GraphStats(self.vertex_count, self.max_degree)

    def degree(self, v):
        return len(self.adjacency[v])

    def keyword_id(self, keyword):
        """Keyword id of `keyword` (normalized first), or `None`."""
        return self.keyword_ids.get(normalize_keyword(keyword))

    def keywords_of(self, v):
        """Keyword ids carried by `v` with a positive score."""
        return frozenset(kw for kw, s in self.attrs[v].items() if s > 0.0)

    def summary(self):
        return (
            f"{self.vertex_count} vertices, {self.edge_count} edges, "
            f"{len(self.keywords)} keywords"
        )

    @classmethod
    def from_records(cls, vertex_records, edge_records):
        """Build a graph from external ids.

        Args:
            vertex_records (iterable): `(external_id, {keyword: score})` pairs.
                Keyword strings are normalized; after normalization, duplicate
                keywords of one vertex keep the maximum score.
            edge_records (iterable): `(external_u, external_v)` pairs. Self-
                loops and duplicate edges are dropped.

        Returns:
            A tuple `(graph, dropped)` where `dropped` counts ignored edges.
        """
        builder = _GraphBuilder()
        for ext, attributes in vertex_records:
            builder.add_vertex(ext, attributes.items())
        for u, v in edge_records:
            builder.add_edge(u, v)
        return builder.build(), builder.dropped_edges


def _has_neighbor(nbrs, v):
    i = bisect_left(nbrs, v)
    return i < len(nbrs) and nbrs[i] == v


class _GraphBuilder:
    """Collects vertices, attributes and edges in input order."""

    def __init__(self):
        self.external_ids = []
        self.vertex_ids = {}
        self.attrs = []
        self.keywords = []
        self.keyword_ids = {}
        self.neighbors = []
        self.dropped_edges = 0

    def add_vertex(self, ext, attributes, path=None, line=None):
        if ext in self.vertex_ids:
            raise InputFormatError(f"duplicate vertex id '{ext}'", path, line)
        self.vertex_ids[ext] = len(self.external_ids)
        self.external_ids.append(ext)
        attr = {}
        for keyword, score in attributes:
            if not (math.isfinite(score) and 0.0 <= score <= 1.0):
                raise InputFormatError(
                    f"score out of range: {score}", path, line
                )
            keyword = normalize_keyword(keyword)
            if not keyword:
                raise InputFormatError("empty keyword", path, line)
            kw = self.keyword_ids.get(keyword)
            if kw is None:
                kw = self.keyword_ids[keyword] = len(self.keywords)
                self.keywords.append(keyword)
            attr[kw] = max(attr.get(kw, 0.0), score)
        self.attrs.append(attr)
        self.neighbors.append(set())

    def add_edge(self, ext_u, ext_v, path=None, line=None):
        for ext in (ext_u, ext_v):
            if ext not in self.vertex_ids:
                raise InputFormatError(
                    f"edge references unknown vertex id '{ext}'", path, line
                )
        u, v = self.vertex_ids[ext_u], self.vertex_ids[ext_v]
        if u == v or v in self.neighbors[u]:
            self.dropped_edges += 1
            return
        self.neighbors[u].add(v)
        self.neighbors[v].add(u)

    def build(self):
        return AttributedGraph(
            self.external_ids, self.neighbors, self.attrs, self.keywords
        )


# ------------------------------------------------------------------------------
# Text ingestion
# ------------------------------------------------------------------------------


def _parse_attributes(text, path, line):
    attributes = []
    text = text.strip()
    if not text:
        return attributes
    for item in text.split(","):
        keyword, sep, score = item.rpartition(":")
        if not sep or not keyword.strip():
            raise InputFormatError(
                f"malformed attribute '{item}', expected <kw>:<score>",
                path,
                line,
            )
        try:
            value = float(score)
        except ValueError:
            raise InputFormatError(
                f"malformed score '{score}'", path, line
            ) from None
        attributes.append((keyword, value))
    return attributes


def load_graph(vertices_path, edges_path):
    """Load an attributed graph from the text formats.

    Vertices file: `<vertex_id>\\t<kw>:<score>,<kw>:<score>,...` per line, the
    attribute list may be empty. Edges file: `<u_id>\\t<v_id>` per line. Blank
    lines are ignored. Dense vertex ids follow the order of the vertices file,
    keyword ids the order of first appearance.

    Raises:
        InputFormatError: On malformed lines (with line number), scores outside
            `[0, 1]`, duplicate vertex ids and edges to unknown vertices.
    """
    builder = _GraphBuilder()
    with open(vertices_path, encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            line = line.rstrip("\r\n")
            if not line.strip():
                continue
            ext, tab, rest = line.partition("\t")
            ext = ext.strip()
            # Attributes always follow a tab
            if not tab and ":" in ext:
                raise InputFormatError(
                    "expected <vertex_id>\\t<attributes>, found no tab",
                    vertices_path,
                    line_no,
                )
            if not ext:
                raise InputFormatError(
                    "missing vertex id", vertices_path, line_no
                )
            attributes = _parse_attributes(rest, vertices_path, line_no)
            builder.add_vertex(ext, attributes, vertices_path, line_no)

    with open(edges_path, encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            if not line.strip():
                continue
            # Ids may contain spaces, only tabs separate fields
            fields = line.rstrip("\r\n").split("\t")
            fields = [field.strip() for field in fields]
            if len(fields) != 2:
                raise InputFormatError(
                    f"expected 2 tab-separated fields, got {len(fields)}",
                    edges_path,
                    line_no,
                )
            if not all(fields):
                raise InputFormatError(
                    "missing vertex id", edges_path, line_no
                )
            builder.add_edge(fields[0], fields[1], edges_path, line_no)

    if builder.dropped_edges:
        warn(
            f"Dropped {builder.dropped_edges} self-loops or duplicate edges "
            f"from {edges_path}"
        )
    g = builder.build()
    logger.info("Loaded graph: %s", g.summary())
    return g


def write_graph_text(g, vertices_path, edges_path):
    """Write `g` in the text formats read by `load_graph`."""
    with open(vertices_path, "w", encoding="utf-8") as f:
        for v in range(g.vertex_count):
            attrs = ",".join(
                f"{g.keywords[kw]}:{score!r}"
                for kw, score in sorted(g.attrs[v].items())
            )
            f.write(f"{g.external_ids[v]}\t{attrs}\n")
    with open(edges_path, "w", encoding="utf-8") as f:
        for v in range(g.vertex_count):
            for u in g.adjacency[v]:
                if v < u:
                    f.write(f"{g.external_ids[v]}\t{g.external_ids[u]}\n")


# ------------------------------------------------------------------------------
# Binary persistence
# ------------------------------------------------------------------------------


def encode_graph(g):
    """Serialize `g` into the canonical `KICQG` container (bytes)."""
    keywords = SectionBuilder()
    keywords.u32(len(g.keywords))
    for keyword in g.keywords:
        keywords.string(keyword)

    vertices = SectionBuilder()
    vertices.u32(g.vertex_count)
    for ext in g.external_ids:
        vertices.string(ext)

    adjacency = SectionBuilder()
    for nbrs in g.adjacency:
        adjacency.u32(len(nbrs))
        adjacency.u32_array(nbrs)

    attributes = SectionBuilder()
    for attr in g.attrs:
        attributes.u32(len(attr))
        for kw, score in sorted(attr.items()):
            attributes.u32(kw)
            attributes.f64(score)

    sections = [keywords, vertices, adjacency, attributes]
    return encode_container(
        GRAPH_MAGIC, GRAPH_VERSION, [s.getvalue() for s in sections]
    )


def decode_graph(data):
    """Inverse of `encode_graph`. The maximum degree is recomputed."""
    keywords, vertices, adjacency, attributes = decode_container(
        data, GRAPH_MAGIC, GRAPH_VERSION, _GRAPH_SECTIONS
    )
    keyword_table = [keywords.string() for _ in range(keywords.u32())]
    keywords.finish()

    n = vertices.u32()
    external_ids = [vertices.string() for _ in range(n)]
    vertices.finish()

    neighbors = [adjacency.u32_array(adjacency.u32()) for _ in range(n)]
    adjacency.finish()

    attrs = []
    for _ in range(n):
        attr = {}
        for _ in range(attributes.u32()):
            kw = attributes.u32()
            attr[kw] = attributes.f64()
        attrs.append(attr)
    attributes.finish()

    try:
        return AttributedGraph(external_ids, neighbors, attrs, keyword_table)
    except ValueError as err:
        raise IndexFormatError(f"inconsistent graph file: {err}") from err


def persist_graph(g, path):
    """Write `g` to `path` as a `KICQG` file."""
    write_bytes(path, encode_graph(g))


def load_persisted_graph(path):
    """Read a graph written by `persist_graph`."""
    g = decode_graph(read_bytes(path))
    logger.info("Loaded persisted graph %s: %s", path, g.summary())
    return g


# ------------------------------------------------------------------------------
# Inverted index
# ------------------------------------------------------------------------------


class InvertedIndex:
    """Keyword id -> ascending tuple of vertices with a positive score."""

    def __init__(self, lists):
        self.lists = dict(lists)

    def __len__(self):
        return len(self.lists)

    def __contains__(self, kw):
        return kw in self.lists

    def get(self, kw):
        return self.lists.get(kw, ())

    def vertices(self, keyword_ids):
        """Union of the lists of `keyword_ids`."""
        result = set()
        for kw in keyword_ids:
            result.update(self.get(kw))
        return result


def build_inverted_index(g):
    """Build the inverted index of `g`. Zero-score entries are not indexed."""
    lists = {}
    for v in range(g.vertex_count):
        for kw, score in g.attrs[v].items():
            if score > 0.0:
                lists.setdefault(kw, []).append(v)
    return InvertedIndex({kw: tuple(vs) for kw, vs in sorted(lists.items())})


# ------------------------------------------------------------------------------
# Keyword extension
# ------------------------------------------------------------------------------


def keyword_expansions(g, sim, M):
    """Compute `X_t` for every keyword `t` of `g`: its `M` most similar
    keywords among the graph keywords the model can resolve.

    Returns:
        A tuple `(expansions, skipped)` where `expansions` maps keyword id to a
        tuple of keyword ids and `skipped` lists the keywords that are absent
        from the embedding vocabulary.
    """
    # Local import, `semantics` is only needed for extension
    from kicq.semantics import top_m_similar

    if M < 0:
        raise ValueError(f"Invalid M = {M}")
    universe = [kw for kw in g.keywords if sim.can_resolve(kw)]
    skipped = [kw for kw in g.keywords if not sim.can_resolve(kw)]
    expansions = {}
    if M == 0:
        return expansions, skipped
    for keyword in universe:
        ranked = top_m_similar(sim, keyword, universe, M)
        expansions[g.keyword_ids[keyword]] = tuple(
            g.keyword_ids[w] for w in ranked
        )
    return expansions, skipped


def extend_graph_keywords(g, sim, M):
    """Extend every vertex keyword `t` with its `M` most similar graph keywords
    `X_t`: each `w` in `X_t` gains `s_v(w) = s_v(t)`, keeping the maximum when
    `v` already carries `w`. Keywords unknown to the embedding vocabulary are
    skipped with a warning.

    Args:
        g (AttributedGraph): The graph to extend.
        sim (SimilarityModel): Similarity model covering the keywords.
        M (int): Number of similar keywords per keyword, `M >= 0`.

    Returns:
        A new `AttributedGraph` with the same vertices, edges and keyword
        table and the extended attributes.
    """
    # `X_t` once per keyword, not once per vertex
    expansions, skipped = keyword_expansions(g, sim, M)
    if skipped:
        warn(
            f"{len(skipped)} keywords are absent from the embedding vocabulary "
            "and were not extended"
        )

    attrs = []
    added = 0
    for attr in g.attrs:
        extended = dict(attr)
        # Only original keywords are expanded, added ones are not
        for t, score in attr.items():
            for w in expansions.get(t, ()):
                # Keep the larger score when `w` is already present
                if w not in extended:
                    added += 1
                    extended[w] = score
                elif score > extended[w]:
                    extended[w] = score
        attrs.append(extended)
    logger.info(
        "Extended graph keywords: %d attributes added, %d keywords skipped",
        added,
        len(skipped),
    )
    return AttributedGraph(g.external_ids, g.adjacency, attrs, g.keywords)
