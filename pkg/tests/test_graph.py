"""Test graph ingestion, binary persistence, the inverted index and keyword
extension.
"""

import pytest
import torch
from test_utils import graph_from_edges, random_graph

from kicq.errors import ChecksumError, IndexFormatError, InputFormatError
from kicq.graph import (
    AttributedGraph,
    build_inverted_index,
    decode_graph,
    encode_graph,
    extend_graph_keywords,
    keyword_expansions,
    load_graph,
    load_persisted_graph,
    persist_graph,
    write_graph_text,
)
from kicq.semantics import SimilarityModel

SEEDS = list(range(20))
SEEDS_IDS = [f"seed = {s}" for s in SEEDS]


def write_files(tmp_path, vertices, edges):
    vertices_path = tmp_path / "vertices.tsv"
    edges_path = tmp_path / "edges.tsv"
    vertices_path.write_text(vertices, encoding="utf-8")
    edges_path.write_text(edges, encoding="utf-8")
    return str(vertices_path), str(edges_path)


def test_load_graph(tmp_path):
    """Load a small graph and check ids, keywords and attributes."""

    print("\n===== RUN `test_load_graph` =====")

    vertices = "a\tML:0.5,db:0.25\nb\tml:0.75, Machine  Learning:1\n\nc\t\n"
    edges = "a\tb\nb c\nc\ta\n"
    g = load_graph(*write_files(tmp_path, vertices, edges))

    assert g.summary() == "3 vertices, 3 edges, 3 keywords"
    assert g.external_ids == ("a", "b", "c")
    assert g.keywords == ("ml", "db", "machine learning")
    assert g.attrs[0] == {0: 0.5, 1: 0.25}
    assert g.attrs[1] == {0: 0.75, 2: 1.0}
    assert g.attrs[2] == {}
    assert g.adjacency == ((1, 2), (0, 2), (0, 1))
    assert g.max_degree == 2
    assert g.keyword_id(" Machine Learning ") == 2
    assert g.keyword_id("unknown") is None


def test_load_graph_duplicates(tmp_path):
    """Repeated keywords keep the maximum score, self-loops and duplicate
    edges are dropped with a warning.
    """

    print("\n===== RUN `test_load_graph_duplicates` =====")

    vertices = "a\tml:0.25,ML:0.5\nb\t\n"
    edges = "a\tb\nb\ta\na\ta\n"
    with pytest.warns(UserWarning, match="Dropped 2"):
        g = load_graph(*write_files(tmp_path, vertices, edges))
    assert g.attrs[0] == {0: 0.5}
    assert g.edge_count == 1


def test_load_graph_ids_with_spaces(tmp_path):
    """Vertex ids may contain spaces, in both files."""

    print("\n===== RUN `test_load_graph_ids_with_spaces` =====")

    vertices = "new york\tcity:0.5\nboston\tcity:0.25\nla\n"
    edges = "new york\tboston\n boston \t la \n"
    g = load_graph(*write_files(tmp_path, vertices, edges))
    assert g.external_ids == ("new york", "boston", "la")
    assert g.adjacency == ((1,), (0, 2), (1,))
    assert g.attrs[2] == {}


BAD_INPUTS = [
    ("a\tml:1.5\n", "", "vertices", 1),
    ("a\tml:0.5\na\t\n", "", "vertices", 2),
    ("a\tml\n", "", "vertices", 1),
    ("a\tml:x\n", "", "vertices", 1),
    ("a\t\nb\t\n", "a\tb\na\tz\n", "edges", 2),
    ("a\t\nb\t\n", "a\tb\tc\n", "edges", 1),
    ("a\t\nb ml:0.5\n", "", "vertices", 2),
    ("a\t\nb\t\n", "a b\n", "edges", 1),
    ("a\t\nb\t\n", "a\t \n", "edges", 1),
]
BAD_INPUTS_IDS = [
    "score out of range",
    "duplicate vertex",
    "missing score",
    "malformed score",
    "unknown vertex",
    "three fields",
    "vertex line without tab",
    "edge line without tab",
    "empty edge field",
]


@pytest.mark.parametrize("bad_input", BAD_INPUTS, ids=BAD_INPUTS_IDS)
def test_load_graph_errors(tmp_path, bad_input):
    """Malformed files raise `InputFormatError` naming file and line."""

    print("\n===== RUN `test_load_graph_errors` =====")

    vertices, edges, which, line = bad_input
    vertices_path, edges_path = write_files(tmp_path, vertices, edges)
    with pytest.raises(InputFormatError) as info:
        load_graph(vertices_path, edges_path)
    path = vertices_path if which == "vertices" else edges_path
    assert info.value.path == path
    assert info.value.line == line
    assert f"{path}:{line}:" in str(info.value)


def test_graph_invariants():
    """The constructor rejects asymmetric adjacency and bad scores."""

    print("\n===== RUN `test_graph_invariants` =====")

    with pytest.raises(ValueError):
        AttributedGraph(["a", "b"], [[1], []], [{}, {}], [])
    with pytest.raises(ValueError):
        AttributedGraph(["a"], [[0]], [{}], [])
    with pytest.raises(ValueError):
        AttributedGraph(["a"], [[]], [{0: 2.0}], ["ml"])
    with pytest.raises(ValueError):
        AttributedGraph(["a", "a"], [[], []], [{}, {}], [])


@pytest.mark.parametrize("seed", SEEDS, ids=SEEDS_IDS)
def test_persistence_roundtrip(tmp_path, seed):
    """Persisting and reloading yields an equal graph with byte-identical
    encodings. Text output reloads to the same graph.
    """

    print(f"\n===== RUN `test_persistence_roundtrip` seed={seed} =====")

    g = random_graph(5 + seed, 3 * (5 + seed), seed=seed)
    path = tmp_path / "graph.kicqg"
    persist_graph(g, path)
    loaded = load_persisted_graph(path)
    assert loaded == g
    assert loaded.max_degree == g.max_degree
    assert encode_graph(loaded) == path.read_bytes()

    vertices_path = tmp_path / "vertices.tsv"
    edges_path = tmp_path / "edges.tsv"
    write_graph_text(g, vertices_path, edges_path)
    assert load_graph(vertices_path, edges_path) == g


def test_persistence_corruption():
    """Flipped bytes, truncation and a wrong magic are detected."""

    print("\n===== RUN `test_persistence_corruption` =====")

    data = encode_graph(random_graph(10, 20, seed=3))
    corrupted = bytearray(data)
    corrupted[len(data) // 2] ^= 0xFF
    with pytest.raises(ChecksumError):
        decode_graph(bytes(corrupted))
    with pytest.raises(ChecksumError):
        decode_graph(data[:-10])
    with pytest.raises(ChecksumError):
        decode_graph(data[:3])
    with pytest.raises(IndexFormatError):
        decode_graph(b"XXXXX" + data[5:])


def test_inverted_index():
    """Lists are ascending and exclude zero scores."""

    print("\n===== RUN `test_inverted_index` =====")

    g = graph_from_edges(
        4,
        [(0, 1)],
        {0: {"ml": 0.5}, 1: {"ml": 0.0, "db": 0.2}, 3: {"ml": 1.0}},
    )
    idx = build_inverted_index(g)
    ml, db = g.keyword_id("ml"), g.keyword_id("db")
    assert idx.get(ml) == (0, 3)
    assert idx.get(db) == (1,)
    assert idx.get(99) == ()
    assert idx.vertices([ml, db]) == {0, 1, 3}
    assert len(idx) == 2 and ml in idx


def make_model(L=1):
    # "ml" and "learning" point the same way, "db" is orthogonal
    words = ["ml", "learning", "db", "data"]
    vectors = torch.tensor(
        [[1.0, 0.0, 0.0], [0.9, 0.1, 0.0], [0.0, 1.0, 0.0], [0.0, 0.9, 0.2]],
        dtype=torch.float64,
    )
    return SimilarityModel(words, vectors, L=L, metric="cosine")


def test_extend_graph_keywords():
    """Every keyword gains its 2 most similar graph keywords with the same
    score, existing higher scores are kept, unknown keywords are skipped.
    """

    print("\n===== RUN `test_extend_graph_keywords` =====")

    g = graph_from_edges(
        3,
        [(0, 1), (1, 2)],
        {
            0: {"ml": 0.5},
            1: {"learning": 0.25, "ml": 0.75},
            2: {"db": 0.5, "zzz": 1.0},
        },
    )
    ml, learning = g.keyword_id("ml"), g.keyword_id("learning")
    db, zzz = g.keyword_id("db"), g.keyword_id("zzz")

    expansions, skipped = keyword_expansions(g, make_model(), 2)
    assert skipped == ["zzz"]
    # A keyword is its own most similar keyword
    assert expansions[ml] == (ml, learning)
    assert expansions[learning] == (learning, ml)
    assert expansions[db] == (db, learning)

    with pytest.warns(UserWarning, match="1 keywords"):
        extended = extend_graph_keywords(g, make_model(), 2)
    assert extended.attrs[0] == {ml: 0.5, learning: 0.5}
    assert extended.attrs[1] == {learning: 0.75, ml: 0.75}
    assert extended.attrs[2] == {db: 0.5, zzz: 1.0, learning: 0.5}
    assert extended.adjacency == g.adjacency
    assert extended.keywords == g.keywords
    with pytest.warns(UserWarning):
        unchanged = extend_graph_keywords(g, make_model(), 0)
    assert unchanged.attrs == g.attrs


def named_attrs(g):
    return [{g.keywords[kw]: s for kw, s in attr.items()} for attr in g.attrs]


def random_closed_attrs(seed):
    # Attributes over the two closed pairs {ml, learning} and {db, data}
    gen = torch.Generator().manual_seed(seed)
    words = ["ml", "learning", "db", "data"]
    attrs = {}
    for v in range(6):
        mask = torch.rand(len(words), generator=gen) < 0.5
        scores = torch.rand(len(words), generator=gen, dtype=torch.float64)
        attrs[v] = {
            w: scores[i].item() for i, w in enumerate(words) if mask[i]
        }
    # Every keyword occurs somewhere, so the universe is all four words
    attrs[6] = {w: 0.5 for w in words}
    return attrs


@pytest.mark.parametrize("seed", SEEDS, ids=SEEDS_IDS)
def test_extend_graph_keywords_order_independent(seed):
    """Reversing the insertion order of the keywords does not change the
    extended attributes.
    """

    print(
        f"\n===== RUN `test_extend_graph_keywords_order_independent` "
        f"seed={seed} ====="
    )

    edges = [(v, v + 1) for v in range(6)]
    attrs = random_closed_attrs(seed)
    reversed_attrs = {
        v: dict(reversed(list(attr.items()))) for v, attr in attrs.items()
    }
    forward = graph_from_edges(7, edges, attrs)
    backward = graph_from_edges(7, edges, reversed_attrs)
    forward = extend_graph_keywords(forward, make_model(), 2)
    backward = extend_graph_keywords(backward, make_model(), 2)
    assert named_attrs(forward) == named_attrs(backward)

    # The existing higher score wins in both orders
    for order in (["ml", "learning"], ["learning", "ml"]):
        scores = {"ml": 0.7, "learning": 0.9}
        g = graph_from_edges(1, [], {0: {w: scores[w] for w in order}})
        extended = extend_graph_keywords(g, make_model(), 2)
        assert named_attrs(extended) == [{"ml": 0.9, "learning": 0.9}]


@pytest.mark.parametrize("seed", SEEDS, ids=SEEDS_IDS)
def test_extend_graph_keywords_idempotent(seed):
    """With similar-keyword sets that map back into the present keywords, a
    second extension changes nothing.
    """

    print(
        f"\n===== RUN `test_extend_graph_keywords_idempotent` seed={seed} ====="
    )

    edges = [(v, v + 1) for v in range(6)]
    g = graph_from_edges(7, edges, random_closed_attrs(seed))
    expansions, _ = keyword_expansions(g, make_model(), 2)
    ml, learning = g.keyword_id("ml"), g.keyword_id("learning")
    db, data = g.keyword_id("db"), g.keyword_id("data")
    assert expansions == {
        ml: (ml, learning),
        learning: (learning, ml),
        db: (db, data),
        data: (data, db),
    }

    once = extend_graph_keywords(g, make_model(), 2)
    twice = extend_graph_keywords(once, make_model(), 2)
    assert twice == once
