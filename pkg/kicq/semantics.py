"""Embedding-backed keyword similarity and the metrics used to evaluate it.

A term (a keyword or a phrase) is represented by the mean of the embedding
vectors of its in-vocabulary words. Two terms are compared either by the
cosine of their term vectors or by the "indirect cosine": the cosine of their
similarity profiles over the union of their `L` nearest vocabulary words.
"""

import logging
import math
from collections import namedtuple
from warnings import warn

import torch

from kicq.errors import (
    DegenerateVectorError,
    InputFormatError,
    UnknownTermError,
)
from kicq.utils import normalize_keyword, rank_by_score, split_term

logger = logging.getLogger(__name__)

METRICS = ("cosine", "indirect_cosine")


class SimilarityModel:
    """Word embeddings plus the parameters of the similarity metric.

    Args:
        words (sequence of str): The vocabulary. Words are normalized and must
            be unique afterwards.
        vectors (torch.Tensor): Embedding matrix of shape `(len(words), d)`,
            `d > 0`. Stored in double precision.
        L (int): Neighborhood size of the indirect cosine, `L >= 1`.
        metric (str): `"cosine"` or `"indirect_cosine"`, the metric used by
            `similarity` and `top_m_similar`.
    """

    def __init__(self, words, vectors, L=15, metric="indirect_cosine"):
        if not isinstance(vectors, torch.Tensor):
            raise TypeError("vectors must be a torch.Tensor")
        if vectors.dim() != 2 or vectors.shape[1] == 0:
            raise ValueError(f"Invalid vectors shape = {tuple(vectors.shape)}")
        if vectors.shape[0] != len(words):
            raise ValueError(
                f"Invalid vocabulary: {len(words)} words, "
                f"{vectors.shape[0]} vectors"
            )
        if L < 1:
            raise ValueError(f"Invalid L = {L}")
        if metric not in METRICS:
            raise ValueError(f"Invalid metric = {metric}")

        self.words = tuple(normalize_keyword(w) for w in words)
        self.word_index = {w: i for i, w in enumerate(self.words)}
        if len(self.word_index) != len(self.words):
            raise ValueError("Invalid vocabulary: duplicate words")
        self.vectors = vectors.detach().to(torch.float64)
        self.L = L
        self.metric = metric

        norms = torch.linalg.norm(self.vectors, dim=1)
        self._valid = norms > 0
        self._unit = self.vectors / torch.where(
            self._valid, norms, torch.ones_like(norms)
        ).unsqueeze(1)
        self._neighbor_cache = {}

    def __len__(self):
        return len(self.words)

    def with_params(self, L=None, metric=None):
        """A model sharing the embeddings, with other `L` and/or `metric`."""
        other = object.__new__(SimilarityModel)
        other.__dict__.update(self.__dict__)
        other.L = self.L if L is None else L
        other.metric = self.metric if metric is None else metric
        if other.L < 1:
            raise ValueError(f"Invalid L = {other.L}")
        if other.metric not in METRICS:
            raise ValueError(f"Invalid metric = {other.metric}")
        return other

    def known_words(self, term):
        return [w for w in split_term(term) if w in self.word_index]

    def can_resolve(self, term):
        return bool(self.known_words(term))

    def term_vector(self, term):
        return term_vector(self, term)

    def neighbors(self, term, L=None):
        """The `L` vocabulary words most cosine-similar to `term`, excluding
        the term's own words, as a tuple of `(word, similarity)` pairs ranked
        by similarity (ties: ascending word).
        """
        L = self.L if L is None else L
        words = tuple(self.known_words(term))
        if not words:
            raise UnknownTermError(term)
        key = (words, L)
        if key not in self._neighbor_cache:
            self._neighbor_cache[key] = self._compute_neighbors(words, L)
        return self._neighbor_cache[key]

    def _compute_neighbors(self, words, L):
        x = self.vectors[[self.word_index[w] for w in words]].mean(dim=0)
        norm = torch.linalg.norm(x)
        if norm == 0:
            raise DegenerateVectorError(f"term {' '.join(words)} has norm 0")
        scores = self._unit @ (x / norm)
        excluded = ~self._valid
        excluded[[self.word_index[w] for w in words]] = True
        scores = scores.masked_fill(excluded, -math.inf)

        available = int((~excluded).sum())
        size = min(L, available)
        if size == 0:
            return ()
        # Every word scoring at least the size-th best is a candidate, so that
        # ties at the cut are resolved by word order and not by `topk`.
        kth = torch.topk(scores, size).values[-1]
        candidates = torch.nonzero(scores >= kth).flatten().tolist()
        ranked = rank_by_score(
            [self.words[i] for i in candidates],
            [scores[i].item() for i in candidates],
        )
        return tuple(ranked[:size])

    def similarity(self, t1, t2):
        if self.metric == "cosine":
            return cosine_similarity(self, t1, t2)
        return indirect_cosine_similarity(self, t1, t2)


def load_embeddings(path, L=15, metric="indirect_cosine"):
    """Read a text embedding file: a header `<vocab_size> <dimension>` and one
    line `<word> <f1> ... <fd>` per word. Words are normalized; repeated words
    keep their first vector.

    Raises:
        InputFormatError: On a malformed header or line, or a word count that
            does not match the header.
    """
    words, rows = [], []
    seen = set()
    duplicates = 0
    with open(path, encoding="utf-8") as f:
        header = f.readline().split()
        try:
            size, dim = (int(x) for x in header)
        except ValueError:
            raise InputFormatError(
                "expected header '<vocab_size> <dimension>'", path, 1
            ) from None
        if dim <= 0 or size < 0:
            raise InputFormatError(f"invalid header {size} {dim}", path, 1)
        for line_no, line in enumerate(f, start=2):
            fields = line.split()
            if not fields:
                continue
            if len(fields) != dim + 1:
                raise InputFormatError(
                    f"expected {dim + 1} fields, got {len(fields)}",
                    path,
                    line_no,
                )
            try:
                row = [float(x) for x in fields[1:]]
            except ValueError:
                raise InputFormatError(
                    "malformed vector component", path, line_no
                ) from None
            word = normalize_keyword(fields[0])
            if word in seen:
                duplicates += 1
                continue
            seen.add(word)
            words.append(word)
            rows.append(row)
    if len(words) + duplicates != size:
        raise InputFormatError(
            f"header declares {size} words, found {len(words) + duplicates}",
            path,
        )
    if duplicates:
        warn(f"Ignored {duplicates} repeated words in {path}")
    vectors = torch.tensor(rows, dtype=torch.float64).reshape(len(rows), dim)
    logger.info("Loaded %d embeddings of dimension %d", len(words), dim)
    return SimilarityModel(words, vectors, L=L, metric=metric)


# ------------------------------------------------------------------------------
# Similarities
# ------------------------------------------------------------------------------


def term_vector(model, term):
    """Mean vector of the in-vocabulary words of `term`.

    Raises:
        UnknownTermError: If no word of `term` is in the vocabulary.
    """
    words = model.known_words(term)
    if not words:
        raise UnknownTermError(term)
    return model.vectors[[model.word_index[w] for w in words]].mean(dim=0)


def _cosine(a, b):
    # dot(a, a) and dot(b, b) reduce in the same order as dot(a, b), which
    # makes cos(a, a) exactly 1 and the value symmetric
    denominator = torch.sqrt(torch.dot(a, a) * torch.dot(b, b))
    if denominator == 0:
        raise DegenerateVectorError("cosine of a zero-norm vector")
    value = (torch.dot(a, b) / denominator).item()
    return min(1.0, max(-1.0, value))


def cosine_similarity(model, t1, t2):
    """Cosine of the term vectors of `t1` and `t2`."""
    return _cosine(term_vector(model, t1), term_vector(model, t2))


def _sparse_cosine(p1, p2):
    norm1 = math.fsum(s * s for s in p1.values())
    norm2 = math.fsum(s * s for s in p2.values())
    denominator = math.sqrt(norm1 * norm2)
    if denominator == 0:
        raise DegenerateVectorError("similarity profile with norm 0")
    dot = math.fsum(p1[w] * p2[w] for w in p1.keys() & p2.keys())
    return min(1.0, max(-1.0, dot / denominator))


def indirect_cosine_similarity(model, t1, t2):
    """Cosine of the similarity profiles of `t1` and `t2`. The profile of a
    term holds the raw cosine similarities of its `model.L` nearest words and
    is zero on the other words of the union of both neighborhoods.
    """
    p1 = dict(model.neighbors(t1))
    p2 = dict(model.neighbors(t2))
    return _sparse_cosine(p1, p2)


def top_m_similar(model, term, keyword_universe, M):
    """The `M` keywords of `keyword_universe` most similar to `term` under the
    model's metric, by descending similarity, ties by ascending keyword.
    Keywords the model cannot resolve are ignored.

    Raises:
        UnknownTermError: If `term` cannot be resolved.
    """
    if M < 1:
        raise ValueError(f"Invalid M = {M}")
    if not model.can_resolve(term):
        raise UnknownTermError(term)
    universe = sorted({normalize_keyword(kw) for kw in keyword_universe})
    universe = [kw for kw in universe if model.can_resolve(kw)]
    scores = [model.similarity(term, kw) for kw in universe]
    return [kw for kw, _ in rank_by_score(universe, scores)[:M]]


# ------------------------------------------------------------------------------
# Neighborhood quality
# ------------------------------------------------------------------------------


def word_coherence(model, term, L):
    """Mean pairwise cosine similarity of the `L` nearest words of `term`."""
    if L < 2:
        raise ValueError(f"Invalid L = {L}: insufficient words")
    words = [w for w, _ in model.neighbors(term, L)]
    if len(words) < 2:
        raise ValueError(f"insufficient words: '{term}' has {len(words)}")
    vectors = [model.vectors[model.word_index[w]] for w in words]
    values = [
        _cosine(vectors[i], vectors[j])
        for i in range(len(vectors))
        for j in range(i + 1, len(vectors))
    ]
    return math.fsum(values) / len(values)


def davies_bouldin(model, terms, L):
    """Davies-Bouldin index with Euclidean distances. Every term is a cluster
    made of its `L` nearest words, centered at the term vector.

    Raises:
        DegenerateVectorError: If two terms have the same term vector.
    """
    if len(terms) < 2:
        raise ValueError(f"Invalid terms: need at least 2, got {len(terms)}")
    centroids = []
    scatters = []
    for term in terms:
        centroid = term_vector(model, term)
        words = [w for w, _ in model.neighbors(term, L)]
        if not words:
            raise ValueError(f"insufficient words: '{term}' has none")
        points = model.vectors[[model.word_index[w] for w in words]]
        distances = torch.linalg.norm(points - centroid, dim=1)
        centroids.append(centroid)
        scatters.append(math.fsum(distances.tolist()) / len(words))

    ratios = []
    for i in range(len(terms)):
        worst = 0.0
        for j in range(len(terms)):
            if i == j:
                continue
            separation = torch.linalg.norm(centroids[i] - centroids[j]).item()
            if separation == 0:
                raise DegenerateVectorError(
                    f"degenerate clustering: '{terms[i]}' and '{terms[j]}' "
                    "share a centroid"
                )
            worst = max(worst, (scatters[i] + scatters[j]) / separation)
        ratios.append(worst)
    return math.fsum(ratios) / len(ratios)


SweepRow = namedtuple("SweepRow", ["L", "coherence", "davies_bouldin"])


def neighborhood_size_sweep(model, terms, sizes):
    """Mean word coherence and Davies-Bouldin index of `terms` for every
    neighborhood size in `sizes`.
    """
    rows = []
    for L in sizes:
        coherence = math.fsum(word_coherence(model, t, L) for t in terms)
        rows.append(
            SweepRow(L, coherence / len(terms), davies_bouldin(model, terms, L))
        )
    return rows


# ------------------------------------------------------------------------------
# Taxonomy ground truth and ranking quality
# ------------------------------------------------------------------------------


class Taxonomy:
    """A rooted topic tree.

    Args:
        edges (iterable): `(parent, child)` topic pairs. Topics are
            normalized.

    Raises:
        ValueError: If a topic has two parents, there is not exactly one
            parentless topic or some topic is not reachable from the root.
    """

    def __init__(self, edges):
        self.parent = {}
        self.children = {}
        for parent, child in edges:
            parent, child = normalize_keyword(parent), normalize_keyword(child)
            if child in self.parent and self.parent[child] != parent:
                raise ValueError(f"Invalid taxonomy: '{child}' has 2 parents")
            if parent == child:
                raise ValueError(f"Invalid taxonomy: '{child}' is its parent")
            self.parent[child] = parent
            self.children.setdefault(parent, set()).add(child)
            self.children.setdefault(child, set())
        roots = sorted(t for t in self.children if t not in self.parent)
        if len(roots) != 1:
            raise ValueError(f"Invalid taxonomy: roots {roots}")
        self.root = roots[0]

        # Depths and descendant counts, iteratively from the root
        self.depth = {self.root: 0}
        order = [self.root]
        for topic in order:
            for child in sorted(self.children[topic]):
                self.depth[child] = self.depth[topic] + 1
                order.append(child)
        if len(order) != len(self.children):
            raise ValueError("Invalid taxonomy: cycle or unreachable topics")
        self.descendants = {}
        for topic in reversed(order):
            self.descendants[topic] = sum(
                self.descendants[c] + 1 for c in self.children[topic]
            )

    def __len__(self):
        return len(self.children)

    def __contains__(self, topic):
        return normalize_keyword(topic) in self.children

    @property
    def topics(self):
        return sorted(self.children)

    def _topic(self, topic):
        topic = normalize_keyword(topic)
        if topic not in self.children:
            raise ValueError(f"Invalid topic = '{topic}'")
        return topic

    def information_content(self, topic):
        """`log((|descendants| + 1) / |T|) / log(1 / |T|)`, in `[0, 1]`."""
        topic = self._topic(topic)
        size = len(self)
        if size == 1:
            return 1.0
        return math.log((self.descendants[topic] + 1) / size) / math.log(
            1 / size
        )

    def lowest_common_subsumer(self, t1, t2):
        """Deepest common ancestor (ancestor-or-self) of two topics."""
        t1, t2 = self._topic(t1), self._topic(t2)
        while self.depth[t1] > self.depth[t2]:
            t1 = self.parent[t1]
        while self.depth[t2] > self.depth[t1]:
            t2 = self.parent[t2]
        while t1 != t2:
            t1, t2 = self.parent[t1], self.parent[t2]
        return t1


def load_taxonomy(path):
    """Read a taxonomy file with one `<parent>\\t<child>` edge per line."""
    edges = []
    with open(path, encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            if not line.strip():
                continue
            fields = line.rstrip("\r\n").split("\t")
            if len(fields) != 2 or not all(x.strip() for x in fields):
                raise InputFormatError(
                    "expected '<parent>\\t<child>'", path, line_no
                )
            edges.append(tuple(fields))
    try:
        return Taxonomy(edges)
    except ValueError as err:
        raise InputFormatError(str(err), path) from err


def taxonomy_similarity(tax, t1, t2):
    """Jiang-Conrath similarity `1 - d / 2` with
    `d = IC(t1) + IC(t2) - 2 IC(lcs(t1, t2))`.
    """
    lcs = tax.lowest_common_subsumer(t1, t2)
    if normalize_keyword(t1) == normalize_keyword(t2):
        return 1.0
    distance = (
        tax.information_content(t1)
        + tax.information_content(t2)
        - 2.0 * tax.information_content(lcs)
    )
    return min(1.0, max(0.0, 1.0 - distance / 2.0))


def _dcg(gains):
    return math.fsum(g / math.log2(i + 1) for i, g in enumerate(gains, start=1))


def ndcg_at_m(ranked, relevance, M):
    """Normalized discounted cumulative gain of `ranked` at cutoff `M`. Gains
    come from `relevance` (absent entities have gain 0), the ideal ranking
    sorts all gains of `relevance` in descending order. Returns 0 if the ideal
    DCG is 0.
    """
    if M < 1:
        raise ValueError(f"Invalid M = {M}")
    ideal = _dcg(sorted(relevance.values(), reverse=True)[:M])
    if ideal == 0:
        return 0.0
    dcg = _dcg([relevance.get(e, 0.0) for e in list(ranked)[:M]])
    return min(1.0, dcg / ideal)


def evaluate_similarity_ranking(model, tax, cutoffs=(50, 20, 10), metric=None):
    """Mean NDCG of the similarity model against the taxonomy. For every topic,
    the other topics are ranked by similarity and graded by
    `taxonomy_similarity`. Topics the model cannot resolve are left out.

    Returns:
        A dict mapping each cutoff to the mean NDCG over topics.
    """
    if metric is not None:
        model = model.with_params(metric=metric)
    topics = [t for t in tax.topics if model.can_resolve(t)]
    if len(topics) < 2:
        raise ValueError("Invalid taxonomy: fewer than 2 resolvable topics")
    if len(topics) < len(tax):
        logger.info("%d topics not in vocabulary", len(tax) - len(topics))
    depth = max(cutoffs)
    totals = {M: [] for M in cutoffs}
    for topic in topics:
        others = [t for t in topics if t != topic]
        ranked = top_m_similar(model, topic, others, depth)
        relevance = {t: taxonomy_similarity(tax, topic, t) for t in others}
        for M in cutoffs:
            totals[M].append(ndcg_at_m(ranked, relevance, M))
    return {M: math.fsum(v) / len(v) for M, v in totals.items()}
