"""Small helpers shared by the graph, semantics and query modules."""

import math
import sys


def normalize_keyword(keyword):
    """Lower-case a keyword and collapse its whitespace. Keywords and query
    terms are normalized identically, so that `" Machine  Learning"` and
    `"machine learning"` denote the same keyword.
    """
    if not isinstance(keyword, str):
        raise TypeError(f"Keyword must be a string, got {type(keyword)}")
    return " ".join(keyword.split()).lower()


def split_term(term):
    """Return the normalized constituent words of `term`. A term is either a
    string (words separated by whitespace) or a sequence of words.
    """
    if isinstance(term, str):
        return normalize_keyword(term).split()
    words = []
    for word in term:
        words.extend(normalize_keyword(word).split())
    return words


def rank_by_score(items, scores):
    """Sort `items` by descending score, ties broken by ascending item.

    Args:
        items (sequence): The items to rank (strings or ints).
        scores (sequence of float): One score per item.

    Returns:
        A list of `(item, score)` tuples.
    """
    pairs = list(zip(items, scores))
    pairs.sort(key=lambda pair: (-pair[1], pair[0]))
    return pairs


def round_up_sum(values):
    """Sum of already rounded `values`, increased so that it is not below the
    exact sum of the underlying reals. A single value is returned unchanged.
    """
    values = list(values)
    total = math.fsum(values)
    if len(values) <= 1 or total == 0.0:
        return total
    return total * (1.0 + 2.0 * len(values) * sys.float_info.epsilon)
