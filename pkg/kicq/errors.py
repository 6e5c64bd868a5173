"""Exceptions raised by `kicq`.

Every domain error also derives from the matching builtin (`ValueError` or
`RuntimeError`), so callers that only know the builtins can still catch them.
"""


class KicqError(Exception):
    """Base class of all `kicq` errors."""


class InputFormatError(KicqError, ValueError):
    """A text input file does not conform to its format.

    Args:
        msg (str): What is wrong with the input.
        path (str or None): The offending file.
        line (int or None): 1-based line number within `path`.
    """

    def __init__(self, msg, path=None, line=None):
        self.msg = msg
        self.path = path
        self.line = line

        location = ""
        if path is not None:
            location = f"{path}:"
            if line is not None:
                location += f"{line}:"
            location += " "
        super().__init__(location + msg)


class IndexFormatError(KicqError, ValueError):
    """A binary graph or index file has a bad header or structure."""


class ChecksumError(IndexFormatError):
    """A binary file is truncated or its checksum does not match."""


class UnknownTermError(KicqError, ValueError):
    """No constituent word of a term is in the embedding vocabulary."""

    def __init__(self, term):
        self.term = term
        super().__init__(f"unknown term '{term}'")


class DegenerateVectorError(KicqError, ValueError):
    """A vector with zero norm, or a degenerate clustering."""


class QueryError(KicqError, ValueError):
    """A query cannot be formulated or executed."""


class InvariantError(KicqError, RuntimeError):
    """An internal invariant was violated."""


class UnmatchedTermError(QueryError):
    """A query term matches no keyword of the graph."""

    def __init__(self, term):
        self.term = term
        super().__init__(f"unmatched term '{term}'")
