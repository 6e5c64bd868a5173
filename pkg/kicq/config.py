"""Run configuration and logging setup of the command line interface."""

import logging
import os
from dataclasses import dataclass, fields

from kicq.search import ALGORITHMS

LOG_ENV_VAR = "KICQ_LOG"
LOG_FORMAT = "%(levelname)s %(name)s: %(message)s"
OUTPUT_FORMATS = ("text", "records")


def log_level_from_env(default=logging.WARNING):
    """Log level named by `KICQ_LOG` (a level name or an integer)."""
    value = os.environ.get(LOG_ENV_VAR, "").strip()
    if not value:
        return default
    if value.isdigit():
        return int(value)
    level = logging.getLevelName(value.upper())
    if not isinstance(level, int):
        raise ValueError(f"Invalid {LOG_ENV_VAR} = {value}")
    return level


def configure_logging(level=None):
    """Send `kicq` log records to stderr at `level` (default: `KICQ_LOG`)."""
    level = log_level_from_env() if level is None else level
    logging.basicConfig(level=level, format=LOG_FORMAT, force=True)


@dataclass(frozen=True)
class RunConfig:
    """Parameters of one CLI run, with the defaults of the experiments."""

    graph: str = None
    vertices: str = None
    edges: str = None
    embeddings: str = None
    index: str = None
    taxonomy: str = None
    out: str = None
    r: int = 3
    k_min: int = 10
    beta: float = 0.6
    m: int = 10
    l: int = 15
    algorithm: str = "pruned"
    output_format: str = "text"
    seed: int = 0

    def __post_init__(self):
        if self.r < 1:
            raise ValueError(f"Invalid r = {self.r}")
        if self.k_min < 1:
            raise ValueError(f"Invalid k_min = {self.k_min}")
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError(f"Invalid beta = {self.beta}")
        if self.m < 0:
            raise ValueError(f"Invalid m = {self.m}")
        if self.l < 1:
            raise ValueError(f"Invalid l = {self.l}")
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"Invalid algorithm = {self.algorithm}")
        if self.output_format not in OUTPUT_FORMATS:
            raise ValueError(f"Invalid output_format = {self.output_format}")

    @classmethod
    def from_namespace(cls, args):
        """Build a config from parsed arguments; missing attributes keep their
        defaults. `kmin`, `algo` and `format` map to `k_min`, `algorithm` and
        `output_format`.
        """
        aliases = {
            "k_min": "kmin",
            "algorithm": "algo",
            "output_format": "format",
        }
        values = {}
        for f in fields(cls):
            name = aliases.get(f.name, f.name)
            value = getattr(args, name, None)
            if value is not None:
                values[f.name] = value
        return cls(**values)
