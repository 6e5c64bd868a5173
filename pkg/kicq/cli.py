"""Command line interface: `kicq build|augment|index|query|bench|eval`."""

import argparse
import hashlib
import json
import logging
import sys
import time

from kicq.config import RunConfig, configure_logging
from kicq.errors import (
    InputFormatError,
    InvariantError,
    KicqError,
    QueryError,
    UnmatchedTermError,
)
from kicq.graph import (
    build_inverted_index,
    extend_graph_keywords,
    load_graph,
    load_persisted_graph,
    persist_graph,
)
from kicq.kictree import build_kic_tree, load_tree, persist_tree
from kicq.query import Predicate, formulate_query, parse_query_expression
from kicq.scoring import Community, cpj, community_cpj, structural_metrics
from kicq.search import ALGORITHMS, SearchStats, run_query
from kicq.semantics import (
    METRICS,
    davies_bouldin,
    evaluate_similarity_ranking,
    load_embeddings,
    load_taxonomy,
    neighborhood_size_sweep,
    word_coherence,
)
from kicq.synthetic import (
    SCORE_DISTRIBUTIONS,
    generate_attributed_graph,
    generate_query_workload,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INPUT_ERROR = 2
EXIT_INTERNAL_ERROR = 3

EVAL_MODES = ("ndcg", "coherence", "db", "lsweep", "cpj", "structure")


def _emit(records, output_format, text_lines):
    """Print `records` as JSON lines, or `text_lines` in text format."""
    if output_format == "records":
        for record in records:
            print(json.dumps(record, sort_keys=True))
    else:
        for line in text_lines:
            print(line)


def _format_fields(record, sep):
    parts = []
    for key, value in record.items():
        if key == "type":
            continue
        if isinstance(value, float):
            value = f"{value:.6f}"
        parts.append(f"{key}={value}")
    return sep.join(parts)


def _require(args, *names, mode=None):
    for name in names:
        if getattr(args, name, None) is None:
            what = f"mode '{mode}'" if mode else f"'{args.command}'"
            raise ValueError(f"Invalid arguments: {what} requires --{name}")


# ------------------------------------------------------------------------------
# Commands
# ------------------------------------------------------------------------------


def cmd_build(args):
    """Load the text graph files and persist the binary graph."""
    config = RunConfig.from_namespace(args)
    g = load_graph(config.vertices, config.edges)
    persist_graph(g, config.out)
    print(g.summary())


def cmd_augment(args):
    """Extend the graph keywords with similar keywords and persist."""
    config = RunConfig.from_namespace(args)
    g = load_persisted_graph(config.graph)
    model = load_embeddings(config.embeddings, L=config.l, metric=args.metric)
    skipped = [kw for kw in g.keywords if not model.can_resolve(kw)]
    extended = extend_graph_keywords(g, model, config.m)
    added = sum(len(b) - len(a) for a, b in zip(g.attrs, extended.attrs))
    persist_graph(extended, config.out)
    print(f"{added} keywords added, {len(skipped)} keywords skipped")


def cmd_index(args):
    """Build and persist the KIC-tree of a graph."""
    config = RunConfig.from_namespace(args)
    g = load_persisted_graph(config.graph)
    tree = build_kic_tree(g)
    size = persist_tree(tree, config.out)
    print(f"{len(tree)} nodes, depth {tree.depth()}, {size} bytes")


def _community_records(communities, g):
    records = []
    for rank, c in enumerate(communities, start=1):
        record = c.to_dict(g)
        record.update(type="community", rank=rank)
        records.append(record)
    return records


def cmd_query(args):
    """Answer one query and list the ranked communities."""
    config = RunConfig.from_namespace(args)
    g = load_persisted_graph(config.graph)
    terms, predicate = parse_query_expression(args.query)
    tree = load_tree(config.index) if config.index else None
    if config.algorithm == "tree" and tree is None:
        raise QueryError("tree search requires --index")
    model = None
    if config.embeddings and config.m > 0:
        model = load_embeddings(
            config.embeddings, L=config.l, metric=args.metric
        )

    try:
        q = formulate_query(
            terms,
            predicate,
            r=config.r,
            k_min=config.k_min,
            beta=config.beta,
            model=model,
            keyword_universe=g.keyword_ids,
            M=config.m,
        )
    except UnmatchedTermError as err:
        logger.warning("%s, no communities", err)
        results, stats = [], SearchStats()
    else:
        results, stats = run_query(
            g, build_inverted_index(g), q, config.algorithm, kictree=tree
        )

    records = _community_records(results, g)
    records.append(dict(type="stats", **stats.as_dict()))
    lines = [
        f"{r['rank']}\t{c.score:.9f}\tk={c.k}\tsize={c.size}\t"
        + " ".join(r["members"])
        for r, c in zip(records, results)
    ]
    if not results:
        lines.append("no communities")
    lines.append(
        "stats: " + " ".join(f"{k}={v}" for k, v in stats.as_dict().items())
    )
    _emit(records, config.output_format, lines)


def _result_hash(results):
    digest = hashlib.sha256()
    for c in results:
        digest.update(repr((sorted(c.members), c.k, c.score)).encode())
    return digest.hexdigest()[:16]


def _bench_row(g, tree, workload, predicate, r, k_min, beta):
    """Run the workload with every algorithm. Returns per-algorithm mean
    counters, mean latency and a hash of all results.
    """
    idx = build_inverted_index(g)
    rows = {}
    for algorithm in ALGORITHMS:
        totals = SearchStats().as_dict()
        digest = hashlib.sha256()
        elapsed = 0.0
        n = 0
        for terms in workload:
            if not terms:
                continue
            q = formulate_query(
                terms,
                predicate,
                r=r,
                k_min=k_min,
                beta=beta,
                keyword_universe=g.keyword_ids,
            )
            start = time.perf_counter()
            results, stats = run_query(g, idx, q, algorithm, kictree=tree)
            elapsed += time.perf_counter() - start
            n += 1
            digest.update(_result_hash(results).encode())
            for key, value in stats.as_dict().items():
                totals[key] += value
        rows[algorithm] = {
            "algorithm": algorithm,
            "queries": n,
            "result_hash": digest.hexdigest()[:16],
            "latency_ms": 1000.0 * elapsed / max(n, 1),
            **{key: value / max(n, 1) for key, value in totals.items()},
        }
    if len({row["result_hash"] for row in rows.values()}) != 1:
        raise InvariantError("search algorithms returned different results")
    return list(rows.values())


def cmd_bench(args):
    """Benchmark the search algorithms on a seeded synthetic graph."""
    config = RunConfig.from_namespace(args)
    g = generate_attributed_graph(
        n_vertices=args.n_vertices,
        n_edges=args.n_edges,
        n_keywords=args.n_keywords,
        exponent=args.exponent,
        zipf_exponent=args.zipf,
        max_keywords_per_vertex=args.keywords_per_vertex,
        score_distribution=args.score_dist,
        seed=config.seed,
    )
    tree = build_kic_tree(g)
    workload = generate_query_workload(
        g, args.queries, args.terms, seed=config.seed
    )
    predicate = Predicate(args.predicate)

    params = {"r": config.r, "kmin": config.k_min, "beta": config.beta}
    sweep = [(None, None)]
    if args.vary is not None:
        _require(args, "values")
        sweep = [(args.vary, value) for value in args.values]

    records = []
    for name, value in sweep:
        setting = dict(params)
        if name is not None:
            setting[name] = int(value) if name != "beta" else value
        for row in _bench_row(
            g,
            tree,
            workload,
            predicate,
            setting["r"],
            setting["kmin"],
            setting["beta"],
        ):
            row = dict(type="bench", **setting, **row)
            if not args.timing:
                del row["latency_ms"]
            records.append(row)

    lines = [f"graph: {g.summary()}, tree: {len(tree)} nodes"]
    lines += [_format_fields(row, "\t") for row in records]
    _emit(records, config.output_format, lines)


def _load_result_communities(path, g):
    """Read the community records written by `kicq query --format records`."""
    communities = []
    with open(path, encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as err:
                raise InputFormatError(
                    f"invalid JSON: {err}", path, line_no
                ) from err
            if record.get("type") != "community":
                continue
            members = []
            for ext in record.get("members", []):
                if ext not in g.vertex_ids:
                    raise InputFormatError(
                        f"unknown vertex id '{ext}'", path, line_no
                    )
                members.append(g.vertex_ids[ext])
            if not members:
                raise InputFormatError(
                    "community without members", path, line_no
                )
            communities.append(
                Community(
                    members=frozenset(members),
                    k=int(record.get("k", 0)),
                    score=float(record.get("score", 0.0)),
                    influence_sum=0.0,
                )
            )
    return communities


def cmd_eval(args):
    """Compute an evaluation metric from files."""
    config = RunConfig.from_namespace(args)
    mode = args.mode
    records = []

    if mode in ("ndcg", "coherence", "db", "lsweep"):
        _require(args, "embeddings", mode=mode)
        sizes = args.sizes or [config.l]
        model = load_embeddings(config.embeddings, L=sizes[0])
    if mode in ("coherence", "db", "lsweep"):
        _require(args, "terms", mode=mode)

    if mode == "ndcg":
        _require(args, "taxonomy", mode=mode)
        tax = load_taxonomy(config.taxonomy)
        cutoffs = args.cutoffs or [50, 20, 10]
        for metric in [args.metric] if args.metric else list(METRICS):
            scores = evaluate_similarity_ranking(model, tax, cutoffs, metric)
            record = {"type": "ndcg", "metric": metric}
            record.update({f"ndcg@{m}": v for m, v in scores.items()})
            records.append(record)
    elif mode == "coherence":
        for L in sizes:
            for term in args.terms:
                records.append(
                    {
                        "type": "coherence",
                        "term": term,
                        "L": L,
                        "coherence": word_coherence(model, term, L),
                    }
                )
    elif mode == "db":
        for L in sizes:
            value = davies_bouldin(model, args.terms, L)
            records.append({"type": "db", "L": L, "davies_bouldin": value})
    elif mode == "lsweep":
        for row in neighborhood_size_sweep(model, args.terms, sizes):
            records.append(dict(type="lsweep", **row._asdict()))
    else:
        _require(args, "graph", "results", mode=mode)
        g = load_persisted_graph(config.graph)
        communities = _load_result_communities(args.results, g)
        for rank, c in enumerate(communities, start=1):
            if mode == "cpj":
                value = {"cpj": community_cpj(c.members, g)}
            else:
                value = structural_metrics(c, g).to_dict()
            records.append(dict(type=mode, rank=rank, **value))
        if mode == "cpj":
            records.append({"type": "cpj_mean", "cpj": cpj(communities, g)})

    lines = [_format_fields(record, " ") for record in records]
    _emit(records, config.output_format, lines)


# ------------------------------------------------------------------------------
# Parser
# ------------------------------------------------------------------------------


def build_parser():
    defaults = RunConfig()
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "--format", choices=["text", "records"], default="text"
    )

    parser = argparse.ArgumentParser(
        prog="kicq",
        description="Keyword-aware influential community queries.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build", parents=[common], help="ingest text files")
    p.add_argument("--vertices", required=True)
    p.add_argument("--edges", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("augment", parents=[common], help="extend keywords")
    p.add_argument("--graph", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--m", type=int, default=defaults.m)
    p.add_argument("--l", type=int, default=defaults.l)
    p.add_argument("--metric", choices=METRICS, default="indirect_cosine")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("index", parents=[common], help="build the KIC-tree")
    p.add_argument("--graph", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_index)

    p = sub.add_parser("query", parents=[common], help="run one query")
    p.add_argument("--graph", required=True)
    p.add_argument("--query", required=True)
    p.add_argument("--r", type=int, default=defaults.r)
    p.add_argument("--kmin", type=int, default=defaults.k_min)
    p.add_argument("--beta", type=float, default=defaults.beta)
    p.add_argument("--algo", choices=ALGORITHMS, default=defaults.algorithm)
    p.add_argument("--index")
    p.add_argument("--embeddings")
    p.add_argument("--m", type=int, default=defaults.m)
    p.add_argument("--l", type=int, default=defaults.l)
    p.add_argument("--metric", choices=METRICS, default="indirect_cosine")
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("bench", parents=[common], help="benchmark")
    p.add_argument("--seed", type=int, default=defaults.seed)
    p.add_argument("--n-vertices", type=int, default=2000)
    p.add_argument("--n-edges", type=int, default=8000)
    p.add_argument("--n-keywords", type=int, default=50)
    p.add_argument("--exponent", type=float, default=2.5)
    p.add_argument("--zipf", type=float, default=1.0)
    p.add_argument("--keywords-per-vertex", type=int, default=3)
    p.add_argument(
        "--score-dist", choices=SCORE_DISTRIBUTIONS, default="uniform"
    )
    p.add_argument("--queries", type=int, default=20)
    p.add_argument("--terms", type=int, default=2)
    p.add_argument("--predicate", choices=["AND", "OR"], default="OR")
    p.add_argument("--r", type=int, default=defaults.r)
    p.add_argument("--kmin", type=int, default=3)
    p.add_argument("--beta", type=float, default=defaults.beta)
    p.add_argument("--vary", choices=["r", "kmin", "beta"])
    p.add_argument("--values", type=float, nargs="+")
    p.add_argument("--timing", action="store_true")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("eval", parents=[common], help="evaluation metrics")
    p.add_argument("mode", choices=EVAL_MODES)
    p.add_argument("--graph")
    p.add_argument("--results")
    p.add_argument("--embeddings")
    p.add_argument("--taxonomy")
    p.add_argument("--metric", choices=METRICS)
    p.add_argument("--m", dest="cutoffs", type=int, nargs="+")
    p.add_argument("--l", dest="sizes", type=int, nargs="+")
    p.add_argument("--terms", nargs="+")
    p.set_defaults(func=cmd_eval)

    return parser


def main(argv=None):
    """Entry point of the `kicq` command. Returns the exit code."""
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        configure_logging()
        args.func(args)
    except (InvariantError, AssertionError) as err:
        print(f"kicq: internal error: {err}", file=sys.stderr)
        return EXIT_INTERNAL_ERROR
    except (KicqError, OSError, ValueError) as err:
        print(f"kicq: error: {err}", file=sys.stderr)
        return EXIT_INPUT_ERROR
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
