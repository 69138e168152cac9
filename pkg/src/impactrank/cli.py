"""Command line pipeline: extract -> graph -> embed -> propagate -> rank -> eval.

Every stage reads the artifacts of the previous ones and writes its own.
Exit status is 0 on success, 1 on validation errors and 2 on I/O errors;
errors are reported as one JSON line on stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from collections import Counter
from collections.abc import Sequence
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any

from . import artifacts
from .artifacts import ArtifactError, manifest_path
from .benchmark import ImpactTask, build_tasks, evaluate, read_annotations
from .callgraph import CallGraph, ClassGraph, build_call_graph, build_class_graph, graph_from_json
from .corpus import Corpus, ExclusionRules, extract_corpus
from .embedding import EmbeddingMatrix, read_embeddings, tfidf_embed, write_embeddings
from .propagation import PropagationConfig, propagate
from .ranking import SETTINGS, RankedImpactList, rank_queries

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

logger = logging.getLogger("impactrank")

WEIGHTING = "neighbor-halving"


class UsageError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        raise UsageError(message)


# ---------------------------------------------------------------------------
# Artifact helpers
# ---------------------------------------------------------------------------


def load_corpus(path: str | Path) -> Corpus:
    obj = artifacts.read_json(path, ("extract",))
    try:
        return Corpus.from_json(obj)
    except (KeyError, TypeError) as exc:
        raise ArtifactError(f"{path}: malformed corpus ({exc})") from None


def save_corpus(path: str | Path, corpus: Corpus) -> None:
    artifacts.write_json(path, "extract", corpus.to_json())


def load_graph(path: str | Path) -> CallGraph | ClassGraph:
    obj = artifacts.read_json(path, ("graph",))
    try:
        return graph_from_json(obj)
    except (KeyError, TypeError) as exc:
        raise ArtifactError(f"{path}: malformed graph ({exc})") from None


def save_graph(path: str | Path, graph: CallGraph | ClassGraph) -> None:
    artifacts.write_json(path, "graph", graph.to_json())


def save_embeddings(path: str | Path, matrix: EmbeddingMatrix, producer: str, **manifest: Any) -> None:
    write_embeddings(path, matrix)
    info = {
        "provider": matrix.provider_tag,
        "w": manifest.get("w", 0.0),
        "orders": manifest.get("orders", 0),
        "graph": manifest.get("graph"),
        "n_rows": matrix.n_rows,
        "dim": matrix.dim,
    }
    artifacts.write_json(manifest_path(path), producer, info)


def load_embeddings(path: str | Path, n_rows: int) -> tuple[EmbeddingMatrix, dict[str, Any]]:
    """Read an embedding file; a sidecar manifest, when present, is validated."""
    side = manifest_path(path)
    manifest: dict[str, Any] = {}
    provider = "external"
    if side.exists():
        manifest = artifacts.read_json(side, ("embed", "propagate"))
        provider = manifest.get("provider", "external")
        if manifest.get("n_rows") not in (None, n_rows):
            raise ArtifactError(f"{side}: {manifest['n_rows']} rows, expected {n_rows}")
    return read_embeddings(path, n_rows, provider), manifest


def load_tasks(path: str | Path) -> list[ImpactTask]:
    obj = artifacts.read_json(path, ("tasks",))
    return [ImpactTask.from_json(t) for t in obj["tasks"]]


def save_tasks(path: str | Path, tasks: Sequence[ImpactTask], stats: Counter) -> None:
    artifacts.write_json(
        path,
        "tasks",
        {"stats": dict(sorted(stats.items())), "tasks": [t.to_json() for t in tasks]},
    )


def save_rankings(path: str | Path | None, rankings: Sequence[RankedImpactList]) -> None:
    if path is None:
        for r in rankings:
            print(r.to_line(schema_version=artifacts.SCHEMA_VERSION, producer="rank"))
        return
    artifacts.write_jsonl(path, "rank", (r.to_json() for r in rankings))


def load_rankings(path: str | Path) -> list[RankedImpactList]:
    return [RankedImpactList.from_json(obj) for obj in artifacts.read_jsonl(path, ("rank",))]


def save_report(path: str | Path, report) -> None:
    artifacts.write_json(path, "eval", report.to_json())


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_extract(args) -> None:
    rules = ExclusionRules(globs=tuple(args.exclude or ()))
    corpus = extract_corpus(args.repo, rules, threads=args.threads)
    save_corpus(args.out, corpus)
    logger.info("extracted %d methods", len(corpus))


def _graph_for(corpus: Corpus, kind: str, threads: int | None) -> CallGraph | ClassGraph:
    if kind == "class":
        return build_class_graph(corpus)
    return build_call_graph(corpus, threads=threads)


def cmd_graph(args) -> None:
    corpus = load_corpus(args.corpus)
    save_graph(args.out, _graph_for(corpus, args.kind, args.threads))


def _embed(corpus: Corpus, provider: str, path: str | None, idf_mode: str) -> EmbeddingMatrix:
    if provider == "external":
        if not path:
            raise UsageError("--provider external requires --path")
        return read_embeddings(path, len(corpus), "external")
    return tfidf_embed(corpus, idf_mode)


def cmd_embed(args) -> None:
    corpus = load_corpus(args.corpus)
    matrix = _embed(corpus, args.provider, args.path, args.idf_mode)
    save_embeddings(args.out, matrix, "embed")


def cmd_propagate(args) -> None:
    graph = load_graph(args.graph)
    matrix, _ = load_embeddings(args.embeddings, graph.n_nodes)
    config = PropagationConfig(args.w, args.orders, graph.kind, args.neighborhood)
    out = propagate(matrix, graph, config)
    save_embeddings(args.out, out, "propagate", w=config.w, orders=config.max_order, graph=graph.kind)


def cmd_rank(args) -> None:
    corpus = load_corpus(args.corpus)
    matrix, _ = load_embeddings(args.embeddings, len(corpus))
    weighting_graph = None
    if args.weighting:
        if not args.graph:
            raise UsageError("--weighting requires --graph")
        weighting_graph = load_graph(args.graph)
        if weighting_graph.n_nodes != len(corpus):
            raise ArtifactError(f"{args.graph}: {weighting_graph.n_nodes} nodes, corpus has {len(corpus)}")

    if args.tasks:
        queries = [(t.query_id, t.setting) for t in load_tasks(args.tasks) if args.setting in (None, t.setting)]
    elif args.query:
        if args.setting is None:
            raise UsageError("--setting is required with --query")
        ids = range(len(corpus)) if "all" in args.query else [_int(q, "--query") for q in args.query]
        queries = [(q, args.setting) for q in ids]
    else:
        raise UsageError("one of --query or --tasks is required")
    rankings = rank_queries(queries, corpus, matrix, weighting_graph, args.top_k)
    save_rankings(args.out, rankings)


def cmd_eval(args) -> None:
    tasks = load_tasks(args.tasks)
    rankings = load_rankings(args.rankings)
    setting = args.setting
    if setting is None:
        present = sorted({r.setting for r in rankings})
        if len(present) != 1:
            raise UsageError(f"rankings cover settings {present}; choose one with --setting")
        setting = present[0]
    report = evaluate(tasks, rankings, setting, args.k)
    save_report(args.out, report)


def cmd_tasks(args) -> None:
    corpus = load_corpus(args.corpus)
    annotations = read_annotations(args.annotations)
    stats: Counter = Counter()
    if args.parent_commit:
        corpora = {args.parent_commit: corpus}
    else:
        corpora = {a.parent_commit_id: corpus for a in annotations}
    tasks = build_tasks(annotations, corpora, stats)
    save_tasks(args.out, tasks, stats)


# ---------------------------------------------------------------------------
# Pipeline
# ---------------------------------------------------------------------------


@dataclass
class PipelineConfig:
    repo_root: str = ""
    output_dir: str = ""
    exclude: list[str] = field(default_factory=list)
    graph: str = "call"
    provider: str = "tfidf"
    embeddings_path: str = ""
    idf_mode: str = "collection"
    w: float = 0.5
    orders: int = 2
    neighborhood: str = "exact"
    strategy: str = "auto"
    setting: str = "whole"
    k: int = 10
    top_k: int = 0
    annotations: str = ""
    parent_commit: str = ""

    _PATHS = ("repo_root", "output_dir", "embeddings_path", "annotations")
    _SECTIONS = {
        "embedding": {"provider": "provider", "path": "embeddings_path", "idf_mode": "idf_mode"},
        "propagation": {"w": "w", "max_order": "orders", "graph_kind": "graph", "neighborhood": "neighborhood"},
    }

    @classmethod
    def from_file(cls, path: str | Path) -> PipelineConfig:
        path = Path(path)
        try:
            raw = tomllib.loads(path.read_text(encoding="utf-8"))
        except tomllib.TOMLDecodeError as exc:
            raise UsageError(f"{path}: {exc}") from None
        flat: dict[str, Any] = {}
        for key, value in raw.items():
            if key in cls._SECTIONS and isinstance(value, dict):
                for sub, sub_value in value.items():
                    if sub not in cls._SECTIONS[key]:
                        raise UsageError(f"{path}: unknown key {key}.{sub}")
                    flat[cls._SECTIONS[key][sub]] = sub_value
            else:
                flat[key] = value
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(flat) - known)
        if unknown:
            raise UsageError(f"{path}: unknown config keys {unknown}")
        config = cls(**flat)
        return config.resolve_paths(path.parent)

    def resolve_paths(self, base: Path) -> PipelineConfig:
        updates = {}
        for name in self._PATHS:
            value = getattr(self, name)
            if value:
                updates[name] = str((base / value).resolve())
        return replace(self, **updates)

    def validate(self) -> None:
        if not self.repo_root:
            raise UsageError("pipeline needs repo_root")
        if not self.output_dir:
            raise UsageError("pipeline needs output_dir")
        if self.provider not in ("tfidf", "external"):
            raise UsageError(f"unknown provider {self.provider!r}")
        if self.provider == "external" and not self.embeddings_path:
            raise UsageError("provider 'external' requires embeddings_path")
        if self.graph not in ("call", "class"):
            raise UsageError(f"unknown graph {self.graph!r}")
        if self.strategy not in ("auto", "propagate", "weighting", "none"):
            raise UsageError(f"unknown strategy {self.strategy!r}")
        if self.setting not in SETTINGS:
            raise UsageError(f"unknown setting {self.setting!r}")
        if self.k < 1:
            raise UsageError("k must be >= 1")

    @property
    def effective_strategy(self) -> str:
        if self.strategy != "auto":
            return self.strategy
        # Frequency vectors and dense class cliques use score weighting.
        if self.provider == "tfidf" or self.graph == "class":
            return "weighting"
        return "propagate"


def run_pipeline(config: PipelineConfig, threads: int | None = None) -> Path:
    """Run every stage into ``config.output_dir`` and return that directory."""
    config.validate()
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)

    corpus = extract_corpus(config.repo_root, ExclusionRules(globs=tuple(config.exclude)), threads=threads)
    save_corpus(out / "corpus.json", corpus)

    graph = _graph_for(corpus, config.graph, threads)
    save_graph(out / "graph.json", graph)

    matrix = _embed(corpus, config.provider, config.embeddings_path, config.idf_mode)
    save_embeddings(out / "embeddings.jsonl", matrix, "embed")

    strategy = config.effective_strategy
    weighting_graph = None
    if strategy == "propagate":
        prop = PropagationConfig(config.w, config.orders, graph.kind, config.neighborhood)
        matrix = propagate(matrix, graph, prop)
        save_embeddings(out / "propagated.jsonl", matrix, "propagate", w=prop.w, orders=prop.max_order, graph=graph.kind)
    elif strategy == "weighting":
        weighting_graph = graph

    tasks: list[ImpactTask] = []
    if config.annotations:
        annotations = read_annotations(config.annotations)
        if config.parent_commit:
            corpora = {config.parent_commit: corpus}
        else:
            corpora = {a.parent_commit_id: corpus for a in annotations}
        stats: Counter = Counter()
        tasks = build_tasks(annotations, corpora, stats)
        save_tasks(out / "tasks.json", tasks, stats)
        queries = [(t.query_id, t.setting) for t in tasks if t.setting == config.setting]
    else:
        queries = [(i, config.setting) for i in range(len(corpus))]

    rankings = rank_queries(queries, corpus, matrix, weighting_graph, config.top_k or None)
    save_rankings(out / "rankings.jsonl", rankings)

    if config.annotations:
        if not queries:
            raise UsageError(f"no {config.setting} tasks could be built from {config.annotations}")
        report = evaluate(tasks, rankings, config.setting, config.k)
        save_report(out / "report.json", report)
    return out


def cmd_pipeline(args) -> None:
    config = PipelineConfig.from_file(args.config) if args.config else PipelineConfig()
    overrides = {
        "repo_root": args.repo,
        "output_dir": args.out,
        "setting": args.setting,
        "k": args.k,
        "w": args.w,
        "orders": args.orders,
        "strategy": args.strategy,
        "annotations": args.annotations,
    }
    config = replace(config, **{k: v for k, v in overrides.items() if v is not None})
    config = config.resolve_paths(Path.cwd())
    run_pipeline(config, threads=args.threads)


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------


def _int(value: str, flag: str) -> int:
    try:
        return int(value)
    except ValueError:
        raise UsageError(f"{flag} expects an integer, got {value!r}") from None


def _positive(value: str) -> int:
    n = int(value)
    if n < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return n


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--threads", type=_positive, default=None, help="cap on worker threads")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="impactrank", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("extract", parents=[common], help="extract methods into corpus.json")
    p.add_argument("--repo", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--exclude", nargs="+", metavar="GLOB", help="extra test-file globs")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("graph", parents=[common], help="build the call or class graph")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--kind", choices=("call", "class"), default="call")
    p.set_defaults(func=cmd_graph)

    p = sub.add_parser("embed", parents=[common], help="compute or import method embeddings")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--provider", choices=("tfidf", "external"), default="tfidf")
    p.add_argument("--path", help="JSON Lines vectors for --provider external")
    p.add_argument("--idf-mode", choices=("collection", "document"), default="collection")
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("propagate", parents=[common], help="propagate embeddings over a graph")
    p.add_argument("--graph", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--w", type=float, default=0.5)
    p.add_argument("--orders", type=int, choices=(1, 2, 3), default=2)
    p.add_argument("--neighborhood", choices=("exact", "cumulative"), default="exact")
    p.set_defaults(func=cmd_propagate)

    p = sub.add_parser("rank", parents=[common], help="rank candidate impacted methods")
    p.add_argument("--embeddings", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--query", action="append", help="method id, repeatable, or 'all'")
    p.add_argument("--tasks", help="rank the query of every task in tasks.json")
    p.add_argument("--setting", choices=SETTINGS)
    p.add_argument("--weighting", choices=(WEIGHTING,))
    p.add_argument("--graph")
    p.add_argument("--top-k", type=_positive)
    p.add_argument("--out", help="rankings.jsonl (default: stdout)")
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("eval", parents=[common], help="score rankings against tasks")
    p.add_argument("--tasks", required=True)
    p.add_argument("--rankings", required=True)
    p.add_argument("--k", type=_positive, default=10)
    p.add_argument("--out", required=True)
    p.add_argument("--setting", choices=SETTINGS)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("tasks", parents=[common], help="build tasks.json from annotated commits")
    p.add_argument("--annotations", required=True, help="CSV repo,commit,parent_commit,file_path,line,label")
    p.add_argument("--corpus", required=True, help="corpus.json of the parent-commit snapshot")
    p.add_argument("--out", required=True)
    p.add_argument("--parent-commit", help="only use annotations against this parent commit")
    p.set_defaults(func=cmd_tasks)

    p = sub.add_parser("pipeline", parents=[common], help="run every stage from a config file")
    p.add_argument("--config")
    p.add_argument("--repo")
    p.add_argument("--out")
    p.add_argument("--setting", choices=SETTINGS)
    p.add_argument("--k", type=_positive)
    p.add_argument("--w", type=float)
    p.add_argument("--orders", type=int, choices=(1, 2, 3))
    p.add_argument("--strategy", choices=("auto", "propagate", "weighting", "none"))
    p.add_argument("--annotations")
    p.set_defaults(func=cmd_pipeline)
    return parser


def _fail(kind: str, message: str, status: int) -> int:
    print(json.dumps({"error": kind, "message": " ".join(str(message).split())}), file=sys.stderr)
    return status


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        return _fail("usage", str(exc), 1)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        args.func(args)
    except UsageError as exc:
        return _fail("usage", str(exc), 1)
    except OSError as exc:
        return _fail("io", f"{exc.strerror or exc}: {exc.filename}" if exc.filename else str(exc), 2)
    except (ValueError, KeyError, TypeError) as exc:
        return _fail("validation", str(exc), 1)
    return 0


if __name__ == "__main__":
    sys.exit(main())
