"""``kgforge`` command line: synthesize, expand, train, evaluate, analyze, report.

Every flag ``--some-name`` of a subcommand may also be given as the key
``some_name`` in that subcommand's section of a TOML config file passed with
``--config``; flags given on the command line win. Global options live in a
``[global]`` section.

Exit codes: 0 success, 2 configuration error, 3 parse error, 4 I/O error,
5 non-finite training loss.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Sequence

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import __version__
from .analytics import format_edge_list, format_network_table, network_report
from .embeddings import (
    KINDS,
    TrainConfig,
    checkpoint_bytes,
    init_model,
    load_checkpoint,
    train,
)
from .errors import (
    EndpointError,
    InvalidInputError,
    KGError,
    ParseError,
    TrainingDivergedError,
    TransportError,
    UndefinedMetricError,
)
from .evaluation import FilterIndex, MetricTable, evaluate_link_prediction
from .expansion import DEFAULT_TAU, ExpansionConfig, expand
from .extraction import (
    ConfidenceLaw,
    RetryPolicy,
    fetch_candidates,
    read_candidates_jsonl,
    serialize_candidates,
    synthesize_candidates,
)
from .store import KnowledgeGraph, format_triples_tsv, load_triples_tsv

log = logging.getLogger("kgforge")

EXIT_OK, EXIT_CONFIG, EXIT_PARSE, EXIT_IO, EXIT_DIVERGED = 0, 2, 3, 4, 5


class ConfigError(KGError):
    pass


@dataclass(frozen=True)
class Opt:
    name: str
    type: Callable | None = str
    default: Any = None
    help: str = ""
    choices: Sequence[str] | None = None
    multiple: bool = False
    flag: bool = False
    required: bool = False
    path_in: bool = False

    @property
    def dest(self) -> str:
        return self.name.replace("-", "_")


GLOBAL_OPTS = [
    Opt("seed", int, 0, "seed fixing every stochastic choice"),
    Opt("threads", int, 1, "worker threads for training, ranking and BFS (1 = deterministic)"),
    Opt("log-level", str, "WARNING", "logging level", choices=("DEBUG", "INFO", "WARNING", "ERROR")),
]

COMMANDS: dict[str, tuple[str, list[Opt]]] = {
    "synthesize": (
        "write a seeded synthetic candidate batch as JSONL",
        [
            Opt("n-entities", int, 20, "number of distinct entity labels"),
            Opt("n-candidates", int, 100, "number of candidates"),
            Opt("n-relations", int, 3, "number of relation labels (1-5)"),
            Opt("law", str, "uniform", "confidence law", choices=("uniform", "two-point")),
            Opt("p-low", float, 0.3, "low confidence of the two-point law"),
            Opt("p-high", float, 0.9, "high confidence of the two-point law"),
            Opt("mix", float, 0.5, "probability of p-high under the two-point law"),
            Opt("output", str, None, "output JSONL path", required=True),
        ],
    ),
    "expand": (
        "integrate candidate triples into a graph",
        [
            Opt("graph", str, None, "input graph TSV (omit to start empty)", path_in=True),
            Opt("candidates", str, None, "candidate JSONL file", path_in=True),
            Opt("endpoint", str, None, "HTTP extractor URL (alternative to --candidates)"),
            Opt("documents", str, None, "text file sent to the extractor, one per flag", multiple=True, path_in=True),
            Opt("timeout", float, 30.0, "extractor request timeout in seconds"),
            Opt("retries", int, 3, "extractor attempts on transport failure"),
            Opt("tau", float, DEFAULT_TAU, "confidence threshold"),
            Opt("conflict-policy", str, "flag", "what to do with conflicting edges", choices=("flag", "reject")),
            Opt("exclusive", str, None, "mutually exclusive relation pair 'a,b' (repeatable)", multiple=True),
            Opt("allow-self-loops", None, False, "accept head == tail edges", flag=True),
            Opt("out-dir", str, None, "output directory", required=True),
        ],
    ),
    "train": (
        "train an embedding model on a triple file",
        [
            Opt("triples", str, None, "training triples TSV", required=True, path_in=True),
            Opt("model", str, "TransE", "model kind", choices=KINDS),
            Opt("dim", int, 64, "embedding dimension"),
            Opt("norm", str, "L2", "distance norm for TransE/RotatE", choices=("L1", "L2")),
            Opt("epochs", int, 100, "training epochs"),
            Opt("batch-size", int, 128, "positives per SGD step"),
            Opt("learning-rate", float, 0.01, "SGD step size"),
            Opt("margin", float, 1.0, "margin of the ranking loss (TransE/RotatE)"),
            Opt("negatives", int, 5, "negatives per positive"),
            Opt("l2-weight", float, 1e-5, "L2 weight (DistMult/ComplEx)"),
            Opt("checkpoint", str, None, "output checkpoint path", required=True),
            Opt("loss-trace", str, None, "output per-epoch loss CSV (default: next to checkpoint)"),
        ],
    ),
    "evaluate": (
        "filtered link-prediction metrics of a checkpoint",
        [
            Opt("checkpoint", str, None, "model checkpoint", required=True, path_in=True),
            Opt("train", str, None, "training split TSV", required=True, path_in=True),
            Opt("valid", str, None, "validation split TSV", path_in=True),
            Opt("test", str, None, "test split TSV", required=True, path_in=True),
            Opt("dataset", str, "dataset", "dataset name for the results row"),
            Opt("model-name", str, None, "model name for the results row (default: checkpoint kind)"),
            Opt("out-dir", str, None, "output directory", required=True),
        ],
    ),
    "analyze": (
        "complex-network statistics of a graph",
        [
            Opt("graph", str, None, "graph TSV", required=True, path_in=True),
            Opt("name", str, None, "network name (default: file stem)"),
            Opt("allow-self-loops", None, False, "accept head == tail edges when loading", flag=True),
            Opt("edge-list", None, False, "also export an undirected u<TAB>v edge list", flag=True),
            Opt("out-dir", str, None, "output directory", required=True),
        ],
    ),
    "report": (
        "merge JSON outputs of earlier runs into one document",
        [
            Opt("inputs", str, None, "JSON file to merge (repeatable)", multiple=True, required=True, path_in=True),
            Opt("output", str, None, "merged JSON path", required=True),
        ],
    ),
}


# -- argument and config handling ----------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def _add_opts(parser: argparse.ArgumentParser, opts: list[Opt]) -> None:
    for o in opts:
        default_txt = "" if o.default in (None, False) else f" (default: {o.default})"
        if o.flag:
            parser.add_argument(f"--{o.name}", dest=o.dest, action="store_const", const=True, default=None,
                                help=o.help)
        elif o.multiple:
            parser.add_argument(f"--{o.name}", dest=o.dest, action="append", type=o.type, default=None,
                                help=o.help + default_txt)
        else:
            parser.add_argument(f"--{o.name}", dest=o.dest, type=o.type, default=None, choices=o.choices,
                                help=o.help + default_txt)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="kgforge", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"kgforge {__version__}")
    parser.add_argument("--config", default=None, help="TOML config file with per-subcommand sections")
    _add_opts(parser, GLOBAL_OPTS)
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    for cmd, (help_txt, opts) in COMMANDS.items():
        p = sub.add_parser(cmd, help=help_txt, description=help_txt)
        _add_opts(p, opts)
    return parser


def _coerce(o: Opt, value: Any, where: str) -> Any:
    try:
        if o.flag:
            if not isinstance(value, bool):
                raise TypeError
            return value
        if o.multiple:
            values = value if isinstance(value, list) else [value]
            return [o.type(v) for v in values]
        if o.type is float and isinstance(value, bool):
            raise TypeError
        out = o.type(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{where}: bad value {value!r} for {o.dest}") from None
    if o.choices and out not in o.choices:
        raise ConfigError(f"{where}: {o.dest} must be one of {list(o.choices)}")
    return out


def resolve_settings(args: argparse.Namespace) -> dict[str, Any]:
    """Merge defaults, config-file values and flags (in increasing priority)."""
    file_cfg: dict[str, Any] = {}
    if args.config:
        try:
            with open(args.config, "rb") as fh:
                file_cfg = tomllib.load(fh)
        except FileNotFoundError:
            raise ConfigError(f"config file {args.config} not found") from None
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"config file {args.config}: {exc}") from None
    settings: dict[str, Any] = {}
    for section, opts in (("global", GLOBAL_OPTS), (args.command, COMMANDS[args.command][1])):
        values = file_cfg.get(section, {})
        if not isinstance(values, dict):
            raise ConfigError(f"config section [{section}] must be a table")
        known = {o.dest: o for o in opts}
        unknown = sorted(set(values) - set(known))
        if unknown:
            raise ConfigError(f"unknown key(s) in [{section}]: {', '.join(unknown)}")
        for o in opts:
            flag_val = getattr(args, o.dest, None)
            if flag_val is not None:
                settings[o.dest] = flag_val
            elif o.dest in values:
                settings[o.dest] = _coerce(o, values[o.dest], f"[{section}]")
            else:
                settings[o.dest] = o.default
            if o.required and settings[o.dest] in (None, []):
                raise ConfigError(f"--{o.name} is required for {section}")
            if o.path_in and settings[o.dest]:
                paths = settings[o.dest] if o.multiple else [settings[o.dest]]
                for p in paths:
                    if not Path(p).is_file():
                        raise ConfigError(f"--{o.name}: input file {p} does not exist")
    if settings["threads"] < 1:
        raise ConfigError("--threads must be at least 1")
    return settings


# -- output helpers -----------------------------------------------------------


def write_outputs(files: dict[Path, str | bytes]) -> None:
    """Write every file to a sibling temp file first, then rename them all into place."""
    staged: list[tuple[str, Path]] = []
    try:
        for path, content in files.items():
            path.parent.mkdir(parents=True, exist_ok=True)
            fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
            staged.append((tmp, path))
            data = content.encode("utf-8") if isinstance(content, str) else content
            with os.fdopen(fd, "wb") as fh:
                fh.write(data)
        for tmp, path in staged:
            os.replace(tmp, path)
    finally:
        for tmp, _ in staged:
            if os.path.exists(tmp):
                os.unlink(tmp)


def _json(doc: Any) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


# -- subcommands --------------------------------------------------------------


def cmd_synthesize(s: dict[str, Any]) -> int:
    try:
        law = ConfidenceLaw(s["law"], s["p_low"], s["p_high"], s["mix"])
        batch = synthesize_candidates(s["seed"], s["n_entities"], s["n_candidates"], law, s["n_relations"])
    except InvalidInputError as exc:
        raise ConfigError(str(exc)) from None
    write_outputs({Path(s["output"]): serialize_candidates(batch)})
    return EXIT_OK


def _parse_rules(pairs: list[str] | None) -> list[tuple[str, str]]:
    rules = []
    for item in pairs or []:
        parts = [p.strip() for p in item.split(",")]
        if len(parts) != 2 or not all(parts):
            raise ConfigError(f"exclusivity rule {item!r} must look like 'a,b'")
        rules.append((parts[0], parts[1]))
    return rules


def cmd_expand(s: dict[str, Any]) -> int:
    if bool(s["candidates"]) == bool(s["endpoint"]):
        raise ConfigError("give exactly one of --candidates or --endpoint")
    try:
        config = ExpansionConfig(s["tau"], s["conflict_policy"], _parse_rules(s["exclusive"]))
    except InvalidInputError as exc:
        raise ConfigError(str(exc)) from None
    if s["graph"]:
        graph = load_triples_tsv(s["graph"], allow_self_loops=s["allow_self_loops"])
    else:
        graph = KnowledgeGraph(allow_self_loops=s["allow_self_loops"])
    if s["candidates"]:
        batch = read_candidates_jsonl(s["candidates"])
    else:
        docs = [Path(p).read_text(encoding="utf-8") for p in s["documents"] or []]
        batch = fetch_candidates(s["endpoint"], docs, s["timeout"], RetryPolicy(attempts=s["retries"]))
    report = expand(graph, batch, config)
    doc = report.to_dict()
    doc["rejected_lines"] = len(batch.rejects)
    out = Path(s["out_dir"])
    write_outputs(
        {
            out / "expanded.tsv": format_triples_tsv(graph),
            out / "expansion_report.txt": report.to_text() + f"rejected_lines = {len(batch.rejects)}\n",
            out / "expansion_report.json": _json(doc),
        }
    )
    return EXIT_OK


def cmd_train(s: dict[str, Any]) -> int:
    graph = load_triples_tsv(s["triples"], allow_self_loops=True)
    if graph.n_edges == 0:
        raise ConfigError(f"{s['triples']} holds no triples")
    try:
        cfg = TrainConfig(
            epochs=s["epochs"],
            batch_size=s["batch_size"],
            learning_rate=s["learning_rate"],
            margin=s["margin"],
            negatives_per_positive=s["negatives"],
            l2_weight=s["l2_weight"],
            seed=s["seed"],
        )
        model = init_model(
            s["model"],
            s["dim"],
            graph.n_entities,
            graph.n_relations,
            seed=s["seed"],
            norm=s["norm"],
            entity_labels=[e.label for e in graph.entities],
            relation_labels=[r.name for r in graph.relations],
        )
    except InvalidInputError as exc:
        raise ConfigError(str(exc)) from None

    def progress(epoch: int, loss: float) -> None:
        log.info("epoch %d/%d loss %.6f", epoch + 1, cfg.epochs, loss)

    result = train(model, graph.triple_array(), cfg, threads=s["threads"], on_epoch=progress)
    ckpt = Path(s["checkpoint"])
    trace = Path(s["loss_trace"]) if s["loss_trace"] else ckpt.with_suffix(".loss.csv")
    csv = "epoch,loss\n" + "".join(f"{i + 1},{loss!r}\n" for i, loss in enumerate(result.losses))
    write_outputs({ckpt: checkpoint_bytes(result.model), trace: csv})
    return EXIT_OK


def _map_split(path: str, ent: dict[str, int], rel: dict[str, int]) -> tuple[list[tuple[int, int, int]], int]:
    graph = load_triples_tsv(path, allow_self_loops=True)
    mapped, skipped = [], 0
    for h, r, t in ((graph.entities[e.head].label, graph.relations[e.relation].name,
                     graph.entities[e.tail].label) for e in graph.edges):
        if h in ent and t in ent and r in rel:
            mapped.append((ent[h], rel[r], ent[t]))
        else:
            skipped += 1
    return mapped, skipped


def cmd_evaluate(s: dict[str, Any]) -> int:
    model = load_checkpoint(s["checkpoint"])
    if not model.entity_labels or not model.relation_labels:
        raise ConfigError("checkpoint carries no vocabulary; cannot map split files")
    ent = {label: i for i, label in enumerate(model.entity_labels)}
    rel = {name: i for i, name in enumerate(model.relation_labels)}
    known = FilterIndex()
    for split in ("train", "valid"):
        if s[split]:
            for trip in _map_split(s[split], ent, rel)[0]:
                known.add(trip)
    test, skipped = _map_split(s["test"], ent, rel)
    for trip in test:
        known.add(trip)
    if not test:
        raise ConfigError("no test triple maps onto the checkpoint vocabulary")
    if skipped:
        log.warning("skipped %d test triple(s) with unseen entities or relations", skipped)
    metrics = evaluate_link_prediction(model, test, known, threads=s["threads"], skipped=skipped)
    table = MetricTable()
    table.add(s["dataset"], s["model_name"] or model.kind, metrics)
    out = Path(s["out_dir"])
    write_outputs({out / "metrics.tsv": table.to_tsv(), out / "metrics.json": table.to_json()})
    return EXIT_OK


def cmd_analyze(s: dict[str, Any]) -> int:
    graph = load_triples_tsv(s["graph"], allow_self_loops=s["allow_self_loops"])
    if graph.n_entities == 0:
        raise ConfigError(f"{s['graph']} holds no triples")
    name = s["name"] or Path(s["graph"]).stem
    rep = network_report(graph, name=name, threads=s["threads"])
    out = Path(s["out_dir"])
    files: dict[Path, str | bytes] = {out / "network.tsv": format_network_table([rep]), out / "network.json": rep.to_json()}
    if s["edge_list"]:
        files[out / "edges.tsv"] = format_edge_list(graph)
    write_outputs(files)
    return EXIT_OK


def cmd_report(s: dict[str, Any]) -> int:
    merged = {}
    for p in s["inputs"]:
        try:
            merged[p] = json.loads(Path(p).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ParseError(f"{p}: {exc.msg}", exc.lineno) from None
    write_outputs({Path(s["output"]): _json({"inputs": merged})})
    return EXIT_OK


HANDLERS = {
    "synthesize": cmd_synthesize,
    "expand": cmd_expand,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "analyze": cmd_analyze,
    "report": cmd_report,
}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not args.command:
            parser.print_help(sys.stderr)
            return EXIT_CONFIG
        settings = resolve_settings(args)
        logging.basicConfig(level=settings["log_level"], format="%(levelname)s %(name)s: %(message)s")
        return HANDLERS[args.command](settings)
    except ConfigError as exc:
        print(f"kgforge: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ParseError as exc:
        print(f"kgforge: parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except TrainingDivergedError as exc:
        print(f"kgforge: training diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (OSError, EndpointError, TransportError) as exc:
        print(f"kgforge: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (InvalidInputError, UndefinedMetricError) as exc:
        print(f"kgforge: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
