"""Command-line pipeline: generate, train, segment, eval, dfg.

Every subcommand reads one JSON config (see config.DEFAULTS); any leaf can
be overridden with a flag of the same dotted name, e.g. ``--sampler.n 5000``.
Exit codes: 0 success, 1 usage or configuration error, 2 data error.
"""

from __future__ import annotations

import argparse
import json
import random
import sys
from collections import Counter
from pathlib import Path
from typing import Sequence

from . import config as config_mod
from .cbow import TrainConfig, boundary_scores, load_model, save_model, train_ensemble
from .config import require_paths
from .errors import ConfigError, DataError, SchemaError
from .evaluation import (
    boundaries_from_case_column,
    boundary_metrics,
    discover_dfg,
    export_dot,
    summarize_cases,
)
from .log_ingest import ColumnSchema, load_event_log, load_link_graph, split_by_user
from .segmenter import (
    Case,
    SegmentationParams,
    SegmentedLog,
    detect_boundaries,
    save_segmented_csv,
    segment_log,
)
from .trace_sampler import (
    build_training_sequences,
    generate_training_log,
    read_traces,
    write_traces,
)
from .transition_system import build_merged_ts, filter_rare, prune_with_link_graph, to_dot

# counters reported in the final summary block (everything else is statistics)
_WARNING_KEYS = (
    "dropped_pre_login",
    "empty_link_graph",
    "empty_streams",
    "dead_end_endings",
    "max_len_endings",
    "resampled_short_traces",
    "short_traces_kept",
    "unknown_activities",
    "unknown_context_gaps",
)

_FIGURE_USERS = 3  # score plots rendered for at most this many streams


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # usage errors exit 1, not argparse's 2
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _schema(cfg: dict) -> ColumnSchema:
    return ColumnSchema(**cfg["columns"])


def _ensemble_paths(model_path: str, size: int) -> list[str]:
    """model.json -> [model.json, model.1.json, model.2.json, ...]."""
    base = Path(model_path)
    paths = [str(base)]
    for member in range(1, size):
        paths.append(str(base.with_name(f"{base.stem}.{member}{base.suffix}")))
    return paths


def cmd_generate(cfg: dict, counters: Counter) -> None:
    log_path, graph_path, traces_path = require_paths(cfg, "log", "link_graph", "traces")
    log = load_event_log(log_path, _schema(cfg), counters=counters)
    graph = load_link_graph(graph_path, counters=counters)
    streams = split_by_user(log)
    ts = build_merged_ts(streams, cfg["window"], counters=counters)
    raw_states, raw_transitions = len(ts.states), len(ts.transitions)
    if cfg["epsilon"]:
        ts = filter_rare(ts, cfg["epsilon"])
    ts = prune_with_link_graph(ts, graph, counters=counters)
    sampler = cfg["sampler"]
    traces = generate_training_log(
        ts,
        sampler["n"],
        sampler["seed"],
        max_len=sampler["max_len"],
        counters=counters,
    )
    write_traces(traces, traces_path)
    if cfg["paths"]["ts_dot"]:
        Path(cfg["paths"]["ts_dot"]).write_text(to_dot(ts, cfg["end_mode"]), encoding="utf-8")
        print(f"wrote transition system DOT -> {cfg['paths']['ts_dot']}")
    print(f"read {len(log)} events from {len(streams)} users")
    print(f"transition system: {raw_states} states, {raw_transitions} transitions before pruning")
    print(f"transition system: {len(ts.states)} states, {len(ts.transitions)} transitions after pruning")
    print(f"pruned transitions: {counters['pruned_transitions']}")
    print(f"removed states: {counters['removed_states']}")
    print(f"wrote {len(traces)} traces -> {traces_path}")


def cmd_train(cfg: dict, counters: Counter) -> None:
    traces_path, model_path = require_paths(cfg, "traces", "model")
    traces = read_traces(traces_path)
    sampler, train_cfg = cfg["sampler"], cfg["train"]
    sequences = build_training_sequences(
        traces,
        sampler["traces_per_sequence"],
        rng=random.Random(sampler["seed"]),
    )
    tc = TrainConfig(
        embedding_dim=train_cfg["embedding_dim"],
        window_radius=train_cfg["window_radius"],
        epochs=train_cfg["epochs"],
        learning_rate=train_cfg["learning_rate"],
        min_learning_rate=train_cfg["min_learning_rate"],
        seed=train_cfg["seed"],
    )
    models = train_ensemble(
        tc, sequences, train_cfg["ensemble"], threads=cfg["threads"], counters=counters
    )
    paths = _ensemble_paths(model_path, train_cfg["ensemble"])
    for model, path in zip(models, paths):
        save_model(model, path)
    for member, model in enumerate(models):
        for epoch, loss in enumerate(model.epoch_losses, start=1):
            print(f"model {member} epoch {epoch}: loss {loss:.6f}")
    print(f"wrote {len(models)} model file(s): {', '.join(paths)}")
    if cfg["figures"]:
        from .figures import plot_loss_curves

        figure_path = Path(model_path).with_name(f"{Path(model_path).stem}_loss.png")
        plot_loss_curves([m.epoch_losses for m in models], figure_path)
        print(f"wrote figure {figure_path}")


def cmd_segment(cfg: dict, counters: Counter) -> None:
    log_path, model_path, out_path = require_paths(cfg, "log", "model", "output")
    schema = _schema(cfg)
    log = load_event_log(log_path, schema, counters=counters)
    if log.columns and "case_id" in log.columns:
        raise SchemaError("input already segmented: found a case_id column")
    models = [load_model(p) for p in _ensemble_paths(model_path, cfg["train"]["ensemble"])]
    activities = {e.activity for e in log.events}
    if activities and not any(a in models[0].vocab for a in activities):
        example = sorted(activities)[0]
        raise DataError(
            f"vocabulary mismatch: no activity of the log is known to the model (e.g. {example!r})"
        )
    seg_cfg = cfg["segment"]
    params = SegmentationParams(
        b1=seg_cfg["b1"],
        b2=seg_cfg["b2"],
        b3=seg_cfg["b3"],
        k=seg_cfg["k"],
        extended_neighborhood=seg_cfg["extended_neighborhood"],
    )
    segmented = segment_log(
        log, models, params, seg_cfg["aggregation"], threads=cfg["threads"], counters=counters
    )
    save_segmented_csv(segmented, out_path, columns=log.columns, schema=schema)
    stats = summarize_cases(segmented)
    print(f"wrote {sum(len(c) for c in segmented)} rows, {stats['n_cases']} cases -> {out_path}")
    print(
        f"case length mean/median: {stats['mean_case_length']:.2f}/{stats['median_case_length']:.2f}"
    )
    print(
        "case duration mean/median: "
        f"{stats['mean_case_duration_s']:.1f}s/{stats['median_case_duration_s']:.1f}s"
    )
    if cfg["figures"]:
        from .figures import plot_boundary_scores

        out = Path(out_path)
        for stream in split_by_user(log)[:_FIGURE_USERS]:
            scores = boundary_scores(models, stream, seg_cfg["aggregation"])
            bounds = detect_boundaries(scores, params)
            figure_path = out.with_name(f"{out.stem}_scores_{stream.user}.png")
            plot_boundary_scores(scores, bounds, figure_path, title=f"user {stream.user}")
            print(f"wrote figure {figure_path}")


def cmd_eval(cfg: dict, counters: Counter) -> None:
    out_path, truth_path = require_paths(cfg, "output", "truth")
    log = load_event_log(out_path, _schema(cfg), counters=counters)
    if not (log.columns and "case_id" in log.columns):
        raise SchemaError("segmented log is missing the case_id column")
    predicted = boundaries_from_case_column(log)
    with open(truth_path, encoding="utf-8") as handle:
        try:
            document = json.load(handle)
        except json.JSONDecodeError as exc:
            raise DataError(f"{truth_path}: invalid JSON: {exc}") from exc
    if not isinstance(document, dict):
        raise DataError(f"{truth_path}: expected an object mapping users to gap lists")
    try:
        truth = {user: {int(g) for g in gaps} for user, gaps in document.items()}
    except (TypeError, ValueError) as exc:
        raise DataError(f"{truth_path}: gap indices must be integers: {exc}") from exc
    metrics = boundary_metrics(predicted, truth, cfg["eval"]["tolerance"])
    text = json.dumps(metrics, indent=2, sort_keys=True)
    if cfg["paths"]["metrics"]:
        Path(cfg["paths"]["metrics"]).write_text(text + "\n", encoding="utf-8")
        print(f"wrote metrics -> {cfg['paths']['metrics']}")
    print(text)


def cmd_dfg(cfg: dict, counters: Counter) -> None:
    out_path = require_paths(cfg, "output")[0]
    log = load_event_log(out_path, _schema(cfg), counters=counters)
    if not (log.columns and "case_id" in log.columns):
        raise SchemaError("segmented log is missing the case_id column")
    groups: dict[str, list] = {}
    for event in log.events:
        case_id = event.extra.get("case_id", "")
        if not case_id:
            raise SchemaError("row with an empty case_id value")
        groups.setdefault(case_id, []).append(event)
    segmented = SegmentedLog(
        [Case(cid, events[0].user, tuple(events)) for cid, events in groups.items()]
    )
    dfg = discover_dfg(segmented, cfg["dfg"]["min_arc_freq"])
    dot = export_dot(dfg)
    if cfg["paths"]["dfg"]:
        Path(cfg["paths"]["dfg"]).write_text(dot, encoding="utf-8")
        print(f"wrote {len(dfg.nodes)} nodes, {len(dfg.arcs)} arcs -> {cfg['paths']['dfg']}")
    else:
        sys.stdout.write(dot)


_COMMANDS = [
    ("generate", cmd_generate, "build the pruned transition system and sample a training log"),
    ("train", cmd_train, "train the boundary model (ensemble) on a training log"),
    ("segment", cmd_segment, "split an event log into cases and write it with case ids"),
    ("eval", cmd_eval, "score a segmented log against ground-truth boundaries"),
    ("dfg", cmd_dfg, "discover a directly-follows graph from a segmented log"),
]


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="clickseg", description=__doc__.splitlines()[0])
    subparsers = parser.add_subparsers(dest="command", required=True, metavar="command")
    flat_defaults = sorted(config_mod.flatten(config_mod.DEFAULTS).items())
    for name, func, help_text in _COMMANDS:
        sub = subparsers.add_parser(name, help=help_text)
        sub.add_argument("--config", metavar="FILE", help="JSON configuration file")
        for dotted, default in flat_defaults:
            sub.add_argument(
                f"--{dotted}",
                dest=dotted,
                metavar="VALUE",
                help=f"override config field (default: {default!r})",
            )
        sub.set_defaults(func=func)
    return parser


def _resolve_config(args: argparse.Namespace) -> dict:
    cfg = config_mod.load_config(args.config) if args.config else config_mod.default_config()
    values = vars(args)
    for dotted in config_mod.flatten(config_mod.DEFAULTS):
        raw = values.get(dotted)
        if raw is not None:
            config_mod.set_dotted(cfg, dotted, raw)
    return cfg


def _print_summary(counters: Counter) -> None:
    warnings = {key: counters[key] for key in _WARNING_KEYS if counters[key]}
    if warnings:
        print("warnings:")
        for key, count in warnings.items():
            print(f"  {key}: {count}")
    else:
        print("warnings: none")


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    counters: Counter = Counter()
    try:
        cfg = _resolve_config(args)
        args.func(cfg, counters)
    except ConfigError as exc:
        print(f"clickseg: error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"clickseg: error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"clickseg: error: {exc}", file=sys.stderr)
        return 2
    _print_summary(counters)
    return 0


if __name__ == "__main__":
    sys.exit(main())
