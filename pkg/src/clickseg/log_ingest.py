"""Ingestion of click-data CSV files and link graphs.

The event log is plain delimiter-separated text with a header row; column
names are configurable and default to ``timestamp``, ``screen``, ``user``.
Rows without a user id (pre-login screens) are dropped and counted. The link
graph comes either as edge-list lines (``A -> B``, ``#`` comments allowed)
or as a JSON object ``{"edges": [["A", "B"], ...]}``.
"""

from __future__ import annotations

import csv
import json
import logging
import re
from collections import Counter
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import IO, Iterable, Iterator

from .errors import EventLogParseError, LinkGraphParseError, SchemaError

logger = logging.getLogger(__name__)

_EDGE_LINE = re.compile(r"^(.+?)\s*->\s*(.+)$")


@dataclass(frozen=True)
class ColumnSchema:
    """Maps CSV columns to event roles."""

    timestamp: str = "timestamp"
    activity: str = "screen"
    user: str = "user"

    def required(self) -> tuple[str, str, str]:
        return (self.timestamp, self.activity, self.user)


@dataclass(frozen=True, slots=True)
class Event:
    """One user interaction: a screen visit at an instant."""

    timestamp: datetime
    activity: str
    user: str
    extra: dict[str, str] = field(default_factory=dict)


@dataclass
class EventLog:
    """All events, stably sorted by (timestamp, input position).

    ``columns`` keeps the original CSV header so the log can be written back
    without losing attribute columns.
    """

    events: list[Event]
    columns: tuple[str, ...] | None = None

    def __len__(self) -> int:
        return len(self.events)

    def __iter__(self) -> Iterator[Event]:
        return iter(self.events)


@dataclass
class UserStream:
    """The time-ordered events of a single user."""

    user: str
    events: list[Event]

    def activities(self) -> list[str]:
        return [e.activity for e in self.events]

    def __len__(self) -> int:
        return len(self.events)


@dataclass(frozen=True)
class LinkGraph:
    """Directed graph of legal screen-to-screen moves."""

    vertices: frozenset[str]
    edges: frozenset[tuple[str, str]]

    def __post_init__(self) -> None:
        for src, dst in self.edges:
            if src not in self.vertices or dst not in self.vertices:
                raise ValueError(f"edge ({src!r}, {dst!r}) has an endpoint outside the vertex set")

    def has_edge(self, src: str, dst: str) -> bool:
        return (src, dst) in self.edges

    @classmethod
    def from_edges(cls, edges: Iterable[tuple[str, str]], vertices: Iterable[str] = ()) -> "LinkGraph":
        edge_set = frozenset((src, dst) for src, dst in edges)
        verts = set(vertices)
        for src, dst in edge_set:
            verts.add(src)
            verts.add(dst)
        return cls(frozenset(verts), edge_set)


def parse_timestamp(raw: str) -> datetime:
    """Parse ``YYYY-MM-DD HH:MM:SS.mmm`` or ISO-8601 into a UTC instant.

    Naive timestamps are taken as UTC; aware ones are converted. Raises
    ValueError on anything else, without truncating sub-second digits.
    """
    text = raw.strip()
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    ts = datetime.fromisoformat(text)
    if ts.tzinfo is None:
        return ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc)


def format_timestamp(ts: datetime) -> str:
    """Render a UTC instant as ``YYYY-MM-DD HH:MM:SS.mmm`` (or .micros if needed)."""
    ts = ts.astimezone(timezone.utc)
    base = ts.strftime("%Y-%m-%d %H:%M:%S")
    if ts.microsecond % 1000 == 0:
        return f"{base}.{ts.microsecond // 1000:03d}"
    return f"{base}.{ts.microsecond:06d}"


def parse_event_log(
    source: IO[str],
    schema: ColumnSchema | None = None,
    *,
    delimiter: str = ",",
    counters: Counter | None = None,
) -> EventLog:
    """Read delimiter-separated click data into an EventLog.

    Rows are globally sorted by timestamp with ties broken by file order.
    Rows without a user id are dropped (counted under ``dropped_pre_login``).
    A malformed timestamp or an empty activity raises EventLogParseError
    carrying the 1-based line number; a header missing one of the mapped
    columns raises SchemaError.
    """
    schema = schema or ColumnSchema()
    counters = counters if counters is not None else Counter()
    reader = csv.reader(source, delimiter=delimiter, skipinitialspace=True)
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise SchemaError("empty input: missing header row") from None
    missing = [c for c in schema.required() if c not in header]
    if missing:
        raise SchemaError(f"missing mandatory column(s): {', '.join(missing)}")
    col_index = {name: i for i, name in enumerate(header)}
    extra_cols = [c for c in header if c not in schema.required()]

    events: list[Event] = []
    for line_no, row in enumerate(reader, start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        cells = {name: (row[i].strip() if i < len(row) else "") for name, i in col_index.items()}
        raw_ts = cells[schema.timestamp]
        try:
            ts = parse_timestamp(raw_ts)
        except ValueError:
            raise EventLogParseError(f"malformed timestamp {raw_ts!r}", line=line_no) from None
        activity = cells[schema.activity]
        if not activity:
            raise EventLogParseError("empty activity label", line=line_no)
        user = cells[schema.user]
        if not user:
            counters["dropped_pre_login"] += 1
            continue
        extra = {c: cells[c] for c in extra_cols}
        events.append(Event(ts, activity, user, extra))

    events.sort(key=lambda e: e.timestamp)  # stable: ties keep file order
    return EventLog(events, columns=tuple(header))


def load_event_log(
    path: str | Path,
    schema: ColumnSchema | None = None,
    *,
    counters: Counter | None = None,
) -> EventLog:
    with open(path, newline="", encoding="utf-8") as f:
        return parse_event_log(f, schema, counters=counters)


def write_event_log(log: EventLog, sink: IO[str], schema: ColumnSchema | None = None) -> None:
    """Write the log back as CSV, preserving extra attribute columns."""
    schema = schema or ColumnSchema()
    if log.columns is not None:
        columns = list(log.columns)
    else:
        extra_keys = sorted({k for e in log.events for k in e.extra})
        columns = list(schema.required()) + extra_keys
    writer = csv.writer(sink, lineterminator="\n")
    writer.writerow(columns)
    for event in log.events:
        writer.writerow([_event_cell(event, col, schema) for col in columns])


def _event_cell(event: Event, column: str, schema: ColumnSchema) -> str:
    if column == schema.timestamp:
        return format_timestamp(event.timestamp)
    if column == schema.activity:
        return event.activity
    if column == schema.user:
        return event.user
    return event.extra.get(column, "")


def split_by_user(log: EventLog) -> list[UserStream]:
    """Partition the log into one time-ordered stream per user.

    No event is lost, duplicated, or assigned to two streams; streams are
    returned sorted by user id for determinism.
    """
    by_user: dict[str, list[Event]] = {}
    for event in log.events:
        by_user.setdefault(event.user, []).append(event)
    return [UserStream(user, by_user[user]) for user in sorted(by_user)]


def parse_link_graph(source: IO[str], *, counters: Counter | None = None) -> LinkGraph:
    """Parse a link graph from edge-list text or a JSON object.

    Edges are deduplicated; vertices are the edge endpoints plus any explicit
    vertex list. Self-loops are legal (a screen may refresh itself).
    """
    counters = counters if counters is not None else Counter()
    text = source.read()
    stripped = text.lstrip()
    if stripped.startswith("{"):
        graph = _parse_link_graph_json(stripped)
    else:
        graph = _parse_link_graph_lines(text)
    if not graph.edges:
        logger.warning("link graph has no edges; pruning will remove every transition")
        counters["empty_link_graph"] += 1
    return graph


def _parse_link_graph_json(text: str) -> LinkGraph:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise LinkGraphParseError(f"invalid JSON: {exc}") from None
    if not isinstance(obj, dict) or "edges" not in obj:
        raise LinkGraphParseError('JSON link graph must be an object with an "edges" list')
    edges = []
    for i, pair in enumerate(obj["edges"]):
        if not (isinstance(pair, (list, tuple)) and len(pair) == 2):
            raise LinkGraphParseError(f"edge #{i} is not a [src, dst] pair: {pair!r}")
        src, dst = pair
        if not (isinstance(src, str) and isinstance(dst, str) and src and dst):
            raise LinkGraphParseError(f"edge #{i} endpoints must be non-empty strings: {pair!r}")
        edges.append((src, dst))
    vertices = obj.get("vertices", [])
    if not isinstance(vertices, list) or any(not isinstance(v, str) for v in vertices):
        raise LinkGraphParseError('"vertices" must be a list of strings')
    return LinkGraph.from_edges(edges, vertices)


def _parse_link_graph_lines(text: str) -> LinkGraph:
    edges = []
    for line_no, line in enumerate(text.splitlines(), start=1):
        body = line.strip()
        if not body or body.startswith("#"):
            continue
        match = _EDGE_LINE.match(body)
        if not match:
            raise LinkGraphParseError(f"expected 'src -> dst', got {body!r}", line=line_no)
        edges.append((match.group(1).strip(), match.group(2).strip()))
    return LinkGraph.from_edges(edges)


def load_link_graph(path: str | Path, *, counters: Counter | None = None) -> LinkGraph:
    with open(path, encoding="utf-8") as f:
        return parse_link_graph(f, counters=counters)
