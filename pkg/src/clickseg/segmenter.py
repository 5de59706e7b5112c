"""Peak detection over boundary scores and stream splitting into cases.

A gap is a case boundary when its score is a sufficiently sharp peak: higher
than both neighbors by configurable factors and higher than the trailing
neighborhood average. Splitting every user stream at its boundaries yields
contiguous cases with synthesized case identifiers.
"""

from __future__ import annotations

import csv
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterator, Sequence

import numpy as np

from .cbow import CbowModel, boundary_scores
from .errors import ConfigError
from .log_ingest import ColumnSchema, Event, EventLog, UserStream, _event_cell, split_by_user


@dataclass(frozen=True, slots=True)
class SegmentationParams:
    """Peak-detector sensitivity knobs.

    ``extended_neighborhood`` widens the trailing window of the third
    condition to k+1 terms while keeping the divisor k (see detect_boundaries).
    """

    b1: float = 1.2
    b2: float = 1.2
    b3: float = 1.5
    k: int = 5
    extended_neighborhood: bool = False

    def __post_init__(self) -> None:
        for name in ("b1", "b2", "b3"):
            value = getattr(self, name)
            if value < 1.0:
                raise ConfigError(f"{name} must be >= 1, got {value}")
        if self.k < 1:
            raise ConfigError(f"k must be >= 1, got {self.k}")


@dataclass(frozen=True, slots=True)
class Case:
    """One contiguous, single-user slice of a stream."""

    case_id: str
    user: str
    events: tuple[Event, ...]

    def activities(self) -> list[str]:
        return [e.activity for e in self.events]

    def __len__(self) -> int:
        return len(self.events)


@dataclass
class SegmentedLog:
    cases: list[Case] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.cases)

    def __iter__(self) -> Iterator[Case]:
        return iter(self.cases)

    def events(self) -> list[Event]:
        return [e for case in self.cases for e in case.events]

    def boundaries_by_user(self) -> dict[str, set[int]]:
        """Recover the gap indices at which each user's stream was split."""
        boundaries: dict[str, set[int]] = {}
        position: Counter = Counter()
        for case in self.cases:
            if position[case.user]:
                boundaries.setdefault(case.user, set()).add(position[case.user])
            else:
                boundaries.setdefault(case.user, set())
            position[case.user] += len(case.events)
        return boundaries


def detect_boundaries(scores: Sequence[float] | np.ndarray, params: SegmentationParams) -> set[int]:
    """Gap indices (1-based) whose score is a peak.

    Gap i is a boundary iff p_i > b1*p_{i-1}, p_i > b2*p_{i+1}, and p_i >
    b3 * mean of the up-to-k preceding scores {p_{i-k}..p_{i-1}}. The first
    and last gaps lack a neighbor and are never boundaries. With
    ``extended_neighborhood`` the third condition sums {p_{i-k-1}..p_{i-1}}
    but still divides by k.
    """
    p = np.asarray(scores, dtype=float)
    n = len(p)
    if n < 3:
        return set()
    i = np.arange(2, n)  # 1-based candidate gap indices
    center = p[1:-1]
    passes = (center > params.b1 * p[:-2]) & (center > params.b2 * p[2:])
    sums = np.concatenate(([0.0], np.cumsum(p)))  # sums[m] = p_1 + ... + p_m
    low = np.maximum(i - params.k - (1 if params.extended_neighborhood else 0), 1)
    trailing = sums[i - 1] - sums[low - 1]
    divisor = params.k if params.extended_neighborhood else (i - low)
    passes &= center > params.b3 * (trailing / divisor)
    return set((i[passes]).tolist())


def split_stream(stream: UserStream, boundaries: set[int]) -> list[Case]:
    """Cut the stream after each boundary gap; |boundaries| + 1 cases.

    Case ids are "<user>#<ordinal>" with 1-based ordinals in time order.
    """
    n = len(stream.events)
    if n == 0:
        return []
    cuts = sorted(boundaries)
    if cuts and not (1 <= cuts[0] and cuts[-1] <= n - 1):
        raise ValueError(f"boundary out of range for a stream of {n} events: {cuts}")
    edges = [0, *cuts, n]
    return [
        Case(f"{stream.user}#{ordinal}", stream.user, tuple(stream.events[lo:hi]))
        for ordinal, (lo, hi) in enumerate(zip(edges, edges[1:]), start=1)
    ]


def segment_log(
    log: EventLog,
    models: CbowModel | Sequence[CbowModel],
    params: SegmentationParams | None = None,
    aggregation: str = "mean",
    *,
    threads: int = 1,
    counters: Counter | None = None,
) -> SegmentedLog:
    """Score, detect, and split every user stream of the log.

    Cases come out sorted by (user, case ordinal); the multiset of output
    events always equals the input events.
    """
    params = params or SegmentationParams()
    counters = counters if counters is not None else Counter()
    streams = split_by_user(log)

    def cut(stream: UserStream) -> list[Case]:
        scores = boundary_scores(models, stream, aggregation, counters=counters)
        return split_stream(stream, detect_boundaries(scores, params))

    if threads > 1 and len(streams) > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            per_stream = list(pool.map(cut, streams))
    else:
        per_stream = [cut(stream) for stream in streams]
    return SegmentedLog([case for cases in per_stream for case in cases])


def write_segmented_csv(
    segmented: SegmentedLog,
    sink: IO[str],
    columns: Sequence[str] | None = None,
    schema: ColumnSchema | None = None,
) -> None:
    """Write the input rows back with a case_id column appended.

    Row order is (user, case ordinal, timestamp), i.e. the natural order of
    the segmented log.
    """
    schema = schema or ColumnSchema()
    if columns is None:
        extra_keys = sorted({k for case in segmented for e in case.events for k in e.extra})
        columns = list(schema.required()) + extra_keys
    writer = csv.writer(sink, lineterminator="\n")
    writer.writerow([*columns, "case_id"])
    for case in segmented.cases:
        for event in case.events:
            writer.writerow([_event_cell(event, col, schema) for col in columns] + [case.case_id])


def save_segmented_csv(
    segmented: SegmentedLog,
    path: str | Path,
    columns: Sequence[str] | None = None,
    schema: ColumnSchema | None = None,
) -> None:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        write_segmented_csv(segmented, handle, columns, schema)
