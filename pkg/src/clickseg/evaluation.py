"""Synthetic ground truth, boundary metrics, and DFG discovery.

Real click data comes without case identifiers, so segmentation quality is
measured on synthesized logs whose true boundaries are known by
construction. The discovered directly-follows graph of a segmented log
serves as a visual sanity check.
"""

from __future__ import annotations

import random
import statistics
from collections import Counter
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from typing import Mapping, Sequence

from .errors import ConfigError, DegenerateModelError, SchemaError
from .log_ingest import Event, EventLog, split_by_user
from .segmenter import Case, SegmentedLog
from .trace_sampler import SHORT_TRACE_RETRIES, sample_trace
from .transition_system import WeightedTransitionSystem

# (trace, weight) table usable as a generator instead of a transition system
TraceTable = Sequence[tuple[Sequence[str], float]]

_BASE_TIME = datetime(2024, 1, 1, tzinfo=timezone.utc)


@dataclass
class GroundTruthLog:
    """An unsegmented log plus the per-user gap indices of the true splits."""

    unsegmented: EventLog
    true_boundaries: dict[str, set[int]] = field(default_factory=dict)


def _draw_trace(
    generator: WeightedTransitionSystem | TraceTable,
    rng: random.Random,
    max_len: int,
) -> list[str]:
    if isinstance(generator, WeightedTransitionSystem):
        trace = sample_trace(generator, rng, max_len)
        attempts = 0
        while not trace and attempts < SHORT_TRACE_RETRIES:
            trace = sample_trace(generator, rng, max_len)
            attempts += 1
        if not trace:
            raise DegenerateModelError("generator keeps producing empty traces")
        return trace
    table = list(generator)
    if not table or any(not trace for trace, _ in table):
        raise DegenerateModelError("trace table must be non-empty with non-empty traces")
    traces = [list(trace) for trace, _ in table]
    weights = [weight for _, weight in table]
    return list(rng.choices(traces, weights=weights)[0])


def synthesize_ground_truth(
    generator: WeightedTransitionSystem | TraceTable,
    n_users: int,
    cases_per_user: int | tuple[int, int],
    seed: int | None = None,
    *,
    max_len: int = 50,
    within_case_step: float = 1.0,
    between_case_step: float = 60.0,
) -> GroundTruthLog:
    """Build a log of ``n_users`` streams, each a concatenation of sampled cases.

    Timestamps are synthetic: ``within_case_step`` seconds between events of
    a case and ``between_case_step`` seconds across case borders (the
    segmenter never reads them; they only aid inspection). The returned
    ground truth records each user's true boundary gaps.
    """
    if n_users < 1:
        raise ConfigError(f"n_users must be >= 1, got {n_users}")
    lo, hi = (cases_per_user, cases_per_user) if isinstance(cases_per_user, int) else cases_per_user
    if not 1 <= lo <= hi:
        raise ConfigError(f"cases_per_user range must satisfy 1 <= lo <= hi, got ({lo}, {hi})")
    rng = random.Random(seed)
    events: list[Event] = []
    boundaries: dict[str, set[int]] = {}
    for u in range(n_users):
        user = f"u{u:05d}"
        n_cases = rng.randint(lo, hi)
        clock = _BASE_TIME
        position = 0
        boundaries[user] = set()
        for case_no in range(n_cases):
            if case_no:
                boundaries[user].add(position)
                clock += timedelta(seconds=between_case_step - within_case_step)
            for activity in _draw_trace(generator, rng, max_len):
                events.append(Event(clock, activity, user))
                clock += timedelta(seconds=within_case_step)
                position += 1
    events.sort(key=lambda e: e.timestamp)  # stable: ties keep build order
    return GroundTruthLog(EventLog(events), boundaries)


def _as_per_user(boundaries: Mapping[str, set[int]] | Sequence[int] | set[int]) -> dict[str, set[int]]:
    if isinstance(boundaries, Mapping):
        return {user: set(gaps) for user, gaps in boundaries.items()}
    return {"": set(boundaries)}


def _greedy_matches(predicted: set[int], truth: set[int], tolerance: int) -> int:
    p, t = sorted(predicted), sorted(truth)
    i = j = matched = 0
    while i < len(p) and j < len(t):
        if abs(p[i] - t[j]) <= tolerance:
            matched += 1
            i += 1
            j += 1
        elif p[i] < t[j]:
            i += 1
        else:
            j += 1
    return matched


def boundary_metrics(
    predicted: Mapping[str, set[int]] | Sequence[int] | set[int],
    truth: Mapping[str, set[int]] | Sequence[int] | set[int],
    tolerance: int = 0,
) -> dict:
    """Precision, recall, and F1 of predicted boundary gaps against the truth.

    A predicted boundary matches an unmatched true boundary within
    ``tolerance`` gaps; matching is greedy left to right per user. With no
    predictions and no truth, both components are 1.
    """
    if tolerance < 0:
        raise ConfigError(f"tolerance must be >= 0, got {tolerance}")
    pred = _as_per_user(predicted)
    true = _as_per_user(truth)
    matched = n_predicted = n_true = 0
    for user in pred.keys() | true.keys():
        p = pred.get(user, set())
        t = true.get(user, set())
        matched += _greedy_matches(p, t, tolerance)
        n_predicted += len(p)
        n_true += len(t)
    precision = matched / n_predicted if n_predicted else (1.0 if n_true == 0 else 0.0)
    recall = matched / n_true if n_true else (1.0 if n_predicted == 0 else 0.0)
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return {
        "precision": precision,
        "recall": recall,
        "f1": f1,
        "n_true": n_true,
        "n_predicted": n_predicted,
        "tolerance": tolerance,
    }


def boundaries_from_case_column(log: EventLog, case_column: str = "case_id") -> dict[str, set[int]]:
    """Read predicted boundaries back from a log whose rows carry case ids."""
    boundaries: dict[str, set[int]] = {}
    for stream in split_by_user(log):
        gaps: set[int] = set()
        for g in range(1, len(stream.events)):
            left = stream.events[g - 1].extra.get(case_column)
            right = stream.events[g].extra.get(case_column)
            if left is None or right is None:
                raise SchemaError(f"missing {case_column!r} value for user {stream.user!r}")
            if left != right:
                gaps.add(g)
        boundaries[stream.user] = gaps
    return boundaries


@dataclass
class Dfg:
    """Directly-follows graph: node and arc frequencies of a segmented log."""

    nodes: dict[str, int] = field(default_factory=dict)
    arcs: dict[tuple[str, str], int] = field(default_factory=dict)


def discover_dfg(
    segmented: SegmentedLog | Sequence[Case] | Sequence[Sequence[str]],
    min_arc_freq: int = 0,
) -> Dfg:
    """Count directly-follows pairs within cases, never across boundaries.

    Arcs seen fewer than ``min_arc_freq`` times are dropped; nodes left
    without any incident arc are dropped too.
    """
    if min_arc_freq < 0:
        raise ConfigError(f"min_arc_freq must be >= 0, got {min_arc_freq}")
    cases = segmented.cases if isinstance(segmented, SegmentedLog) else list(segmented)
    node_freq: Counter = Counter()
    arc_freq: Counter = Counter()
    for case in cases:
        activities = case.activities() if isinstance(case, Case) else list(case)
        node_freq.update(activities)
        arc_freq.update(zip(activities, activities[1:]))
    arcs = {arc: freq for arc, freq in arc_freq.items() if freq >= min_arc_freq}
    connected = {label for arc in arcs for label in arc}
    nodes = {label: freq for label, freq in node_freq.items() if label in connected}
    return Dfg(nodes, arcs)


def export_dot(dfg: Dfg) -> str:
    """Deterministic DOT text: nodes lexicographic, labels carry frequencies."""
    lines = ["digraph dfg {"]
    for label in sorted(dfg.nodes):
        lines.append(f'  "{label}" [shape=box label="{label} ({dfg.nodes[label]})"];')
    for src, dst in sorted(dfg.arcs):
        lines.append(f'  "{src}" -> "{dst}" [label="{dfg.arcs[(src, dst)]}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def summarize_cases(segmented: SegmentedLog) -> dict:
    """Case count plus length and duration statistics for reports."""
    if not segmented.cases:
        return {
            "n_cases": 0,
            "mean_case_length": 0.0,
            "median_case_length": 0.0,
            "mean_case_duration_s": 0.0,
            "median_case_duration_s": 0.0,
        }
    lengths = [len(case) for case in segmented.cases]
    durations = [
        (case.events[-1].timestamp - case.events[0].timestamp).total_seconds()
        for case in segmented.cases
    ]
    return {
        "n_cases": len(segmented.cases),
        "mean_case_length": statistics.fmean(lengths),
        "median_case_length": float(statistics.median(lengths)),
        "mean_case_duration_s": statistics.fmean(durations),
        "median_case_duration_s": float(statistics.median(durations)),
    }
