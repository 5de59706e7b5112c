"""Monte Carlo sampling of traces from a weighted transition system.

Traces are drawn ancestrally: starting in the initial state, one outgoing
transition is chosen at each step with probability proportional to its
weight. Choosing the silent end transition stops the trace, so stopping
follows the per-state end probability. The sampled log is then shuffled and
concatenated into training sequences with a boundary token between traces.
"""

from __future__ import annotations

import random
from collections import Counter
from pathlib import Path
from typing import Sequence

from .cbow import BOUNDARY_TOKEN
from .errors import ConfigError, DegenerateModelError
from .transition_system import INITIAL, TAU, WeightedTransitionSystem

# give up re-drawing a too-short trace after this many attempts
SHORT_TRACE_RETRIES = 20


def sample_trace(
    ts: WeightedTransitionSystem,
    rng: random.Random,
    max_len: int = 50,
    *,
    counters: Counter | None = None,
) -> list[str]:
    """Draw one activity trace from the transition system.

    States with no outgoing transitions and the ``max_len`` cap both force an
    ending; the caps are counted in ``counters``.
    """
    counters = counters if counters is not None else Counter()
    trace: list[str] = []
    state = INITIAL
    while len(trace) < max_len:
        out = ts.outgoing(state)
        if not out:
            counters["dead_end_endings"] += 1
            return trace
        weights = [ts.weight(t) for t in out]
        chosen = rng.choices(out, weights=weights)[0]
        if chosen.label is TAU:
            return trace
        trace.append(chosen.label)
        state = chosen.target
    counters["max_len_endings"] += 1
    return trace


def generate_training_log(
    ts: WeightedTransitionSystem,
    n: int = 10000,
    seed: int | None = None,
    *,
    min_len: int = 2,
    max_len: int = 50,
    counters: Counter | None = None,
) -> list[list[str]]:
    """Sample ``n`` traces, re-drawing ones shorter than ``min_len``.

    A trace still short after SHORT_TRACE_RETRIES re-draws is kept anyway
    (systems whose every path is short would otherwise never finish); the
    count of kept short traces goes to ``counters``.
    """
    if n < 0:
        raise ConfigError(f"number of traces must be >= 0, got {n}")
    counters = counters if counters is not None else Counter()
    if n and not ts.outgoing(INITIAL):
        raise DegenerateModelError(
            "degenerate model: the transition system has no transitions out of the initial state"
        )
    rng = random.Random(seed)
    log: list[list[str]] = []
    for _ in range(n):
        trace = sample_trace(ts, rng, max_len, counters=counters)
        attempts = 0
        while len(trace) < min_len and attempts < SHORT_TRACE_RETRIES:
            counters["resampled_short_traces"] += 1
            trace = sample_trace(ts, rng, max_len, counters=counters)
            attempts += 1
        if len(trace) < min_len:
            counters["short_traces_kept"] += 1
        log.append(trace)
    return log


def build_training_sequences(
    traces: Sequence[Sequence[str]],
    traces_per_sequence: int = 10,
    rng: random.Random | None = None,
    boundary_token: str = BOUNDARY_TOKEN,
) -> list[list[str]]:
    """Group traces and join each group with a boundary token between traces.

    With an ``rng`` the traces are shuffled first so each sequence mixes
    process instances. A single token separates adjacent traces; sequences
    never start or end with it.
    """
    if traces_per_sequence < 1:
        raise ConfigError(f"traces per sequence must be >= 1, got {traces_per_sequence}")
    for trace in traces:
        if boundary_token in trace:
            raise ConfigError(f"boundary token {boundary_token!r} collides with an activity name")
    pool = [list(t) for t in traces]
    if rng is not None:
        rng.shuffle(pool)
    sequences: list[list[str]] = []
    for offset in range(0, len(pool), traces_per_sequence):
        group = pool[offset : offset + traces_per_sequence]
        seq: list[str] = []
        for trace in group:
            if seq and trace:
                seq.append(boundary_token)
            seq.extend(trace)
        if seq:
            sequences.append(seq)
    return sequences


def write_traces(traces: Sequence[Sequence[str]], path: str | Path) -> None:
    """One trace per line, labels space-separated."""
    with open(path, "w", encoding="utf-8") as handle:
        for trace in traces:
            handle.write(" ".join(trace) + "\n")


def read_traces(path: str | Path) -> list[list[str]]:
    with open(path, encoding="utf-8") as handle:
        return [line.split() for line in handle if line.strip()]
