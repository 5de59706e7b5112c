"""Weighted transition systems over recent-activity windows.

States are the last ``w`` activities of a user stream (sequence abstraction).
All per-user systems share one initial state ``i``; stream ends are modeled
by a silent transition (label ``None``, rendered as ``τ``) into a final sink
``f``. Transition weights count occurrences across the whole log, which
yields the traversal, start, and end probabilities used for sampling.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import ConfigError
from .log_ingest import LinkGraph, UserStream

TAU = None  # silent label on transitions into the final sink


@dataclass(frozen=True, slots=True)
class TsState:
    window: tuple[str, ...] = ()
    kind: str = "window"  # "window" | "initial" | "final"

    def name(self) -> str:
        if self.kind == "initial":
            return "i"
        if self.kind == "final":
            return "f"
        return "(" + ",".join(self.window) + ")"


INITIAL = TsState(kind="initial")
FINAL = TsState(kind="final")


@dataclass(frozen=True, slots=True)
class Transition:
    source: TsState
    label: str | None
    target: TsState

    def __post_init__(self) -> None:
        if (self.label is TAU) != (self.target.kind == "final"):
            raise ValueError("silent label and final target must coincide")


def _sort_key(t: Transition) -> tuple:
    return (t.label is TAU, t.label or "", t.target.window)


class WeightedTransitionSystem:
    """Immutable transition system with per-transition occurrence counts."""

    def __init__(self, window: int, weights: dict[Transition, int]):
        if window < 1:
            raise ConfigError(f"window must be >= 1, got {window}")
        self.window = window
        self.weights: dict[Transition, int] = dict(weights)
        self._out: dict[TsState, list[Transition]] = {}
        for t in self.weights:
            self._out.setdefault(t.source, []).append(t)
        for ts_list in self._out.values():
            ts_list.sort(key=_sort_key)
        self._out_total = {s: sum(self.weights[t] for t in ts) for s, ts in self._out.items()}
        self._end_total = sum(w for t, w in self.weights.items() if t.label is TAU)

    @property
    def states(self) -> set[TsState]:
        found = set()
        for t in self.weights:
            found.add(t.source)
            found.add(t.target)
        return found

    @property
    def transitions(self) -> set[Transition]:
        return set(self.weights)

    def weight(self, t: Transition) -> int:
        return self.weights.get(t, 0)

    def outgoing(self, state: TsState) -> list[Transition]:
        return self._out.get(state, [])

    def out_total(self, state: TsState) -> int:
        return self._out_total.get(state, 0)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, WeightedTransitionSystem):
            return NotImplemented
        return self.window == other.window and self.weights == other.weights

    def __repr__(self) -> str:
        n_states = len(self.states)
        return f"WeightedTransitionSystem(window={self.window}, states={n_states}, transitions={len(self.weights)})"


def build_merged_ts(
    streams: Iterable[UserStream],
    window: int = 2,
    *,
    counters: Counter | None = None,
) -> WeightedTransitionSystem:
    """Build the merged system from all user streams and count transitions.

    Each stream contributes one path i -> ... -> f; weights accumulate across
    streams. Empty streams contribute nothing.
    """
    counters = counters if counters is not None else Counter()
    weights: Counter = Counter()
    for stream in streams:
        activities = [e.activity for e in stream.events]
        if not activities:
            counters["empty_streams"] += 1
            continue
        state = INITIAL
        recent: tuple[str, ...] = ()
        for activity in activities:
            recent = (recent + (activity,))[-window:]
            nxt = TsState(recent)
            weights[Transition(state, activity, nxt)] += 1
            state = nxt
        weights[Transition(state, TAU, FINAL)] += 1
    return WeightedTransitionSystem(window, dict(weights))


def _reachable_only(weights: dict[Transition, int]) -> tuple[dict[Transition, int], int]:
    """Drop transitions whose source is unreachable from i; report removed states."""
    by_source: dict[TsState, list[Transition]] = {}
    for t in weights:
        by_source.setdefault(t.source, []).append(t)
    reached = {INITIAL}
    frontier = [INITIAL]
    while frontier:
        state = frontier.pop()
        for t in by_source.get(state, ()):
            if t.target not in reached:
                reached.add(t.target)
                frontier.append(t.target)
    kept = {t: w for t, w in weights.items() if t.source in reached}
    before = {s for t in weights for s in (t.source, t.target) if s.kind == "window"}
    after = {s for t in kept for s in (t.source, t.target) if s.kind == "window"}
    return kept, len(before - after)


def filter_rare(ts: WeightedTransitionSystem, epsilon: int) -> WeightedTransitionSystem:
    """Remove transitions observed fewer than ``epsilon`` times, then re-prune
    states that the removal made unreachable."""
    if epsilon < 0:
        raise ConfigError(f"epsilon must be >= 0, got {epsilon}")
    kept = {t: w for t, w in ts.weights.items() if w >= epsilon}
    kept, _ = _reachable_only(kept)
    return WeightedTransitionSystem(ts.window, kept)


def prune_with_link_graph(
    ts: WeightedTransitionSystem,
    graph: LinkGraph,
    *,
    counters: Counter | None = None,
) -> WeightedTransitionSystem:
    """Keep only transitions whose (previous activity, label) pair is a link.

    Transitions out of the initial state have no previous activity and are
    always kept; silent end transitions survive iff their source does. States
    left unreachable are removed together with their outgoing transitions.
    Removal counts go to ``counters`` under ``pruned_transitions`` and
    ``removed_states``.
    """
    counters = counters if counters is not None else Counter()
    kept: dict[Transition, int] = {}
    for t, w in ts.weights.items():
        if t.label is TAU or t.source is INITIAL or t.source.kind == "initial":
            kept[t] = w
        elif graph.has_edge(t.source.window[-1], t.label):
            kept[t] = w
        else:
            counters["pruned_transitions"] += 1
    kept, removed_states = _reachable_only(kept)
    counters["removed_states"] += removed_states
    return WeightedTransitionSystem(ts.window, kept)


def l_trans(ts: WeightedTransitionSystem, t: Transition) -> float:
    """Probability of taking ``t`` among all outgoing transitions of its source
    (the silent end transition included); 0 when the source has no outgoing."""
    total = ts.out_total(t.source)
    if total == 0:
        return 0.0
    return ts.weight(t) / total


def l_start(ts: WeightedTransitionSystem, state: TsState) -> float:
    """Fraction of the incoming weight of ``state`` that originates in i."""
    from_initial = 0
    total = 0
    for t, w in ts.weights.items():
        if t.target == state:
            total += w
            if t.source.kind == "initial":
                from_initial += w
    if total == 0:
        return 0.0
    return from_initial / total


def start_distribution(ts: WeightedTransitionSystem) -> dict[TsState, float]:
    """Normalized weights of the initial transitions: a proper distribution
    over first states, used for sampling."""
    starts = ts.outgoing(INITIAL)
    total = sum(ts.weight(t) for t in starts)
    if total == 0:
        return {}
    return {t.target: ts.weight(t) / total for t in starts}


def l_end(ts: WeightedTransitionSystem, state: TsState, mode: str = "local") -> float:
    """Probability that a sequence ends at ``state``.

    ``local``: the silent end weight over all outgoing weight of the state,
    a per-state stopping probability. ``global``: the state's share of all
    observed stream endings.
    """
    tau_weight = ts.weight(Transition(state, TAU, FINAL))
    if mode == "local":
        total = ts.out_total(state)
        return tau_weight / total if total else 0.0
    if mode == "global":
        return tau_weight / ts._end_total if ts._end_total else 0.0
    raise ConfigError(f"unknown end-probability mode: {mode!r} (expected 'local' or 'global')")


def path_likelihood(
    ts: WeightedTransitionSystem,
    states: Sequence[TsState],
    labels: Sequence[str],
    mode: str = "local",
) -> float:
    """Likelihood of a state path entered via ``labels`` and ending at its
    last state: l_start(first) * prod(l_trans) * l_end(last).

    Any hop through an absent transition makes the result 0.
    """
    if len(states) != len(labels) or not states:
        raise ValueError("need one label per state (the first label enters from i)")
    if ts.weight(Transition(INITIAL, labels[0], states[0])) == 0:
        return 0.0
    likelihood = l_start(ts, states[0])
    for prev, label, state in zip(states, labels[1:], states[1:]):
        likelihood *= l_trans(ts, Transition(prev, label, state))
        if likelihood == 0.0:
            return 0.0
    return likelihood * l_end(ts, states[-1], mode)


def to_dot(ts: WeightedTransitionSystem, end_mode: str | None = None) -> str:
    """Render the system as DOT for visual inspection.

    Edges carry ``label/weight`` annotations. With ``end_mode`` set, states
    that can end a sequence additionally show their end probability.
    """
    def node_label(state: TsState) -> str:
        label = state.name()
        if end_mode and state.kind == "window":
            end_p = l_end(ts, state, end_mode)
            if end_p > 0.0:
                label += f"\\nend={end_p:.2f}"
        return label

    def state_order(state: TsState) -> tuple:
        rank = {"initial": 0, "window": 1, "final": 2}[state.kind]
        return (rank, len(state.window), state.window)

    states = sorted(ts.states, key=state_order)
    lines = ["digraph transition_system {", "  rankdir=LR;"]
    for state in states:
        shape = {"initial": "point", "final": "doublecircle"}.get(state.kind, "box")
        lines.append(f'  "{state.name()}" [shape={shape} label="{node_label(state)}"];')
    edges = sorted(ts.weights, key=lambda t: (state_order(t.source), _sort_key(t)))
    for t in edges:
        label = "τ" if t.label is TAU else t.label
        lines.append(f'  "{t.source.name()}" -> "{t.target.name()}" [label="{label}/{ts.weight(t)}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"
