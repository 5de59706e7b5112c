"""Shared fixtures: the three-stream running example and small builders."""

from __future__ import annotations

from datetime import datetime, timedelta, timezone

import pytest

from clickseg.log_ingest import Event, EventLog, LinkGraph, UserStream
from clickseg.transition_system import build_merged_ts, prune_with_link_graph

T0 = datetime(2024, 1, 1, tzinfo=timezone.utc)

# e.g. stream "MAMBC" = the activities M, A, M, B, C one second apart
RUNNING_STREAMS = ["MAMBC", "MBCM", "MABC"]
RUNNING_EDGES = [("M", "A"), ("M", "B"), ("A", "B"), ("B", "C"), ("C", "M")]


def make_stream(user: str, activities, start: datetime = T0) -> UserStream:
    events = [
        Event(start + timedelta(seconds=i), activity, user)
        for i, activity in enumerate(activities)
    ]
    return UserStream(user, events)


def make_log(streams) -> EventLog:
    events = [e for s in streams for e in s.events]
    events.sort(key=lambda e: e.timestamp)
    return EventLog(events)


@pytest.fixture
def running_streams() -> list[UserStream]:
    return [make_stream(f"u{i}", acts) for i, acts in enumerate(RUNNING_STREAMS, start=1)]


@pytest.fixture
def running_graph() -> LinkGraph:
    return LinkGraph.from_edges(RUNNING_EDGES)


@pytest.fixture
def merged_ts(running_streams):
    return build_merged_ts(running_streams, window=2)


@pytest.fixture
def pruned_ts(merged_ts, running_graph):
    return prune_with_link_graph(merged_ts, running_graph)
