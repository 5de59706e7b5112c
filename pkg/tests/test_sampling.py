import random
from collections import Counter

import pytest
from scipy import stats

from conftest import make_stream
from clickseg.cbow import BOUNDARY_TOKEN
from clickseg.errors import ConfigError, DegenerateModelError
from clickseg.log_ingest import LinkGraph
from clickseg.trace_sampler import (
    build_training_sequences,
    generate_training_log,
    read_traces,
    sample_trace,
    write_traces,
)
from clickseg.transition_system import (
    INITIAL,
    TAU,
    build_merged_ts,
    filter_rare,
    prune_with_link_graph,
)


class ScriptedRandom(random.Random):
    """random.Random whose uniform draws come from a fixed script."""

    def __new__(cls, script):  # Random.__new__ would try to hash the script
        return super().__new__(cls)

    def __init__(self, script):
        super().__init__()
        self.script = list(script)

    def random(self):
        return self.script.pop(0)


class TestSampleTrace:
    def test_forced_path(self, pruned_ts):
        # at (M): cumulative weights [A:2, B:3]; at (B,C): [M:1, stop:3]
        rng = ScriptedRandom([0.0, 0.0, 0.0, 0.0, 0.9])
        assert sample_trace(pruned_ts, rng) == ["M", "A", "B", "C"]

    def test_forced_path_with_cycle(self, pruned_ts):
        # take B at (M), then M at (B,C), then the forced stop at (C,M)
        counters = Counter()
        rng = ScriptedRandom([0.0, 0.9, 0.0, 0.1, 0.5])
        assert sample_trace(pruned_ts, rng, counters=counters) == ["M", "B", "C", "M"]
        assert counters["dead_end_endings"] == 0

    def test_dead_end_forces_ending(self):
        # pruning strips (X,Y)'s only outgoing transition but leaves it reachable
        ts = build_merged_ts([make_stream("u", "XYZ")], window=2)
        pruned = prune_with_link_graph(ts, LinkGraph.from_edges([("X", "Y")]))
        counters = Counter()
        trace = sample_trace(pruned, random.Random(0), counters=counters)
        assert trace == ["X", "Y"]
        assert counters["dead_end_endings"] == 1

    def test_single_chain(self):
        ts = build_merged_ts([make_stream("u", "M")], window=2)
        rng = random.Random(0)
        for _ in range(20):
            assert sample_trace(ts, rng) == ["M"]

    def test_max_len_cap(self):
        ts = build_merged_ts([make_stream("u", "ABABABABAB")], window=2)
        counters = Counter()
        trace = sample_trace(ts, ScriptedRandom([0.0] * 13), max_len=12, counters=counters)
        assert len(trace) == 12
        assert counters["max_len_endings"] == 1

    def test_traces_replay_on_link_graph(self, pruned_ts, running_graph):
        rng = random.Random(42)
        for _ in range(2000):
            trace = sample_trace(pruned_ts, rng)
            for src, dst in zip(trace, trace[1:]):
                assert running_graph.has_edge(src, dst)


class TestGenerateTrainingLog:
    def test_zero_traces(self, pruned_ts):
        assert generate_training_log(pruned_ts, 0) == []

    def test_exact_count_and_determinism(self, pruned_ts):
        a = generate_training_log(pruned_ts, 500, seed=9)
        b = generate_training_log(pruned_ts, 500, seed=9)
        assert len(a) == 500
        assert a == b
        assert a != generate_training_log(pruned_ts, 500, seed=10)

    def test_degenerate_ts_rejected(self, merged_ts):
        empty = filter_rare(merged_ts, 99)
        with pytest.raises(DegenerateModelError, match="degenerate model"):
            generate_training_log(empty, 10)

    def test_short_traces_resampled(self, pruned_ts):
        counters = Counter()
        log = generate_training_log(pruned_ts, 300, seed=3, counters=counters)
        assert all(len(trace) >= 2 for trace in log)

    def test_all_short_kept_after_retries(self):
        ts = build_merged_ts([make_stream("u", "M")], window=2)
        counters = Counter()
        log = generate_training_log(ts, 5, seed=0, counters=counters)
        assert log == [["M"]] * 5
        assert counters["short_traces_kept"] == 5

    def test_start_frequencies_match_weights(self):
        streams = [make_stream(f"m{i}", "MB") for i in range(3)]
        streams += [make_stream("a0", "AB")]
        ts = build_merged_ts(streams, window=2)
        log = generate_training_log(ts, 100000, seed=17)
        share = sum(t[0] == "M" for t in log) / len(log)
        assert share == pytest.approx(0.75, abs=0.01)

    def test_transition_frequencies_chi_squared(self, pruned_ts):
        # goodness of fit of observed outgoing choices against the
        # transition probabilities, per state with more than one option
        rng = random.Random(101)
        visits: Counter = Counter()
        for _ in range(100000):
            state = INITIAL
            for _ in range(50):
                out = pruned_ts.outgoing(state)
                if not out:
                    break
                chosen = rng.choices(out, weights=[pruned_ts.weight(t) for t in out])[0]
                visits[chosen] += 1
                if chosen.label is TAU:
                    break
                state = chosen.target
        for state in pruned_ts.states:
            out = pruned_ts.outgoing(state)
            if len(out) < 2:
                continue
            observed = [visits[t] for t in out]
            total = sum(observed)
            expected = [pruned_ts.weight(t) / pruned_ts.out_total(state) * total for t in out]
            result = stats.chisquare(observed, expected)
            assert result.pvalue > 0.01


class TestBuildTrainingSequences:
    def test_join_with_boundary(self):
        sequences = build_training_sequences(
            [["a1", "a2", "a4", "a5"], ["a6", "a7", "a8"]], traces_per_sequence=2
        )
        assert sequences == [["a1", "a2", "a4", "a5", BOUNDARY_TOKEN, "a6", "a7", "a8"]]

    def test_group_size_one_has_no_boundary(self):
        sequences = build_training_sequences([["a", "b"], ["c", "d"]], traces_per_sequence=1)
        assert sequences == [["a", "b"], ["c", "d"]]
        assert all(BOUNDARY_TOKEN not in seq for seq in sequences)

    def test_token_count(self):
        traces = [["a"] * n for n in (2, 3, 4, 5, 6)]
        sequences = build_training_sequences(traces, traces_per_sequence=2)
        joins = sum(seq.count(BOUNDARY_TOKEN) for seq in sequences)
        assert joins == 2  # groups of sizes 2, 2, 1
        assert sum(len(seq) for seq in sequences) == sum(len(t) for t in traces) + joins

    def test_boundary_never_first_last_or_adjacent(self, pruned_ts):
        log = generate_training_log(pruned_ts, 200, seed=4)
        rng = random.Random(1)
        for seq in build_training_sequences(log, 10, rng=rng):
            assert seq[0] != BOUNDARY_TOKEN
            assert seq[-1] != BOUNDARY_TOKEN
            for a, b in zip(seq, seq[1:]):
                assert not (a == BOUNDARY_TOKEN and b == BOUNDARY_TOKEN)

    def test_shuffle_uses_rng(self):
        traces = [[f"t{i}"] for i in range(50)]
        shuffled = build_training_sequences(traces, 50, rng=random.Random(2))
        tokens = [t for t in shuffled[0] if t != BOUNDARY_TOKEN]
        assert tokens != [f"t{i}" for i in range(50)]
        assert sorted(tokens) == sorted(f"t{i}" for i in range(50))

    def test_every_trace_used_once(self):
        traces = [[f"t{i}", "x"] for i in range(23)]
        sequences = build_training_sequences(traces, 4, rng=random.Random(8))
        tokens = [t for seq in sequences for t in seq if t != BOUNDARY_TOKEN]
        assert sorted(tokens) == sorted(t for trace in traces for t in trace)

    def test_boundary_collision_rejected(self):
        with pytest.raises(ConfigError):
            build_training_sequences([[BOUNDARY_TOKEN, "a"]], 2)

    def test_group_size_below_one_rejected(self):
        with pytest.raises(ConfigError):
            build_training_sequences([["a"]], 0)


def test_trace_file_round_trip(tmp_path, pruned_ts):
    log = generate_training_log(pruned_ts, 50, seed=6)
    path = tmp_path / "traces.txt"
    write_traces(log, path)
    assert read_traces(path) == log
