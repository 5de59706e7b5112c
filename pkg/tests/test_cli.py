import json
from pathlib import Path

import pytest

from conftest import RUNNING_EDGES, RUNNING_STREAMS, make_log, make_stream
from clickseg.cbow import load_model
from clickseg.cli import main
from clickseg.log_ingest import write_event_log

GOLDEN = Path(__file__).parent / "data" / "dfg_golden.dot"


def write_workspace(root: Path) -> dict[str, str]:
    """Drop the running-example log and link graph into ``root``."""
    log = make_log([make_stream(f"u{i}", s) for i, s in enumerate(RUNNING_STREAMS, start=1)])
    log_path = root / "log.csv"
    with open(log_path, "w", encoding="utf-8", newline="") as sink:
        write_event_log(log, sink)
    graph_path = root / "graph.txt"
    graph_path.write_text(
        "".join(f"{a} -> {b}\n" for a, b in RUNNING_EDGES), encoding="utf-8"
    )
    return {"log": str(log_path), "link_graph": str(graph_path)}


def generate_args(paths: dict[str, str], **extra: str) -> list[str]:
    argv = [
        "generate",
        "--paths.log", paths["log"],
        "--paths.link_graph", paths["link_graph"],
        "--paths.traces", paths["traces"],
        "--sampler.n", "300",
        "--sampler.seed", "3",
    ]
    for dotted, value in extra.items():
        argv += [f"--{dotted}", value]
    return argv


def train_args(paths: dict[str, str], **extra: str) -> list[str]:
    argv = [
        "train",
        "--paths.traces", paths["traces"],
        "--paths.model", paths["model"],
        "--train.embedding_dim", "8",
        "--train.epochs", "2",
        "--train.seed", "5",
    ]
    for dotted, value in extra.items():
        argv += [f"--{dotted}", value]
    return argv


@pytest.fixture
def workspace(tmp_path) -> dict[str, str]:
    paths = write_workspace(tmp_path)
    paths["traces"] = str(tmp_path / "traces.txt")
    paths["model"] = str(tmp_path / "model.json")
    paths["output"] = str(tmp_path / "segmented.csv")
    return paths


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory) -> dict[str, str]:
    """One generated-and-trained workspace shared by the downstream tests."""
    root = tmp_path_factory.mktemp("pipeline")
    paths = write_workspace(root)
    paths["traces"] = str(root / "traces.txt")
    paths["model"] = str(root / "model.json")
    paths["output"] = str(root / "segmented.csv")
    assert main(generate_args(paths)) == 0
    assert main(train_args(paths)) == 0
    return paths


class TestGenerate:
    def test_reports_pruning_and_writes_traces(self, workspace, capsys):
        assert main(generate_args(workspace)) == 0
        out = capsys.readouterr().out
        assert "pruned transitions: 1" in out
        assert "removed states: 1" in out
        assert "wrote 300 traces" in out
        lines = Path(workspace["traces"]).read_text(encoding="utf-8").splitlines()
        assert len(lines) == 300
        assert all(set(line.split()) <= set("MABC") for line in lines)

    def test_same_seed_same_bytes(self, workspace, tmp_path):
        other = dict(workspace, traces=str(tmp_path / "again.txt"))
        assert main(generate_args(workspace)) == 0
        assert main(generate_args(other)) == 0
        assert Path(workspace["traces"]).read_bytes() == Path(other["traces"]).read_bytes()

    def test_n_override(self, workspace):
        assert main(generate_args(workspace, **{"sampler.n": "17"})) == 0
        assert len(Path(workspace["traces"]).read_text(encoding="utf-8").splitlines()) == 17

    def test_huge_epsilon_degenerate(self, workspace, capsys):
        assert main(generate_args(workspace, epsilon="99")) == 2
        assert "degenerate model" in capsys.readouterr().err

    def test_ts_dot_dump(self, workspace, tmp_path):
        dot_path = tmp_path / "ts.dot"
        args = generate_args(workspace, **{"paths.ts_dot": str(dot_path)})
        assert main(args) == 0
        text = dot_path.read_text(encoding="utf-8")
        assert text.startswith("digraph")
        assert '"(M)"' in text

    def test_missing_path_names_flag(self, workspace, capsys):
        argv = ["generate", "--paths.log", workspace["log"]]
        assert main(argv) == 1
        assert "--paths.link_graph" in capsys.readouterr().err

    def test_missing_log_file_is_data_error(self, workspace):
        assert main(generate_args(dict(workspace, log=workspace["log"] + ".nope"))) == 2


class TestTrain:
    def test_trains_and_logs_losses(self, workspace, capsys):
        assert main(generate_args(workspace)) == 0
        capsys.readouterr()
        assert main(train_args(workspace)) == 0
        out = capsys.readouterr().out
        loss_lines = [l for l in out.splitlines() if l.startswith("model 0 epoch")]
        assert len(loss_lines) == 2
        model = load_model(workspace["model"])
        assert set("MABC") < {model.vocab.token(i) for i in range(len(model.vocab))}

    def test_ensemble_files_differ(self, workspace, capsys):
        assert main(generate_args(workspace)) == 0
        assert main(train_args(workspace, **{"train.ensemble": "3"})) == 0
        root = Path(workspace["model"]).parent
        files = [root / "model.json", root / "model.1.json", root / "model.2.json"]
        assert all(f.exists() for f in files)
        first, second = load_model(files[0]), load_model(files[1])
        assert (first.input_embeddings != second.input_embeddings).any()
        out = capsys.readouterr().out
        assert len([l for l in out.splitlines() if ": loss " in l]) == 6

    def test_missing_traces_file(self, workspace):
        assert main(train_args(workspace)) == 2


class TestSegment:
    def segment_args(self, paths: dict[str, str], **extra: str) -> list[str]:
        argv = [
            "segment",
            "--paths.log", paths["log"],
            "--paths.model", paths["model"],
            "--paths.output", paths["output"],
        ]
        for dotted, value in extra.items():
            argv += [f"--{dotted}", value]
        return argv

    def test_preserves_rows_and_appends_case_ids(self, pipeline, capsys):
        assert main(self.segment_args(pipeline)) == 0
        src = Path(pipeline["log"]).read_text(encoding="utf-8").splitlines()
        dst = Path(pipeline["output"]).read_text(encoding="utf-8").splitlines()
        assert len(dst) == len(src)
        assert dst[0] == src[0] + ",case_id"
        case_ids = [line.rsplit(",", 1)[1] for line in dst[1:]]
        assert all("#" in cid for cid in case_ids)
        assert "wrote 13 rows" in capsys.readouterr().out

    def test_rerun_on_own_output_rejected(self, pipeline, capsys):
        assert main(self.segment_args(pipeline)) == 0
        capsys.readouterr()
        rerun = dict(pipeline, log=pipeline["output"], output=pipeline["output"] + "2")
        assert main(self.segment_args(rerun)) == 2
        assert "already segmented" in capsys.readouterr().err

    def test_figures_rendered(self, pipeline, tmp_path):
        out = tmp_path / "seg.csv"
        args = self.segment_args(dict(pipeline, output=str(out)), figures="true")
        assert main(args) == 0
        assert list(tmp_path.glob("seg_scores_*.png"))

    def test_vocabulary_mismatch(self, pipeline, tmp_path, capsys):
        foreign = make_log([make_stream("w", ["X", "Y", "Z", "X"])])
        path = tmp_path / "foreign.csv"
        with open(path, "w", encoding="utf-8", newline="") as sink:
            write_event_log(foreign, sink)
        args = self.segment_args(dict(pipeline, log=str(path), output=str(tmp_path / "o.csv")))
        assert main(args) == 2
        assert "vocabulary mismatch" in capsys.readouterr().err


class TestEval:
    def eval_args(self, paths: dict[str, str], truth: str, metrics: str | None = None) -> list[str]:
        argv = ["eval", "--paths.output", paths["output"], "--paths.truth", truth]
        if metrics:
            argv += ["--paths.metrics", metrics]
        return argv

    def test_perfect_scores_on_own_boundaries(self, pipeline, tmp_path, capsys):
        argv = [
            "segment",
            "--paths.log", pipeline["log"],
            "--paths.model", pipeline["model"],
            "--paths.output", pipeline["output"],
        ]
        assert main(argv) == 0
        from clickseg.evaluation import boundaries_from_case_column
        from clickseg.log_ingest import load_event_log

        predicted = boundaries_from_case_column(load_event_log(pipeline["output"]))
        truth_path = tmp_path / "truth.json"
        truth_path.write_text(
            json.dumps({u: sorted(g) for u, g in predicted.items()}), encoding="utf-8"
        )
        metrics_path = tmp_path / "metrics.json"
        capsys.readouterr()
        assert main(self.eval_args(pipeline, str(truth_path), str(metrics_path))) == 0
        document = json.loads(metrics_path.read_text(encoding="utf-8"))
        assert document["f1"] == 1.0
        assert set(document) == {"precision", "recall", "f1", "n_true", "n_predicted", "tolerance"}
        assert '"f1": 1.0' in capsys.readouterr().out

    def test_unsegmented_output_rejected(self, pipeline, tmp_path):
        truth = tmp_path / "truth.json"
        truth.write_text("{}", encoding="utf-8")
        args = self.eval_args(dict(pipeline, output=pipeline["log"]), str(truth))
        assert main(args) == 2

    def test_malformed_truth_rejected(self, pipeline, tmp_path, capsys):
        argv = [
            "segment",
            "--paths.log", pipeline["log"],
            "--paths.model", pipeline["model"],
            "--paths.output", pipeline["output"],
        ]
        assert main(argv) == 0
        bad = tmp_path / "bad.json"
        bad.write_text("[1, 2]", encoding="utf-8")
        assert main(self.eval_args(pipeline, str(bad))) == 2
        worse = tmp_path / "worse.json"
        worse.write_text("{not json", encoding="utf-8")
        assert main(self.eval_args(pipeline, str(worse))) == 2


class TestDfg:
    SEGMENTED = (
        "timestamp,screen,user,case_id\n"
        "2024-01-01 10:00:00.000,M,u1,u1#1\n"
        "2024-01-01 10:00:01.000,A,u1,u1#1\n"
        "2024-01-01 10:00:02.000,B,u1,u1#1\n"
        "2024-01-01 10:01:00.000,M,u1,u1#2\n"
        "2024-01-01 10:01:01.000,B,u1,u1#2\n"
        "2024-01-01 10:02:00.000,B,u2,u2#1\n"
        "2024-01-01 10:02:01.000,C,u2,u2#1\n"
        "2024-01-01 10:02:02.000,M,u2,u2#1\n"
    )

    def test_stdout_dot(self, tmp_path, capsys):
        path = tmp_path / "seg.csv"
        path.write_text(self.SEGMENTED, encoding="utf-8")
        assert main(["dfg", "--paths.output", str(path)]) == 0
        out = capsys.readouterr().out
        assert out.startswith("digraph dfg {")
        assert '"M" -> "A" [label="1"];' in out

    def test_file_matches_golden(self, tmp_path):
        path = tmp_path / "seg.csv"
        path.write_text(self.SEGMENTED, encoding="utf-8")
        dot_path = tmp_path / "dfg.dot"
        argv = ["dfg", "--paths.output", str(path), "--paths.dfg", str(dot_path)]
        assert main(argv) == 0
        assert dot_path.read_bytes() == GOLDEN.read_bytes()

    def test_min_arc_freq_flag(self, tmp_path, capsys):
        path = tmp_path / "seg.csv"
        path.write_text(self.SEGMENTED, encoding="utf-8")
        argv = ["dfg", "--paths.output", str(path), "--dfg.min_arc_freq", "2"]
        assert main(argv) == 0
        out = capsys.readouterr().out
        assert "->" not in out.replace("digraph", "")

    def test_unsegmented_input_rejected(self, workspace):
        assert main(["dfg", "--paths.output", workspace["log"]]) == 2


class TestUsageAndConfig:
    def test_no_command_exits_1(self):
        with pytest.raises(SystemExit) as exc:
            main([])
        assert exc.value.code == 1

    def test_unknown_flag_exits_1(self):
        with pytest.raises(SystemExit) as exc:
            main(["generate", "--bogus", "1"])
        assert exc.value.code == 1

    def test_help_exits_0(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["--help"])
        assert exc.value.code == 0
        assert "generate" in capsys.readouterr().out

    def test_unknown_config_field_exits_1(self, workspace, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text('{"paths": {"log": "x"}, "nope": 1}', encoding="utf-8")
        assert main(["generate", "--config", str(cfg)]) == 1
        assert "unknown config field: nope" in capsys.readouterr().err

    def test_flag_overrides_config_file(self, workspace, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(
            json.dumps(
                {
                    "paths": {k: workspace[k] for k in ("log", "link_graph", "traces")},
                    "sampler": {"n": 5, "seed": 3},
                }
            ),
            encoding="utf-8",
        )
        assert main(["generate", "--config", str(cfg), "--sampler.n", "7"]) == 0
        assert len(Path(workspace["traces"]).read_text(encoding="utf-8").splitlines()) == 7

    def test_bad_flag_value_exits_1(self, workspace, capsys):
        assert main(generate_args(workspace, **{"sampler.n": "many"})) == 1
        assert "expected an integer" in capsys.readouterr().err

    def test_warning_summary_printed(self, workspace, capsys):
        assert main(generate_args(workspace)) == 0
        assert "warnings:" in capsys.readouterr().out
