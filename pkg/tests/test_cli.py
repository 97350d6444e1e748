import json
import time

import pytest

from sannloc.cli import config_hash, load_config, main

SMALL = [
    "--set", 'corpus={"problems": ["caughtSpeeding", "countEvens", "sumDigits", "countHi"], '
             '"correct_per_problem": 20, "incorrect_per_problem": 30}',
    "--set", 'students={"n_students": 40, "pool_size": 3}',
    "--set", "sann.epochs=5", "--set", "sann.early_stop_patience=5",
    "--set", "dkt.n_seeds=1", "--set", "dkt.epochs=2", "--set", "dkt.hidden=8",
    "--set", "grade.hidden=4", "--set", "grade.dense=4", "--set", "grade.epochs=3",
]


def run(tmp_path, *args):
    return main([*args, "--workdir", str(tmp_path)])


def test_missing_dependency_names_producer(tmp_path, capsys):
    assert run(tmp_path, "localize") == 3
    assert "sannloc train-sann" in capsys.readouterr().err
    assert run(tmp_path, "train-sann") == 3
    assert "sannloc corpus" in capsys.readouterr().err
    assert run(tmp_path, "eval") == 3


def test_invalid_ratio_names_field(tmp_path, capsys):
    code = run(tmp_path, "corpus", "--set", "corpus.split_ratios=[0.8, 0.1, 0.2]")
    assert code == 2
    assert "split_ratios" in capsys.readouterr().err


@pytest.mark.parametrize("args,fragment", [
    (["--set", "corpus.bogus=1"], "bogus"),
    (["--set", "localize.threshold=2"], "threshold"),
    (["--threads", "0"], "threads"),
])
def test_config_errors_exit_2(tmp_path, capsys, args, fragment):
    cmd = "localize" if "localize" in " ".join(args) else "corpus"
    assert run(tmp_path, cmd, *args) == 2
    assert fragment in capsys.readouterr().err


def test_config_file_and_overrides(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"seed": 4, "sann": {"epochs": 7}}))
    cfg = load_config(str(path), None, ["sann.embed_dim=8"])
    assert cfg["seed"] == 4 and cfg["sann"] == {"epochs": 7, "embed_dim": 8}
    assert load_config(str(path), 9, [])["seed"] == 9
    assert config_hash(cfg) == config_hash(json.loads(json.dumps(cfg)))
    path.write_text("{not json")
    assert main(["corpus", "--config", str(path), "--workdir", str(tmp_path)]) == 2


def test_corrupt_corpus_is_data_error(tmp_path):
    (tmp_path / "corpus").mkdir()
    (tmp_path / "corpus" / "corpus.jsonl").write_text("{broken\n")
    assert run(tmp_path, "train-sann") == 3


@pytest.fixture(scope="module")
def pipeline_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("run")
    t0 = time.perf_counter()
    for cmd in ("corpus", "train-sann", "localize", "eval"):
        assert main([cmd, "--workdir", str(root), *SMALL]) == 0, cmd
    elapsed = time.perf_counter() - t0
    return root, elapsed


def test_smoke_under_two_minutes(pipeline_dir):
    root, elapsed = pipeline_dir
    assert elapsed < 120
    corpus = (root / "corpus" / "corpus.jsonl").read_text().splitlines()
    assert len(corpus) == 200
    for rel in ("sann/model.ckpt", "localize/reports.jsonl", "eval/summary.json", "eval/summary.csv"):
        assert (root / rel).exists()


def test_eval_matches_metric_files(pipeline_dir):
    root, _ = pipeline_dir
    summary = json.loads((root / "eval" / "summary.json").read_text())
    for section, rel in (("classification", "sann/metrics.json"), ("localization", "localize/metrics.json")):
        source = json.loads((root / rel).read_text())
        for k, v in summary[section].items():
            assert source[k] == v
        scalars = {k for k, v in source.items() if isinstance(v, (int, float, str)) or v is None}
        assert set(summary[section]) == scalars
    lines = (root / "eval" / "summary.csv").read_text().splitlines()
    assert lines[0] == "section,metric,value"
    assert len(lines) - 1 == sum(len(v) for v in summary.values())


def test_manifest_contents(pipeline_dir):
    root, _ = pipeline_dir
    m = json.loads((root / "localize" / "manifest.json").read_text())
    assert m["command"] == "localize" and m["seed"] == 0
    assert m["run_id"] == "localize-" + m["config_sha256"][:12]
    assert m["config_sha256"] == config_hash(m["config"])
    assert set(m["inputs"]) == {"corpus/corpus.jsonl", "sann/model.ckpt", "sann/vocab.json"}
    sann = json.loads((root / "sann" / "manifest.json").read_text())
    assert m["inputs"]["sann/model.ckpt"] == sann["outputs"]["sann/model.ckpt"]


def test_student_commands_and_rerun_digests(tmp_path):
    args = ["--workdir", str(tmp_path), *SMALL]
    for cmd in ("corpus", "train-sann", "train-dkt", "train-grade", "eval"):
        assert main([cmd, *args]) == 0, cmd
    first = {p: (tmp_path / p / "manifest.json").read_bytes() for p in ("corpus", "sann", "dkt", "grade", "eval")}
    dkt = json.loads((tmp_path / "dkt" / "metrics.json").read_text())
    assert set(dkt["per_seed"][0]) >= {"auc_plain", "auc_sann", "lift"}
    for cmd in ("corpus", "train-sann", "train-dkt", "train-grade", "eval"):
        assert main([cmd, *args]) == 0, cmd
    for p, text in first.items():
        assert (tmp_path / p / "manifest.json").read_bytes() == text, p


def test_gradcheck_command(tmp_path):
    assert run(tmp_path, "gradcheck") == 0
    report = json.loads((tmp_path / "gradcheck" / "report.json").read_text())
    assert report["passed"] and len(report["checks"]) == 12
