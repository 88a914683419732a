from __future__ import annotations

import json
from pathlib import Path

import pytest

import synthetic
from threatmon.service.cli import main

from test_pipeline import ASSET_LINES, SECURITY_WORDS


@pytest.fixture(scope="module")
def workspace(tmp_path_factory) -> Path:
    root = tmp_path_factory.mktemp("cli")
    (root / "assets.txt").write_text(ASSET_LINES + "\n")
    (root / "security.txt").write_text(
        "# rho = 0.2\n" + "\n".join(SECURITY_WORDS.split()) + "\n"
    )
    (root / "config.json").write_text(
        json.dumps(
            {
                "asset_keywords_file": "assets.txt",
                "security_keywords_file": "security.txt",
                "feature_dimension": 128,
                "model_dir": "models",
                "clustering": {"theta_days": 7, "rng_seed": 1},
            }
        )
    )
    corpus_rows = synthetic.generate_labeled_corpus(seed=31, relevant=60, irrelevant=60)
    with open(root / "corpus.jsonl", "w") as handle:
        for post, label in corpus_rows:
            handle.write(
                json.dumps(
                    {
                        "id": post.id,
                        "author": post.author,
                        "timestamp": post.timestamp.strftime("%Y-%m-%dT%H:%M:%SZ"),
                        "text": post.text,
                        "label": label,
                    }
                )
                + "\n"
            )
    stream = synthetic.generate_stream(
        seed=32, n_threads=5, posts_per_thread=5, n_singletons=5,
        benign=15, noise=15, span_days=8,
    )
    synthetic.write_stream_jsonl(stream, root / "stream.jsonl")
    return root


def test_train_then_ingest_then_reports(workspace, capsys):
    config = str(workspace / "config.json")
    assert main(["train", "--config", config, "--corpus", str(workspace / "corpus.jsonl")]) == 0
    assert (workspace / "models" / "tfidf.json").is_file()
    assert (workspace / "models" / "classifier.json").is_file()
    assert (workspace / "models" / "training_meta.json").is_file()

    out_dir = workspace / "out"
    assert (
        main(
            [
                "ingest", "--config", config,
                "--input", str(workspace / "stream.jsonl"),
                "--out-dir", str(out_dir),
            ]
        )
        == 0
    )
    assert (out_dir / "events.jsonl").is_file()
    assert (out_dir / "snapshot.json").is_file()
    assert (out_dir / "metrics_daily.jsonl").is_file()
    assert (out_dir / "iocs" / "manifest.json").is_file()
    summary = capsys.readouterr().out
    assert "processed=" in summary

    assert (
        main(
            [
                "evaluate", "--config", config,
                "--log", str(out_dir / "events.jsonl"),
                "--out", str(workspace / "daily.jsonl"),
            ]
        )
        == 0
    )
    rows = [json.loads(l) for l in (workspace / "daily.jsonl").read_text().splitlines()]
    assert rows and {"date", "mean_wts", "max_jaccard"} <= rows[0].keys()

    assert (
        main(
            [
                "evaluate", "--config", config,
                "--log", str(out_dir / "events.jsonl"),
                "--no-reclustering",
                "--out", str(workspace / "daily_nr.jsonl"),
            ]
        )
        == 0
    )

    assert (
        main(
            [
                "report", "--config", config,
                "--log", str(workspace / "stream.jsonl"),
                "--out", str(workspace / "reduction.json"),
            ]
        )
        == 0
    )
    report = json.loads((workspace / "reduction.json").read_text())
    assert report["total_collected"] == 5 * 5 + 5 + 15 + 15

    export_dir = workspace / "export"
    assert (
        main(
            [
                "export", "--config", config,
                "--snapshot", str(out_dir / "snapshot.json"),
                "--format", "misp-json",
                "--out", str(export_dir),
            ]
        )
        == 0
    )
    assert (export_dir / "manifest.json").is_file()


def test_train_grid_writes_csv(workspace):
    config_path = workspace / "grid_config.json"
    config_path.write_text(
        json.dumps(
            {
                "asset_keywords_file": "assets.txt",
                "feature_dimension": 64,
                "model_dir": "grid_models",
                "svm": {"max_iterations": 20},
            }
        )
    )
    assert (
        main(
            [
                "train", "--config", str(config_path),
                "--corpus", str(workspace / "corpus.jsonl"),
                "--grid", "--k-folds", "3",
            ]
        )
        == 0
    )
    grid_csv = (workspace / "grid_models" / "grid_report.csv").read_text().splitlines()
    assert grid_csv[0] == "config,tpr,tnr,dominant,chosen"
    assert sum(1 for line in grid_csv[1:] if line.endswith(",True")) == 1


def test_missing_config_fails(workspace, monkeypatch):
    monkeypatch.delenv("THREATMON_CONFIG", raising=False)
    with pytest.raises(SystemExit):
        main(["ingest", "--input", str(workspace / "stream.jsonl")])
