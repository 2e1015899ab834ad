"""Command-line interface: exit codes, flag plumbing, and an end-to-end
pipeline invocation against the offline chat client."""

import json
import sys
from pathlib import Path

import pytest

from promptcausal.cli import main
from promptcausal.dataset import PromptRecord, save_dataset
from promptcausal.dataset import TestCase as Case
from promptcausal.intentions import IntentionVector

PROBLEMS = [
    ("Compute the sum of two numbers.", "a, b = input().split()\nprint(int(a) + int(b))\n",
     (("1 2", "3"), ("5 7", "12"))),
    ("Count the words in the line.", "print(len(input().split()))\n",
     (("a b c", "3"), ("x", "1"))),
    ("Reverse the given string.", "print(input()[::-1])\n",
     (("abc", "cba"), ("xy", "yx"))),
]


def write_dataset(tmp_path):
    records = [
        PromptRecord(
            id=f"p{k}", question_text=q, origin_id=f"p{k}",
            intention_vector=IntentionVector.zeros(3),
            solutions=(sol,), test_cases=tuple(Case(*t) for t in tests),
            difficulty="introductory",
        )
        for k, (q, sol, tests) in enumerate(PROBLEMS)
    ]
    path = tmp_path / "in.jsonl"
    save_dataset(records, path)
    return path


def write_config(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({
        "seed": 0,
        "mock_llm": True,
        "n_solutions": 2,
        "random_pairs": 0,
        "intention_ids": ["short", "formal", "simple"],
        "feature_names": ["word_count", "char_count", "verb_count"],
        "metrics": {"interpreter": [sys.executable, "-S", "-E"]},
        "verify_min_n": 5,
        "ate_min_n": 5,
    }))
    return path


# ---------------------------------------------------------------------------
# Exit codes
# ---------------------------------------------------------------------------


def test_no_command_is_usage_error(capsys):
    assert main([]) == 1
    assert "usage" in capsys.readouterr().err


def test_unknown_command_and_flag_are_usage_errors(capsys):
    assert main(["frobnicate"]) == 1
    assert main(["ingest", "--no-such-flag"]) == 1
    assert "error" in capsys.readouterr().err


def test_help_exits_zero(capsys):
    assert main(["--help"]) == 0
    assert "promptcausal" in capsys.readouterr().out


def test_ingest_requires_dataset(capsys):
    assert main(["ingest"]) == 1
    assert "dataset" in capsys.readouterr().err


def test_missing_dataset_file_is_stage_error(tmp_path, capsys):
    # the dataset is the ingest stage's declared input
    code = main(["ingest", "--dataset", str(tmp_path / "nope.jsonl"),
                 "--output-dir", str(tmp_path / "out")])
    assert code == 3
    assert "stage failure" in capsys.readouterr().err


def test_missing_artifact_on_direct_load_is_data_error(tmp_path, capsys):
    code = main(["ate", "--output-dir", str(tmp_path / "empty"),
                 "--treatment", "short", "--outcome", "pass_rate"])
    assert code == 2
    assert "data error" in capsys.readouterr().err


def test_malformed_dataset_is_data_error(tmp_path, capsys):
    bad = tmp_path / "bad.jsonl"
    bad.write_text('{"id": "p1"}\n')  # missing required fields
    code = main(["ingest", "--dataset", str(bad), "--output-dir", str(tmp_path / "out")])
    assert code == 2


def test_stage_with_missing_inputs_is_stage_error(tmp_path, capsys):
    code = main(["discover", "--output-dir", str(tmp_path / "out")])
    assert code == 3
    err = capsys.readouterr().err
    assert "stage failure" in err and "features.csv" in err


def test_ate_flags_are_required(capsys):
    assert main(["ate", "--treatment", "x"]) == 1  # missing --outcome
    assert "outcome" in capsys.readouterr().err


def test_pipeline_rejects_unknown_stage_list(tmp_path, capsys):
    code = main(["pipeline", "--stages", "ingest,bogus",
                 "--dataset", "x.jsonl", "--output-dir", str(tmp_path)])
    assert code == 1
    assert "bogus" in capsys.readouterr().err


def test_bad_config_file_is_usage_error(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text('{"sed": 1}')
    assert main(["features", "--list", "--config", str(cfg)]) == 1
    assert "bad configuration" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# Behavior
# ---------------------------------------------------------------------------


def test_features_list_prints_registry(capsys):
    assert main(["features", "--list"]) == 0
    lines = [l for l in capsys.readouterr().out.splitlines() if l]
    assert len(lines) >= 40
    name, family, description = lines[0].split("\t")
    assert name and family and description


def test_features_list_respects_config_subset(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"feature_names": ["word_count", "verb_count"]}))
    assert main(["features", "--list", "--config", str(cfg)]) == 0
    lines = [l for l in capsys.readouterr().out.splitlines() if l]
    assert [l.split("\t")[0] for l in lines] == ["word_count", "verb_count"]


def test_ingest_writes_artifact(tmp_path, capsys):
    dataset = write_dataset(tmp_path)
    out = tmp_path / "out"
    code = main(["ingest", "--dataset", str(dataset), "--output-dir", str(out)])
    assert code == 0
    assert (out / "dataset.jsonl").exists()
    assert "wrote" in capsys.readouterr().out


def test_pipeline_then_ate_roundtrip(tmp_path, capsys):
    dataset = write_dataset(tmp_path)
    config = write_config(tmp_path)
    out = tmp_path / "out"
    code = main(["pipeline", "--config", str(config),
                 "--dataset", str(dataset), "--output-dir", str(out)])
    assert code == 0
    stdout = capsys.readouterr().out
    assert "ingest: ok" in stdout and "optimize: ok" in stdout
    assert "manifest" in stdout
    assert (out / "graph.json").exists() and (out / "optimize.json").exists()

    # effect query against the artifacts just written
    code = main(["ate", "--config", str(config), "--output-dir", str(out),
                 "--treatment", "short", "--outcome", "pass_rate"])
    assert code == 0
    payload = json.loads(capsys.readouterr().out)
    assert {"point", "stderr", "ci95", "adjustment_set"} <= set(payload)
    assert payload["treatment"] == "short" and payload["outcome"] == "pass_rate"

    # unknown treatment variable maps to a data error
    code = main(["ate", "--config", str(config), "--output-dir", str(out),
                 "--treatment", "nope", "--outcome", "pass_rate"])
    assert code == 2


def test_pipeline_stage_subset_runs_in_order(tmp_path, capsys):
    dataset = write_dataset(tmp_path)
    config = write_config(tmp_path)
    out = tmp_path / "out"
    code = main(["pipeline", "--config", str(config), "--dataset", str(dataset),
                 "--output-dir", str(out), "--stages", "ingest,rephrase"])
    assert code == 0
    assert (out / "rephrased.jsonl").exists()
    assert not (out / "generated.jsonl").exists()
