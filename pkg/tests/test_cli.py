import json

import pytest

from gridner.cli import build_parser, resolve_config, run
from gridner.corpus import from_json, to_json
from gridner.synthetic import build_toy_corpus

INLINE = "Pain and cramping in my hands\n0,0;3,5 ADR|2,5 ADR\nInsomnia was constant .\n0,0 ADR\n"
SMALL_FLAGS = ["--d-embed", "6", "--d-context", "4", "--d-bi", "6", "--d-co", "4"]


@pytest.fixture
def corpus_file(tmp_path):
    path = tmp_path / "toy.json"
    path.write_text(to_json(build_toy_corpus()[:6]))
    return path


def test_convert_round_trip(tmp_path):
    src = tmp_path / "a.txt"
    src.write_text(INLINE)
    js, back = tmp_path / "a.json", tmp_path / "b.txt"
    assert run(["convert", "--to", "json", "--input", str(src), "--output", str(js)]) == 0
    assert run(["convert", "--to", "inline", "--input", str(js), "--output", str(back)]) == 0
    assert back.read_text() == INLINE
    sents = from_json(js.read_text())
    assert [e.indices for e in sents[0].entities] == [(0, 3, 4, 5), (2, 3, 4, 5)]


def test_stats(tmp_path, corpus_file, capsys):
    assert run(["stats", "--input", str(corpus_file)]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["total_sentences"] == 6


def test_train_predict_eval_and_replay(tmp_path, corpus_file, capsys):
    out = tmp_path / "run"
    argv = ["train", "--train", str(corpus_file), "--dev", str(corpus_file), "--out", str(out),
            "--epochs", "2", "--batch-size", "3", "--lr", "0.01", "--window", "3", "--mining", "hn",
            "--seed", "1"] + SMALL_FLAGS
    assert run(argv) == 0
    for name in ("model.npz", "history.jsonl", "metrics.json", "manifest.json"):
        assert (out / name).exists()
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["config"]["mining"] == {"window": 3, "mining": "hn", "margin": 1.0,
                                            "source": "logits", "unique_pairs": True}
    assert manifest["seed"] == 1
    assert len(manifest["inputs"]) == 1  # train and dev are the same file

    # replaying the manifest reproduces the run bit for bit
    replay = tmp_path / "replay"
    assert run(["train", "--train", str(corpus_file), "--dev", str(corpus_file), "--out", str(replay),
                "--config", str(out / "manifest.json")]) == 0
    assert (replay / "metrics.json").read_text() == (out / "metrics.json").read_text()
    assert (replay / "history.jsonl").read_text() == (out / "history.jsonl").read_text()

    pred = tmp_path / "pred.json"
    assert run(["predict", "--checkpoint", str(out / "model.npz"), "--input", str(corpus_file),
                "--output", str(pred)]) == 0
    assert len(json.loads(pred.read_text())) == 6

    capsys.readouterr()
    assert run(["eval", "--gold", str(corpus_file), "--pred", str(pred)]) == 0
    by_pred = json.loads(capsys.readouterr().out)
    assert run(["eval", "--gold", str(corpus_file), "--checkpoint", str(out / "model.npz")]) == 0
    by_ckpt = json.loads(capsys.readouterr().out)
    assert by_pred == by_ckpt
    assert set(by_pred) == {"overall", "disc_sent", "disc_ent"}


def test_eval_identity(corpus_file, capsys):
    assert run(["eval", "--gold", str(corpus_file), "--pred", str(corpus_file)]) == 0
    assert json.loads(capsys.readouterr().out)["overall"]["f1"] == 1.0


def test_mine_format(tmp_path, capsys):
    src = tmp_path / "s.txt"
    src.write_text(INLINE)
    assert run(["mine", "--input", str(src), "--mining", "hn", "--window", "none"]) == 0
    doc = json.loads(capsys.readouterr().out)
    rec = doc[1]["candidates"][0]
    assert set(rec) == {"anchor", "positives", "negatives", "mined"}
    assert rec["anchor"] == [2, 0] and rec["positives"] == [[0, 0]]
    assert len(rec["mined"]) == 1 and len(rec["mined"][0]["negatives"]) == 1


@pytest.mark.parametrize("argv", [
    ["bogus"],
    ["train"],
    ["mine", "--input", "x", "--window", "zero"],
    ["eval", "--gold", "does-not-exist.json", "--pred", "x.json"],
])
def test_usage_errors_exit_one(argv):
    assert run(argv) == 1


def test_malformed_input_exit_one(tmp_path):
    bad = tmp_path / "bad.txt"
    bad.write_text("a b\n0,9 ADR\n")
    assert run(["stats", "--input", str(bad)]) == 1


def test_unknown_config_key_exit_one(tmp_path, corpus_file):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"mining": {"nope": 1}}))
    assert run(["train", "--train", str(corpus_file), "--dev", str(corpus_file),
                "--out", str(tmp_path / "o"), "--config", str(cfg)]) == 1


def test_runtime_failure_exit_two(tmp_path, corpus_file):
    assert run(["stats", "--input", str(corpus_file), "--output", str(tmp_path)]) == 2


def test_flags_override_defaults():
    args = build_parser().parse_args(["train", "--train", "t", "--dev", "d", "--out", "o",
                                      "--margin", "1", "--mining", "ce", "--window", "25"])
    cfg = resolve_config(args)
    assert cfg["mining"]["window"] == 25 and cfg["mining"]["mining"] == "ce" and cfg["mining"]["margin"] == 1.0
    assert cfg["learning_rate"] == 5e-4 and cfg["max_epochs"] == 60 and cfg["early_stop_patience"] == 10


def test_config_file_below_flags(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"max_epochs": 7, "mining": {"margin": 0.2, "window": None}}))
    args = build_parser().parse_args(["train", "--train", "t", "--dev", "d", "--out", "o",
                                      "--config", str(path), "--margin", "0.5"])
    cfg = resolve_config(args)
    assert cfg["max_epochs"] == 7 and cfg["mining"]["margin"] == 0.5 and cfg["mining"]["window"] is None
