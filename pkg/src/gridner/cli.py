"""Command-line entry point: convert, stats, train, eval, predict, mine.

Exit codes: 0 success, 1 bad input or usage, 2 failure while running.
Log level comes from the GRIDNER_LOG environment variable.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from dataclasses import asdict, fields
from pathlib import Path

from . import __version__
from .corpus import CorpusError, Dataset, Sentence, compute_stats, format_inline, from_json, \
    load_sentences, parse_inline, sentence_to_dict, to_json
from .evaluation import evaluate
from .grid import DecodeConfig, GridError, num_classes
from .model import CheckpointError, ModelConfig, Vocab, VocabularyError, forward, init_params, \
    load_checkpoint, save_checkpoint
from .trainer import TrainConfig, TrainingError, evaluate_model, predict, train
from .triplet import MiningConfig, build_candidates, mine, select_source

log = logging.getLogger("gridner")

MODEL_KEYS = ("d_embed", "d_context", "d_bi", "d_co", "conv_kernel")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _bool(text: str) -> bool:
    low = text.lower()
    if low in ("true", "1", "yes"):
        return True
    if low in ("false", "0", "no"):
        return False
    raise argparse.ArgumentTypeError(f"expected true/false, got {text!r}")


def _window(text: str):
    if text.lower() == "none":
        return None
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"window must be an integer or 'none', got {text!r}") from None
    if value <= 0:
        raise argparse.ArgumentTypeError("window must be positive")
    return value


def _add_mining_flags(p):
    p.add_argument("--window", type=_window, default=argparse.SUPPRESS, help="candidate window (int or none)")
    p.add_argument("--mining", choices=["hn", "sn", "ce", "nc"], default=argparse.SUPPRESS)
    p.add_argument("--margin", type=float, default=argparse.SUPPRESS)
    p.add_argument("--source", choices=["hbi", "logits"], default=argparse.SUPPRESS)
    p.add_argument("--unique-pairs", type=_bool, default=argparse.SUPPRESS, dest="unique_pairs")


def _add_train_flags(p):
    p.add_argument("--lr", type=float, default=argparse.SUPPRESS, dest="learning_rate")
    p.add_argument("--epochs", type=int, default=argparse.SUPPRESS, dest="max_epochs")
    p.add_argument("--early-stop", type=int, default=argparse.SUPPRESS, dest="early_stop_patience")
    p.add_argument("--batch-size", type=int, default=argparse.SUPPRESS, dest="batch_size")
    p.add_argument("--weight-decay", type=float, default=argparse.SUPPRESS, dest="weight_decay")
    p.add_argument("--grad-clip", type=float, default=argparse.SUPPRESS, dest="grad_clip_norm")
    p.add_argument("--no-triplet", action="store_false", default=argparse.SUPPRESS, dest="use_triplet")
    for key in MODEL_KEYS:
        p.add_argument(f"--{key.replace('_', '-')}", type=int, default=argparse.SUPPRESS, dest=key)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="gridner", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    def common(p):
        p.add_argument("--seed", type=int, default=argparse.SUPPRESS)
        p.add_argument("--threads", type=int, default=argparse.SUPPRESS)
        p.add_argument("--manifest", type=Path, help="where to write the run manifest")

    p = sub.add_parser("convert", help="inline <-> JSON")
    p.add_argument("--to", choices=["json", "inline"], required=True)
    p.add_argument("--input", type=Path, help="default: stdin")
    p.add_argument("--output", type=Path, help="default: stdout")
    common(p)

    p = sub.add_parser("stats", help="corpus statistics as JSON")
    p.add_argument("--input", type=Path, nargs="+", required=True)
    p.add_argument("--output", type=Path)
    common(p)

    p = sub.add_parser("train", help="train a model")
    p.add_argument("--train", type=Path, required=True, dest="train_path")
    p.add_argument("--dev", type=Path, required=True, dest="dev_path")
    p.add_argument("--test", type=Path, dest="test_path")
    p.add_argument("--out", type=Path, required=True, help="output directory")
    p.add_argument("--config", type=Path, help="JSON config (or a previous manifest)")
    _add_train_flags(p)
    _add_mining_flags(p)
    common(p)

    p = sub.add_parser("eval", help="score predictions against gold")
    p.add_argument("--gold", type=Path, required=True)
    p.add_argument("--pred", type=Path, help="predictions in corpus JSON")
    p.add_argument("--checkpoint", type=Path, help="predict with this model instead of --pred")
    p.add_argument("--output", type=Path)
    common(p)

    p = sub.add_parser("predict", help="decode entities with a trained model")
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--input", type=Path, required=True)
    p.add_argument("--output", type=Path)
    common(p)

    p = sub.add_parser("mine", help="dump candidate sets and mined triplets")
    p.add_argument("--input", type=Path, required=True)
    p.add_argument("--checkpoint", type=Path, help="features from this model (default: fresh init)")
    p.add_argument("--output", type=Path)
    _add_mining_flags(p)
    common(p)
    return ap


# --------------------------------------------------------------------------
# helpers


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _read_text(path: Path | None) -> str:
    return sys.stdin.read() if path is None else path.read_text(encoding="utf-8")


def _emit(text: str, path: Path | None) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        path.write_text(text, encoding="utf-8")


def _write_manifest(args, config: dict, inputs: list[Path], outputs: list[Path], default: Path | None):
    manifest = {
        "command": args.command,
        "argv": args._argv,
        "config": config,
        "seed": config.get("seed"),
        "inputs": {str(p): _sha256(p) for p in inputs if p is not None},
        "outputs": {str(p): _sha256(p) for p in outputs if p is not None and p.exists()},
        "version": __version__,
    }
    target = args.manifest or default
    text = json.dumps(manifest, indent=2, sort_keys=True)
    if target is None:
        sys.stderr.write(text + "\n")
    else:
        target.write_text(text + "\n", encoding="utf-8")


def resolve_config(args) -> dict:
    """Defaults < config file < command-line flags."""
    tc = TrainConfig()
    cfg = {f.name: getattr(tc, f.name) for f in fields(TrainConfig) if f.name not in ("mining", "decode")}
    cfg["betas"] = list(cfg["betas"])
    mining = {"window": tc.mining.window, "mining": tc.mining.strategy.value, "margin": tc.mining.margin,
              "source": tc.mining.source.value, "unique_pairs": tc.mining.unique_pairs}
    model = {k: getattr(ModelConfig(vocab_size=1, c=3), k) for k in MODEL_KEYS}
    decode = asdict(tc.decode)

    path = getattr(args, "config", None)
    if path is not None:
        try:
            doc = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise UsageError(f"config {path}: {exc}") from None
        if "config" in doc and "command" in doc:
            doc = doc["config"]
        for section, target in (("mining", mining), ("model", model), ("decode", decode)):
            for k, v in (doc.pop(section, None) or {}).items():
                if k not in target:
                    raise UsageError(f"config {path}: unknown key {section}.{k}")
                target[k] = v
        for k, v in doc.items():
            if k not in cfg:
                raise UsageError(f"config {path}: unknown key {k}")
            cfg[k] = v

    given = vars(args)
    for k in cfg:
        if k in given:
            cfg[k] = given[k]
    for k in mining:
        if k in given:
            mining[k] = given[k]
    for k in model:
        if k in given:
            model[k] = given[k]
    cfg.update(mining=mining, model=model, decode=decode)
    return cfg


def _mining_config(cfg: dict) -> MiningConfig:
    m = cfg["mining"]
    return MiningConfig(strategy=m["mining"], window=m["window"], margin=m["margin"],
                        unique_pairs=m["unique_pairs"], source=m["source"])


def _train_config(cfg: dict) -> TrainConfig:
    kw = {k: v for k, v in cfg.items() if k not in ("mining", "model", "decode")}
    kw["betas"] = tuple(kw["betas"])
    return TrainConfig(mining=_mining_config(cfg), decode=DecodeConfig(**cfg["decode"]), **kw)


def _load_model(path: Path):
    params, mcfg, extra = load_checkpoint(path)
    vocab = Vocab(extra["vocab"][1:])
    if len(vocab) != mcfg.vocab_size:
        raise CheckpointError("stored vocabulary does not match model vocab_size")
    return params, mcfg, vocab, extra["label_set"], DecodeConfig(**extra.get("decode", {}))


# --------------------------------------------------------------------------
# commands


def cmd_convert(args) -> None:
    text = _read_text(args.input)
    sents = from_json(text) if text.lstrip().startswith("[") else parse_inline(text)
    out = to_json(sents, indent=None) + "\n" if args.to == "json" else format_inline(sents)
    _emit(out, args.output)
    _write_manifest(args, {"to": args.to}, [args.input], [args.output], None)


def cmd_stats(args) -> None:
    sents = [s for p in args.input for s in load_sentences(p)]
    _emit(json.dumps(compute_stats(sents).to_dict(), indent=2) + "\n", args.output)
    _write_manifest(args, {}, list(args.input), [args.output], None)


def cmd_train(args) -> None:
    cfg = resolve_config(args)
    tcfg = _train_config(cfg)
    splits = {"train": load_sentences(args.train_path), "dev": load_sentences(args.dev_path)}
    if args.test_path:
        splits["test"] = load_sentences(args.test_path)
    dataset = Dataset(args.train_path.stem, splits)
    vocab = Vocab.build(splits["train"])
    mcfg = ModelConfig(vocab_size=len(vocab), c=num_classes(dataset.label_set), seed=tcfg.seed, **cfg["model"])
    params, history = train(dataset, mcfg, tcfg, vocab)

    args.out.mkdir(parents=True, exist_ok=True)
    ckpt = args.out / "model.npz"
    save_checkpoint(ckpt, params, mcfg, {"vocab": vocab.itos, "label_set": dataset.label_set,
                                         "decode": cfg["decode"]})
    (args.out / "history.jsonl").write_text(history.to_jsonl(), encoding="utf-8")
    metrics = {"best_epoch": history.best_epoch, "best_val_f1": history.best_val_f1,
               "initial_violation_rate": history.initial_violation_rate}
    for split in ("dev", "test"):
        if split in splits:
            metrics[split] = evaluate_model(params, mcfg, vocab, splits[split], dataset.label_set,
                                            tcfg.decode).to_dict()
    (args.out / "metrics.json").write_text(json.dumps(metrics, indent=2, sort_keys=True) + "\n")
    outputs = [ckpt, args.out / "history.jsonl", args.out / "metrics.json"]
    _write_manifest(args, cfg, [args.train_path, args.dev_path, args.test_path, args.config], outputs,
                    args.out / "manifest.json")
    print(json.dumps(metrics["dev"]))


def cmd_predict(args) -> None:
    params, mcfg, vocab, label_set, dcfg = _load_model(args.checkpoint)
    sents = load_sentences(args.input)
    preds = predict(params, mcfg, vocab, sents, label_set, dcfg)
    out = [sentence_to_dict(Sentence(s.tokens, p)) for s, p in zip(sents, preds)]
    _emit(json.dumps(out) + "\n", args.output)
    _write_manifest(args, {}, [args.checkpoint, args.input], [args.output], None)


def cmd_eval(args) -> None:
    gold = load_sentences(args.gold)
    if args.checkpoint is not None:
        params, mcfg, vocab, label_set, dcfg = _load_model(args.checkpoint)
        preds = predict(params, mcfg, vocab, gold, label_set, dcfg)
    elif args.pred is not None:
        pred_sents = load_sentences(args.pred)
        if len(pred_sents) != len(gold):
            raise UsageError(f"{len(pred_sents)} predicted sentences vs {len(gold)} gold sentences")
        preds = [s.entities for s in pred_sents]
    else:
        raise UsageError("eval needs --pred or --checkpoint")
    report = evaluate(preds, [s.entities for s in gold])
    _emit(json.dumps(report.to_dict(), sort_keys=True) + "\n", args.output)
    _write_manifest(args, {}, [args.gold, args.pred, args.checkpoint], [args.output], None)


def cmd_mine(args) -> None:
    cfg = resolve_config(args)
    mining = _mining_config(cfg)
    sents = load_sentences(args.input)
    if args.checkpoint is not None:
        params, mcfg, vocab, _, _ = _load_model(args.checkpoint)
    else:
        vocab = Vocab.build(sents)
        labels = sorted({e.label for s in sents for e in s.entities}) or ["ENT"]
        mcfg = ModelConfig(vocab_size=len(vocab), c=num_classes(labels), seed=cfg["seed"], **cfg["model"])
        params = init_params(mcfg)
    out = []
    for s in sents:
        cands = build_candidates(s, mining.window, mining.unique_pairs)
        feats = select_source(forward(params, mcfg, vocab.encode(s.tokens)), mining.source)
        records = []
        for cs in cands:
            rec = cs.to_dict()
            rec["mined"] = [{"positives": t.to_dict()["positives"], "negatives": t.to_dict()["negatives"]}
                            for t in mine([cs], feats, mining)]
            records.append(rec)
        out.append({"sentence": s.tokens, "candidates": records})
    _emit(json.dumps(out) + "\n", args.output)
    _write_manifest(args, cfg, [args.input, args.checkpoint], [args.output], None)


COMMANDS = {"convert": cmd_convert, "stats": cmd_stats, "train": cmd_train,
            "eval": cmd_eval, "predict": cmd_predict, "mine": cmd_mine}


def run(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    logging.basicConfig(level=os.environ.get("GRIDNER_LOG", "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        args._argv = argv
        if getattr(args, "threads", 1) < 1:
            raise UsageError("--threads must be >= 1")
        COMMANDS[args.command](args)
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    except (UsageError, CorpusError, GridError, CheckpointError, VocabularyError,
            FileNotFoundError, ValueError) as exc:
        print(exc if isinstance(exc, UsageError) else f"error: {exc}", file=sys.stderr)
        return 1
    except (TrainingError, FloatingPointError, RuntimeError, OSError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2
    return 0


def main() -> None:
    sys.exit(run())
