"""Training loop: task cross-entropy plus grid triplet loss, AdamW, early stopping."""
from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from . import grid as gridmod
from .corpus import Dataset, Entity, Sentence
from .evaluation import SubsetReport, evaluate
from .grid import DecodeConfig
from .model import ModelConfig, Vocab, backward, forward, init_params, task_loss
from .triplet import MiningConfig, build_candidates, mine, select_source, triplet_loss, triplet_step

log = logging.getLogger(__name__)


class TrainingError(RuntimeError):
    pass


@dataclass
class TrainConfig:
    learning_rate: float = 5e-4
    max_epochs: int = 60
    early_stop_patience: int = 10
    batch_size: int = 12
    seed: int = 0
    mining: MiningConfig = field(default_factory=MiningConfig)
    decode: DecodeConfig = field(default_factory=DecodeConfig)
    weight_decay: float = 1e-2
    grad_clip_norm: float | None = None
    betas: tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8
    use_triplet: bool = True
    threads: int = 1
    stop_at_f1: float | None = None

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        for name in ("max_epochs", "early_stop_patience", "batch_size", "threads"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be non-negative")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["mining"]["strategy"] = self.mining.strategy.value
        d["mining"]["source"] = self.mining.source.value
        d["betas"] = list(self.betas)
        return d


# --------------------------------------------------------------------------
# AdamW


@dataclass
class AdamState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    t: int = 0

    @classmethod
    def zeros_like(cls, params: dict) -> "AdamState":
        return cls({k: np.zeros_like(p) for k, p in params.items()},
                   {k: np.zeros_like(p) for k, p in params.items()})


def optimizer_step(params: dict, grads: dict, state: AdamState, lr: float,
                   weight_decay: float = 0.0, betas=(0.9, 0.999), eps: float = 1e-8) -> None:
    """In-place AdamW update; weight decay shrinks weights outside the moment path."""
    b1, b2 = betas
    state.t += 1
    c1 = 1 - b1**state.t
    c2 = 1 - b2**state.t
    for k, p in params.items():
        g = grads[k]
        if g.shape != p.shape:
            raise ValueError(f"{k}: gradient shape {g.shape} != parameter shape {p.shape}")
        if weight_decay:
            p *= 1 - lr * weight_decay
        m = state.m[k]
        v = state.v[k]
        m *= b1
        m += (1 - b1) * g
        buf = np.square(g)
        buf *= 1 - b2
        v *= b2
        v += buf
        # p -= lr * m_hat / (sqrt(v_hat) + eps)
        np.sqrt(v, out=buf)
        buf *= 1 / math.sqrt(c2)
        buf += eps
        np.divide(m, buf, out=buf)
        buf *= lr / c1
        p -= buf


def clip_grads(grads: dict, max_norm: float) -> float:
    total = math.sqrt(sum(float((g * g).sum()) for g in grads.values()))
    if total > max_norm:
        scale = max_norm / (total + 1e-12)
        for g in grads.values():
            g *= scale
    return total


# --------------------------------------------------------------------------
# per-sentence objective


@dataclass
class SentenceGrad:
    task: float
    triplet: float
    n_triplets: int
    n_violations: int
    grads: dict


def sentence_objective(params: dict, model_cfg: ModelConfig, vocab: Vocab, sentence: Sentence,
                       label_set: Sequence[str], mining: MiningConfig | None,
                       candidates=None) -> SentenceGrad:
    trace = forward(params, model_cfg, vocab.encode(sentence.tokens))
    gold = gridmod.encode(sentence, label_set).cells
    l_task, dY = task_loss(trace, gold)
    l_trip, n_t, n_v, dH_bi = 0.0, 0, 0, None
    if mining is not None:
        step = triplet_step(trace, sentence, mining, candidates)
        l_trip, n_t, n_v = step.loss, step.n_triplets, step.n_violations
        if step.dY is not None:
            dY = dY + step.dY
        dH_bi = step.dH_bi
    return SentenceGrad(l_task, l_trip, n_t, n_v, backward(params, trace, dY, dH_bi))


def violation_rate(params: dict, model_cfg: ModelConfig, vocab: Vocab,
                   sentences: Sequence[Sentence], mining: MiningConfig) -> float:
    """Share of mined triplets with |a-p| - |a-n| + m > 0; 0 when nothing is mined."""
    total = bad = 0
    for s in sentences:
        cands = build_candidates(s, mining.window, mining.unique_pairs)
        if not cands:
            continue
        trace = forward(params, model_cfg, vocab.encode(s.tokens))
        triplets = mine(cands, select_source(trace, mining.source), mining)
        total += len(triplets)
        bad += triplet_loss(triplets, mining.margin).violations
    return bad / total if total else 0.0


# --------------------------------------------------------------------------
# prediction / evaluation


def predict(params: dict, model_cfg: ModelConfig, vocab: Vocab, sentences: Sequence[Sentence],
            label_set: Sequence[str], decode_cfg: DecodeConfig = DecodeConfig()) -> list[list[Entity]]:
    out = []
    for s in sentences:
        if not s.tokens:
            out.append([])
            continue
        trace = forward(params, model_cfg, vocab.encode(s.tokens))
        tags = gridmod.grid_from_logits(trace.Y[2:, 2:], label_set)
        out.append(gridmod.decode(tags, decode_cfg))
    return out


def evaluate_model(params, model_cfg, vocab, sentences, label_set,
                   decode_cfg: DecodeConfig = DecodeConfig()) -> SubsetReport:
    preds = predict(params, model_cfg, vocab, sentences, label_set, decode_cfg)
    return evaluate(preds, [s.entities for s in sentences])


# --------------------------------------------------------------------------
# training


@dataclass
class EpochRecord:
    epoch: int
    task_loss: float
    triplet_loss: float
    loss: float
    violation_rate: float
    dev: dict

    @property
    def dev_f1(self) -> float:
        return self.dev["overall"]["f1"]


@dataclass
class TrainHistory:
    epochs: list[EpochRecord] = field(default_factory=list)
    best_epoch: int = 0
    best_val_f1: float = 0.0
    stopped_early: bool = False
    initial_violation_rate: float = 0.0

    def to_jsonl(self) -> str:
        return "".join(json.dumps(asdict(r), sort_keys=True) + "\n" for r in self.epochs)


def train(dataset: Dataset, model_cfg: ModelConfig, cfg: TrainConfig, vocab: Vocab | None = None,
          params: dict | None = None) -> tuple[dict, TrainHistory]:
    """Minimise task loss + triplet loss; return best-on-dev parameters and history."""
    train_set = dataset.splits.get("train") or []
    dev_set = dataset.splits.get("dev")
    if not train_set:
        raise TrainingError("empty train split")
    if dev_set is None:
        raise TrainingError("dataset has no dev split")
    label_set = list(dataset.label_set)
    if model_cfg.c != gridmod.num_classes(label_set):
        raise TrainingError(f"model has c={model_cfg.c} but label set implies {gridmod.num_classes(label_set)}")
    vocab = vocab or Vocab.build(train_set)
    if len(vocab) != model_cfg.vocab_size:
        raise TrainingError(f"vocab size {len(vocab)} != model vocab_size {model_cfg.vocab_size}")

    params = init_params(model_cfg) if params is None else {k: v.copy() for k, v in params.items()}
    state = AdamState.zeros_like(params)
    rng = np.random.default_rng(cfg.seed)
    mining = cfg.mining if cfg.use_triplet else None
    history = TrainHistory(best_val_f1=-1.0)
    best_params = {k: v.copy() for k, v in params.items()}
    wait = 0
    # candidate structure depends only on gold entities, so build it once
    cands = ([build_candidates(s, mining.window, mining.unique_pairs) for s in train_set]
             if mining else [None] * len(train_set))
    if mining:
        history.initial_violation_rate = violation_rate(params, model_cfg, vocab, train_set, mining)
    pool = ThreadPoolExecutor(cfg.threads) if cfg.threads > 1 else None

    try:
        for epoch in range(1, cfg.max_epochs + 1):
            order = rng.permutation(len(train_set))
            sums = np.zeros(2)
            n_trip = n_viol = 0
            for b, start in enumerate(range(0, len(order), cfg.batch_size)):
                batch = order[start:start + cfg.batch_size]

                def work(i):
                    return sentence_objective(params, model_cfg, vocab, train_set[i], label_set,
                                              mining, cands[i])

                results = list(pool.map(work, batch)) if pool else [work(s) for s in batch]
                grads = {k: np.zeros_like(v) for k, v in params.items()}
                for r in results:
                    for k in grads:
                        grads[k] += r.grads[k]
                for g in grads.values():
                    g /= len(batch)
                l_task = sum(r.task for r in results) / len(batch)
                l_trip = sum(r.triplet for r in results) / len(batch)
                if not (math.isfinite(l_task) and math.isfinite(l_trip)):
                    raise TrainingError(
                        f"non-finite loss at epoch {epoch} batch {b}: task={l_task} triplet={l_trip}")
                if cfg.grad_clip_norm is not None:
                    clip_grads(grads, cfg.grad_clip_norm)
                optimizer_step(params, grads, state, cfg.learning_rate, cfg.weight_decay, cfg.betas, cfg.eps)
                sums += (l_task * len(batch), l_trip * len(batch))
                n_trip += sum(r.n_triplets for r in results)
                n_viol += sum(r.n_violations for r in results)

            report = evaluate_model(params, model_cfg, vocab, dev_set, label_set, cfg.decode)
            mean_task, mean_trip = sums / len(train_set)
            rec = EpochRecord(epoch, float(mean_task), float(mean_trip), float(mean_task + mean_trip),
                              n_viol / n_trip if n_trip else 0.0, report.to_dict())
            history.epochs.append(rec)
            log.info("epoch %d loss %.4f (task %.4f triplet %.4f) dev F1 %.4f",
                     epoch, rec.loss, rec.task_loss, rec.triplet_loss, rec.dev_f1)
            if rec.dev_f1 > history.best_val_f1:
                history.best_val_f1 = rec.dev_f1
                history.best_epoch = epoch
                best_params = {k: v.copy() for k, v in params.items()}
                wait = 0
                if cfg.stop_at_f1 is not None and rec.dev_f1 >= cfg.stop_at_f1:
                    break
            else:
                wait += 1
                if wait >= cfg.early_stop_patience:
                    history.stopped_early = True
                    break
    finally:
        if pool:
            pool.shutdown()
    return best_params, history
