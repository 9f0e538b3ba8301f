"""Triplet candidates on the word-pair grid, online mining, and the hinge loss.

All cells are in augmented grid coordinates: row/col 0 is [POS], 1 is
[NEG], and real token t sits at t + 2.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

from .corpus import Sentence
from .model import N_SPECIAL, NEG, POS, ForwardTrace

Cell = tuple[int, int]

POS_POS: Cell = (POS, POS)
NEG_NEG: Cell = (NEG, NEG)


class Strategy(str, Enum):
    HN = "hn"   # hard negative
    SN = "sn"   # semi-hard negative
    CE = "ce"   # centroid
    NC = "nc"   # negative centroid


class Source(str, Enum):
    H_BI = "hbi"
    LOGITS = "logits"


@dataclass(frozen=True)
class MiningConfig:
    strategy: Strategy = Strategy.CE
    window: int | None = 5
    margin: float = 1.0
    unique_pairs: bool = True
    source: Source = Source.LOGITS

    def __post_init__(self):
        object.__setattr__(self, "strategy", Strategy(self.strategy))
        object.__setattr__(self, "source", Source(self.source))
        if self.margin < 0:
            raise ValueError("margin must be non-negative")
        if self.window is not None and self.window <= 0:
            raise ValueError("window must be a positive integer or None")


@dataclass
class CandidateSet:
    anchor: Cell
    positives: list[Cell]
    negatives: list[Cell]

    def to_dict(self) -> dict:
        return {"anchor": list(self.anchor),
                "positives": [list(c) for c in self.positives],
                "negatives": [list(c) for c in self.negatives]}


@dataclass
class Triplet:
    anchor_vec: np.ndarray
    positive_vec: np.ndarray
    negative_vec: np.ndarray
    # cells the vectors were read from; centroids average several cells
    anchor: Cell | None = None
    positives: tuple[Cell, ...] = ()
    negatives: tuple[Cell, ...] = ()

    def __post_init__(self):
        dims = {np.shape(self.anchor_vec), np.shape(self.positive_vec), np.shape(self.negative_vec)}
        if len(dims) != 1:
            raise ValueError(f"triplet vectors differ in shape: {sorted(dims)}")

    def key(self) -> tuple:
        return (self.anchor, self.positives, self.negatives)

    def to_dict(self) -> dict:
        return {"anchor": list(self.anchor) if self.anchor else None,
                "positives": [list(c) for c in self.positives],
                "negatives": [list(c) for c in self.negatives]}


# --------------------------------------------------------------------------
# candidates


def _is_special(cell: Cell) -> bool:
    return cell[0] < N_SPECIAL or cell[1] < N_SPECIAL


def _in_window(cell: Cell, anchor: Cell, window: int | None) -> bool:
    if window is None or _is_special(cell):
        return True
    return max(abs(cell[0] - anchor[0]), abs(cell[1] - anchor[1])) <= window


def entity_cells(indices: Sequence[int]) -> set[Cell]:
    """Grid cells an entity occupies; a one-word entity maps to (token, [POS])."""
    if len(indices) == 1:
        return {(indices[0] + N_SPECIAL, POS)}
    toks = [i + N_SPECIAL for i in indices]
    return {(a, b) for a in toks for b in toks}


def build_candidates(sentence: Sentence, window: int | None = None,
                     unique_pairs: bool = False) -> list[CandidateSet]:
    n = len(sentence.tokens)
    members = [set(i + N_SPECIAL for i in e.indices) for e in sentence.entities]
    cells_of = [entity_cells(e.indices) for e in sentence.entities]
    owners: dict[Cell, list[int]] = {}
    for k, cells in enumerate(cells_of):
        for cell in cells:
            owners.setdefault(cell, []).append(k)

    real = [(r, c) for r in range(N_SPECIAL, n + N_SPECIAL) for c in range(N_SPECIAL, n + N_SPECIAL)]
    emitted: set[tuple[Cell, Cell]] = set()
    out = []
    for anchor in sorted(owners):
        if unique_pairs and not _is_special(anchor) and anchor[0] > anchor[1]:
            continue
        ents = owners[anchor]
        pos = set().union(*(cells_of[k] for k in ents)) - {anchor}
        positives = [p for p in sorted(pos) if _in_window(p, anchor, window)]
        negatives = [
            c for c in real
            if _in_window(c, anchor, window)
            and not any(c[0] in members[k] and c[1] in members[k] for k in ents)
        ]
        if not positives:
            positives = [POS_POS]
        elif unique_pairs:
            positives = [p for p in positives
                         if (_is_special(p) or p[0] <= p[1]) and (p, anchor) not in emitted]
            if not positives:
                continue  # every pairing already used from the other side
        emitted.update((anchor, p) for p in positives)
        out.append(CandidateSet(anchor, positives, negatives or [NEG_NEG]))
    return out


# --------------------------------------------------------------------------
# mining


def _dist(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.sqrt(np.sum((a - b) ** 2)))


def mine(candidates: Sequence[CandidateSet], features: np.ndarray, cfg: MiningConfig) -> list[Triplet]:
    """Select triplets from each candidate set; features are indexed by cell."""
    features = np.asarray(features, dtype=float)
    strategy = Strategy(cfg.strategy)
    out: list[Triplet] = []
    for cs in candidates:
        a = features[cs.anchor]
        if strategy is Strategy.CE:
            p = np.mean([features[c] for c in cs.positives], axis=0)
            n = np.mean([features[c] for c in cs.negatives], axis=0)
            out.append(Triplet(a, p, n, cs.anchor, tuple(cs.positives), tuple(cs.negatives)))
            continue
        neg_vecs = np.stack([features[c] for c in cs.negatives])
        d_neg = np.sqrt(((neg_vecs - a) ** 2).sum(axis=1))
        if strategy is Strategy.NC:
            n_mean = neg_vecs.mean(axis=0)
        for pc in cs.positives:
            p = features[pc]
            if strategy is Strategy.NC:
                out.append(Triplet(a, p, n_mean, cs.anchor, (pc,), tuple(cs.negatives)))
                continue
            if strategy is Strategy.HN:
                k = int(np.argmin(d_neg))
            else:
                d_ap = _dist(a, p)
                band = np.nonzero((d_neg > d_ap) & (d_neg < d_ap + cfg.margin))[0]
                if band.size == 0:
                    continue
                k = int(band[np.argmin(d_neg[band])])
            nc = cs.negatives[k]
            out.append(Triplet(a, p, features[nc], cs.anchor, (pc,), (nc,)))
    return out


# --------------------------------------------------------------------------
# loss


@dataclass
class TripletLoss:
    value: float
    d_anchor: np.ndarray
    d_positive: np.ndarray
    d_negative: np.ndarray
    active: np.ndarray = field(repr=False)

    @property
    def violations(self) -> int:
        return int(self.active.sum())


def triplet_loss(triplets: Sequence[Triplet], margin: float) -> TripletLoss:
    """Mean over triplets of max(|a-p| - |a-n| + margin, 0), with vector cotangents."""
    if margin < 0:
        raise ValueError("margin must be non-negative")
    if not triplets:
        empty = np.zeros((0, 0))
        return TripletLoss(0.0, empty, empty, empty, np.zeros(0, dtype=bool))
    A = np.stack([t.anchor_vec for t in triplets]).astype(float)
    P = np.stack([t.positive_vec for t in triplets]).astype(float)
    Nn = np.stack([t.negative_vec for t in triplets]).astype(float)
    if not (np.isfinite(A).all() and np.isfinite(P).all() and np.isfinite(Nn).all()):
        raise FloatingPointError("non-finite triplet features")
    dp_vec, dn_vec = A - P, A - Nn
    dp = np.sqrt((dp_vec**2).sum(axis=1))
    dn = np.sqrt((dn_vec**2).sum(axis=1))
    hinge = dp - dn + margin
    active = hinge > 0
    T = len(triplets)
    value = float(np.where(active, hinge, 0.0).sum() / T)

    # d|x|/dx = x/|x|, taken as 0 at x = 0
    with np.errstate(invalid="ignore", divide="ignore"):
        up = np.where(dp[:, None] > 0, dp_vec / dp[:, None], 0.0)
        un = np.where(dn[:, None] > 0, dn_vec / dn[:, None], 0.0)
    w = active[:, None] / T
    return TripletLoss(value, w * (up - un), -w * up, w * un, active)


def scatter_grad(triplets: Sequence[Triplet], loss: TripletLoss, shape) -> np.ndarray:
    """Route vector cotangents back to grid cells; centroids split equally."""
    grid = np.zeros(shape)
    for t, da, dp, dn in zip(triplets, loss.d_anchor, loss.d_positive, loss.d_negative):
        grid[t.anchor] += da
        for c in t.positives:
            grid[c] += dp / len(t.positives)
        for c in t.negatives:
            grid[c] += dn / len(t.negatives)
    return grid


def select_source(trace: ForwardTrace, source: Source | str) -> np.ndarray:
    return trace.H_bi if Source(source) is Source.H_BI else trace.Y


@dataclass
class TripletStep:
    loss: float
    n_triplets: int
    n_violations: int
    dY: np.ndarray | None
    dH_bi: np.ndarray | None


def triplet_step(trace: ForwardTrace, sentence: Sentence, cfg: MiningConfig,
                 candidates: list[CandidateSet] | None = None) -> TripletStep:
    """Candidates -> mining on the chosen source -> loss and its cotangent."""
    if candidates is None:
        candidates = build_candidates(sentence, cfg.window, cfg.unique_pairs)
    feats = select_source(trace, cfg.source)
    triplets = mine(candidates, feats, cfg)
    res = triplet_loss(triplets, cfg.margin)
    dgrid = scatter_grad(triplets, res, feats.shape) if triplets else np.zeros(feats.shape)
    if cfg.source is Source.H_BI:
        return TripletStep(res.value, len(triplets), res.violations, None, dgrid)
    return TripletStep(res.value, len(triplets), res.violations, dgrid, None)
