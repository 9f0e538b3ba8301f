"""Exact-match micro precision/recall/F1, overall and on discontinuous subsets."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from .corpus import Entity, is_discontinuous


@dataclass(frozen=True)
class MetricReport:
    tp: int = 0
    fp: int = 0
    fn: int = 0

    @property
    def precision(self) -> float:
        return self.tp / (self.tp + self.fp) if self.tp + self.fp else 0.0

    @property
    def recall(self) -> float:
        return self.tp / (self.tp + self.fn) if self.tp + self.fn else 0.0

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r) if p + r else 0.0

    def __add__(self, other: "MetricReport") -> "MetricReport":
        return MetricReport(self.tp + other.tp, self.fp + other.fp, self.fn + other.fn)

    def to_dict(self) -> dict:
        return {"f1": self.f1, "p": self.precision, "r": self.recall,
                "tp": self.tp, "fp": self.fp, "fn": self.fn}


@dataclass(frozen=True)
class SubsetReport:
    overall: MetricReport
    disc_sent: MetricReport
    disc_ent: MetricReport

    def to_dict(self) -> dict:
        return {"overall": self.overall.to_dict(),
                "disc_sent": self.disc_sent.to_dict(),
                "disc_ent": self.disc_ent.to_dict()}


def match_counts(pred: Iterable[Entity], gold: Iterable[Entity]) -> tuple[int, int, int]:
    p, g = set(pred), set(gold)
    tp = len(p & g)
    return tp, len(p) - tp, len(g) - tp


def evaluate(predictions: Sequence[Sequence[Entity]], golds: Sequence[Sequence[Entity]]) -> SubsetReport:
    if len(predictions) != len(golds):
        raise ValueError(f"{len(predictions)} prediction lists vs {len(golds)} gold lists")
    overall = disc_sent = disc_ent = MetricReport()
    for pred, gold in zip(predictions, golds):
        m = MetricReport(*match_counts(pred, gold))
        overall += m
        if any(is_discontinuous(e) for e in gold):
            disc_sent += m
        disc_ent += MetricReport(*match_counts(
            [e for e in pred if is_discontinuous(e)], [e for e in gold if is_discontinuous(e)]))
    return SubsetReport(overall, disc_sent, disc_ent)
