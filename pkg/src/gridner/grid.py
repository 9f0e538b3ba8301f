"""Word-pair tag grid: entity lists <-> NONE/NNW/THW grids, and path decoding.

Class ids are fixed: 0 = NONE, 1 = NNW, 2 + k = THW for the k-th label.
NNW links token i to the next token j of the same entity and lives in the
upper triangle (i < j). THW is stored at (tail, head), so in the lower
triangle or on the diagonal.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .corpus import Entity, Sentence

NONE = 0
NNW = 1
THW_OFFSET = 2


class GridError(ValueError):
    pass


class EncodingConflict(GridError):
    def __init__(self, cell: tuple[int, int], first: Entity, second: Entity):
        self.cell = cell
        self.entities = (first, second)
        super().__init__(
            f"conflicting THW labels at cell {cell}: "
            f"{list(first.indices)}:{first.label} vs {list(second.indices)}:{second.label}"
        )


class DecodeOverflow(GridError):
    pass


def num_classes(label_set: Sequence[str]) -> int:
    return THW_OFFSET + len(label_set)


@dataclass
class TagGrid:
    """n x n matrix of class ids plus the label set that gives THW ids meaning."""

    cells: np.ndarray
    label_set: tuple[str, ...]

    def __post_init__(self):
        self.cells = np.asarray(self.cells, dtype=np.int64)
        self.label_set = tuple(self.label_set)
        if self.cells.ndim != 2 or self.cells.shape[0] != self.cells.shape[1]:
            raise GridError(f"grid must be square, got shape {self.cells.shape}")
        validate_ids(self.cells, len(self.label_set))

    @property
    def n(self) -> int:
        return self.cells.shape[0]

    @property
    def c(self) -> int:
        return num_classes(self.label_set)

    def tag(self, i: int, j: int) -> str:
        k = int(self.cells[i, j])
        if k == NONE:
            return "NONE"
        if k == NNW:
            return "NNW"
        return f"THW({self.label_set[k - THW_OFFSET]})"

    def nonzero(self) -> dict[tuple[int, int], str]:
        return {(int(i), int(j)): self.tag(i, j) for i, j in zip(*np.nonzero(self.cells))}


def validate_ids(ids: np.ndarray, n_labels: int) -> None:
    c = THW_OFFSET + n_labels
    if ids.size and (ids.min() < 0 or ids.max() >= c):
        raise GridError(f"class id out of range [0, {c})")
    n = ids.shape[0]
    upper = np.triu(np.ones((n, n), dtype=bool), k=1)
    if np.any(ids[~upper] == NNW):
        raise GridError("NNW found on or below the diagonal")
    if np.any(ids[upper] >= THW_OFFSET):
        raise GridError("THW found above the diagonal")


def encode(sentence: Sentence, label_set: Sequence[str]) -> TagGrid:
    label_id = {lab: k for k, lab in enumerate(label_set)}
    n = len(sentence.tokens)
    cells = np.zeros((n, n), dtype=np.int64)
    owner: dict[tuple[int, int], Entity] = {}
    for ent in sentence.entities:
        if ent.label not in label_id:
            raise GridError(f"label {ent.label!r} not in label set {list(label_set)}")
        for a, b in zip(ent.indices, ent.indices[1:]):
            cells[a, b] = NNW
        cell = (ent.tail, ent.head)
        tag = THW_OFFSET + label_id[ent.label]
        if cells[cell] >= THW_OFFSET and cells[cell] != tag:
            raise EncodingConflict(cell, owner[cell], ent)
        cells[cell] = tag
        owner.setdefault(cell, ent)
    return TagGrid(cells, tuple(label_set))


@dataclass(frozen=True)
class DecodeConfig:
    max_entity_tokens: int = 36
    max_entities_per_sentence: int = 1000

    def __post_init__(self):
        if self.max_entity_tokens <= 0 or self.max_entities_per_sentence <= 0:
            raise ValueError("decode caps must be positive")


def decode(grid: TagGrid, cfg: DecodeConfig = DecodeConfig()) -> list[Entity]:
    """Enumerate every NNW path head..tail closed by a THW(tail, head) cell."""
    cells = grid.cells
    n = grid.n
    succ = [np.nonzero(cells[i] == NNW)[0].tolist() for i in range(n)]
    # tails[h] : {tail: label-id} for THW cells in column h
    tails: dict[int, dict[int, int]] = {}
    for t, h in zip(*np.nonzero(cells >= THW_OFFSET)):
        tails.setdefault(int(h), {})[int(t)] = int(cells[t, h]) - THW_OFFSET

    found: set[tuple[tuple[int, ...], int]] = set()
    limit = cfg.max_entities_per_sentence
    for head in sorted(tails):
        closers = tails[head]
        last = max(closers)
        stack = [(head,)]
        while stack:
            path = stack.pop()
            node = path[-1]
            if node in closers:
                found.add((path, closers[node]))
                if len(found) > limit:
                    raise DecodeOverflow(
                        f"more than {limit} entities decoded; grid looks degenerate"
                    )
            if len(path) >= cfg.max_entity_tokens:
                continue
            for nxt in succ[node]:
                if nxt <= last:
                    stack.append(path + (nxt,))
    ordered = sorted(found, key=lambda pl: (pl[0][0], len(pl[0]), pl[1], pl[0]))
    return [Entity(path, grid.label_set[lab]) for path, lab in ordered]


def grid_to_class_ids(grid: TagGrid) -> np.ndarray:
    return grid.cells.copy()


def class_ids_to_grid(ids: np.ndarray, label_set: Sequence[str]) -> TagGrid:
    return TagGrid(np.array(ids, dtype=np.int64), tuple(label_set))


def grid_from_logits(logits: np.ndarray, label_set: Sequence[str]) -> TagGrid:
    """Constrained argmax over an (n, n, c) logit block.

    Upper-triangle cells choose between NONE and NNW; the rest between NONE
    and the THW classes, so the result always satisfies the grid invariants.
    """
    n = logits.shape[0]
    upper = np.triu(np.ones((n, n), dtype=bool), k=1)
    up = np.where(logits[..., NNW] > logits[..., NONE], NNW, NONE)
    if logits.shape[-1] > THW_OFFSET:
        thw = logits[..., THW_OFFSET:]
        best = thw.argmax(axis=-1)
        best_val = np.take_along_axis(thw, best[..., None], axis=-1)[..., 0]
        low = np.where(best_val > logits[..., NONE], best + THW_OFFSET, NONE)
    else:
        low = np.zeros((n, n), dtype=np.int64)
    return TagGrid(np.where(upper, up, low), tuple(label_set))
