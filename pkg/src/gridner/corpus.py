"""Sentence/entity containers, inline and JSON readers/writers, corpus statistics."""
from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence


class CorpusError(ValueError):
    """Raised for malformed corpus input."""


class ParseError(CorpusError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class SchemaError(CorpusError):
    def __init__(self, field_name: str, message: str | None = None):
        self.field = field_name
        super().__init__(message or f"missing required field {field_name!r}")


@dataclass(frozen=True, order=True)
class Entity:
    indices: tuple[int, ...]
    label: str

    def __post_init__(self):
        idx = tuple(int(i) for i in self.indices)
        object.__setattr__(self, "indices", idx)
        if not idx:
            raise CorpusError("entity has no token indices")
        if idx[0] < 0:
            raise CorpusError(f"negative token index in {idx}")
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise CorpusError(f"entity indices must be strictly increasing: {list(idx)}")

    @property
    def head(self) -> int:
        return self.indices[0]

    @property
    def tail(self) -> int:
        return self.indices[-1]

    def fragments(self) -> list[tuple[int, int]]:
        """Maximal contiguous runs as inclusive (start, end) spans."""
        spans = []
        start = prev = self.indices[0]
        for i in self.indices[1:]:
            if i != prev + 1:
                spans.append((start, prev))
                start = i
            prev = i
        spans.append((start, prev))
        return spans


def is_discontinuous(entity: Entity) -> bool:
    idx = entity.indices
    return any(b > a + 1 for a, b in zip(idx, idx[1:]))


@dataclass
class Sentence:
    tokens: list[str]
    entities: list[Entity] = field(default_factory=list)

    def __post_init__(self):
        self.tokens = list(self.tokens)
        n = len(self.tokens)
        if self.entities and n == 0:
            raise CorpusError("sentence carries entities but has no tokens")
        unique: list[Entity] = []
        seen = set()
        for e in self.entities:
            if e.tail >= n:
                raise CorpusError(f"entity {list(e.indices)} out of range for {n} tokens")
            if e not in seen:
                seen.add(e)
                unique.append(e)
        self.entities = unique

    def __len__(self) -> int:
        return len(self.tokens)

    def labels(self) -> set[str]:
        return {e.label for e in self.entities}


@dataclass
class Dataset:
    name: str
    splits: dict[str, list[Sentence]]
    label_set: list[str] = field(default_factory=list)

    def __post_init__(self):
        found = sorted({lab for sents in self.splits.values() for s in sents for lab in s.labels()})
        if not self.label_set:
            self.label_set = found
        elif set(self.label_set) != set(found):
            raise CorpusError(
                f"label_set {self.label_set} does not match labels in splits {found}"
            )

    def all_sentences(self) -> list[Sentence]:
        return [s for sents in self.splits.values() for s in sents]


# --------------------------------------------------------------------------
# inline format: token line, then annotation line "s,e[;s,e...] TYPE|..."


def _parse_annotation(line: str, n_tokens: int, lineno: int) -> list[Entity]:
    line = line.strip()
    if not line:
        return []
    entities = []
    for entry in line.split("|"):
        entry = entry.strip()
        try:
            spans, label = entry.split(" ", 1)
        except ValueError:
            raise ParseError(f"annotation entry {entry!r} has no type", lineno) from None
        label = label.strip()
        if not label:
            raise ParseError(f"annotation entry {entry!r} has an empty type", lineno)
        frags = spans.split(";")
        indices: set[int] = set()
        for frag in frags:
            parts = frag.split(",")
            if len(parts) != 2:
                raise ParseError(f"span {frag!r} is not 'start,end'", lineno)
            try:
                s, e = int(parts[0]), int(parts[1])
            except ValueError:
                raise ParseError(f"non-numeric span {frag!r}", lineno) from None
            if s < 0 or s > e:
                raise ParseError(f"span {frag!r} has start > end or negative start", lineno)
            if e >= n_tokens:
                raise ParseError(f"span {frag!r} out of range for {n_tokens} tokens", lineno)
            indices.update(range(s, e + 1))
        entities.append(Entity(tuple(sorted(indices)), label))
    return entities


def parse_inline(text: str) -> list[Sentence]:
    """Parse token/annotation line pairs.

    Blank token lines with blank annotations are skipped as empty sentences.
    """
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if len(lines) % 2:
        raise ParseError(f"expected pairs of lines, got {len(lines)} lines")
    sentences = []
    for k in range(0, len(lines), 2):
        tok_line, ann_line = lines[k], lines[k + 1]
        tokens = tok_line.split()
        if not tokens:
            if ann_line.strip():
                raise ParseError("annotation given for an empty sentence", k + 2)
            continue
        sentences.append(Sentence(tokens, _parse_annotation(ann_line, len(tokens), k + 2)))
    return sentences


def format_inline(sentences: Iterable[Sentence]) -> str:
    out = []
    for s in sentences:
        out.append(" ".join(s.tokens))
        entries = []
        for e in s.entities:
            frags = ";".join(f"{a},{b}" for a, b in e.fragments())
            entries.append(f"{frags} {e.label}")
        out.append("|".join(entries))
    return "".join(line + "\n" for line in out)


# --------------------------------------------------------------------------
# JSON format: [{"sentence": [...], "ner": [{"index": [...], "type": ...}]}]


def sentence_to_dict(s: Sentence) -> dict:
    return {
        "sentence": list(s.tokens),
        "ner": [{"index": list(e.indices), "type": e.label} for e in s.entities],
    }


def sentence_from_dict(doc: dict) -> Sentence:
    if not isinstance(doc, dict):
        raise SchemaError("sentence", f"expected an object, got {type(doc).__name__}")
    for key in ("sentence", "ner"):
        if key not in doc:
            raise SchemaError(key)
    entities = []
    for ent in doc["ner"]:
        for key in ("index", "type"):
            if key not in ent:
                raise SchemaError(f"ner.{key}")
        entities.append(Entity(tuple(ent["index"]), str(ent["type"])))
    return Sentence([str(t) for t in doc["sentence"]], entities)


def to_json(sentences: Iterable[Sentence], indent: int | None = None) -> str:
    return json.dumps([sentence_to_dict(s) for s in sentences], ensure_ascii=False, indent=indent)


def from_json(text: str) -> list[Sentence]:
    try:
        docs = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", exc.lineno) from None
    if not isinstance(docs, list):
        raise SchemaError("<root>", "expected a JSON array of sentence objects")
    return [sentence_from_dict(d) for d in docs]


def load_json(path) -> list[Sentence]:
    with open(path, encoding="utf-8") as fh:
        return from_json(fh.read())


def load_inline(path) -> list[Sentence]:
    with open(path, encoding="utf-8") as fh:
        return parse_inline(fh.read())


def load_sentences(path) -> list[Sentence]:
    """Load by sniffing: JSON arrays start with '['; anything else is inline."""
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    if text.lstrip().startswith("["):
        return from_json(text)
    return parse_inline(text)


# --------------------------------------------------------------------------
# statistics


@dataclass
class CorpusStats:
    total_sentences: int = 0
    total_entities: int = 0
    continuous_entities: int = 0
    discontinuous_entities: int = 0
    disc_percentage: float = 0.0
    continuous_token_length_range: tuple[int, int] = (0, 0)
    disc_token_length_range: tuple[int, int] = (0, 0)
    entity_token_length_range: tuple[int, int] = (0, 0)
    disc_start_end_distance_range: tuple[int, int] = (0, 0)
    token_gap_histogram: dict[int, int] = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        for k, v in d.items():
            if isinstance(v, tuple):
                d[k] = list(v)
        d["token_gap_histogram"] = {str(k): v for k, v in sorted(self.token_gap_histogram.items())}
        return d


def _range(values: Sequence[int]) -> tuple[int, int]:
    return (min(values), max(values)) if values else (0, 0)


def compute_stats(sentences: Iterable[Sentence]) -> CorpusStats:
    n_sent = 0
    cont_len, disc_len, disc_dist = [], [], []
    gaps: Counter[int] = Counter()
    for s in sentences:
        n_sent += 1
        for e in s.entities:
            if is_discontinuous(e):
                disc_len.append(len(e.indices))
                disc_dist.append(e.tail - e.head + 1)
                for a, b in zip(e.indices, e.indices[1:]):
                    if b > a + 1:
                        gaps[b - a - 1] += 1
            else:
                cont_len.append(len(e.indices))
    total = len(cont_len) + len(disc_len)
    return CorpusStats(
        total_sentences=n_sent,
        total_entities=total,
        continuous_entities=len(cont_len),
        discontinuous_entities=len(disc_len),
        disc_percentage=len(disc_len) / total if total else 0.0,
        continuous_token_length_range=_range(cont_len),
        disc_token_length_range=_range(disc_len),
        entity_token_length_range=_range(cont_len + disc_len),
        disc_start_end_distance_range=_range(disc_dist),
        token_gap_histogram=dict(sorted(gaps.items())),
    )
