"""Random sentence generators used by tests, demos and the bundled toy corpus."""
from __future__ import annotations

import json
import random
from importlib import resources
from itertools import product

from .corpus import Entity, Sentence, from_json


def _free_runs(n: int, used: set[int]) -> list[int]:
    return [i for i in range(n) if i not in used]


def random_disjoint_entity(rng: random.Random, n: int, used: set[int],
                           max_len: int = 8, max_frags: int = 3) -> tuple[int, ...] | None:
    """Up to `max_frags` contiguous fragments over tokens not yet in `used`."""
    free = _free_runs(n, used)
    if not free:
        return None
    idx: set[int] = set()
    for _ in range(rng.randint(1, max_frags)):
        start = rng.choice(free)
        for i in range(start, min(n, start + rng.randint(1, 3))):
            if i in used or len(idx) >= max_len:
                break
            idx.add(i)
    return tuple(sorted(idx)) if idx else None


def random_coordination(rng: random.Random, n: int, used: set[int], max_len: int = 8):
    """Entities formed as every prefix x core x suffix combination.

    Mirrors "Pain and cramping in my hands and lower legs": alternatives on
    either side of a shared core. Every product path is gold, so the NNW/THW
    encoding is unambiguous.
    """
    n_pre, n_suf = rng.randint(1, 2), rng.randint(1, 2)
    if n_pre * n_suf == 1:
        n_suf = 2
    seg_lens = [1] * n_pre + [rng.randint(1, 2)] + [rng.randint(1, 2) for _ in range(n_suf)]
    span = sum(seg_lens) + rng.randint(0, 3)
    if span > n:
        return []
    start = rng.randint(0, n - span)
    pos = start
    segs = []
    slack = span - sum(seg_lens)
    for length in seg_lens:
        segs.append(tuple(range(pos, pos + length)))
        pos += length
        if slack and rng.random() < 0.5:
            pos += 1
            slack -= 1
    toks = {i for s in segs for i in s}
    if toks & used or pos > n:
        return []
    pre, core, suf = segs[:n_pre], segs[n_pre], segs[n_pre + 1:]
    out = []
    for p, s in product(pre, suf):
        idx = p + core + s
        if len(idx) > max_len:
            return []
        out.append(idx)
    used |= toks
    return out


def random_sentence(rng: random.Random, max_n: int = 20, max_entities: int = 4,
                    labels=("ADR", "DIS"), coordination_rate: float = 0.35) -> Sentence:
    """A sentence whose entity set the grid scheme represents exactly."""
    n = rng.randint(1, max_n)
    used: set[int] = set()
    entities: list[Entity] = []
    if rng.random() < coordination_rate:
        # one label per block so shared THW cells never disagree
        lab = rng.choice(labels)
        entities.extend(Entity(idx, lab) for idx in random_coordination(rng, n, used)[:max_entities])
    target = rng.randint(len(entities), max_entities)
    while len(entities) < target:
        idx = random_disjoint_entity(rng, n, used)
        if idx is None:
            break
        used.update(idx)
        entities.append(Entity(idx, rng.choice(labels)))
    return Sentence([f"w{rng.randrange(50)}" for _ in range(n)], entities)


def random_overlapping_sentence(rng: random.Random, max_n: int = 20, max_entities: int = 4,
                                labels=("ADR", "DIS")) -> Sentence:
    """Unrestricted random entities; overlaps may make the grid ambiguous."""
    n = rng.randint(1, max_n)
    entities = []
    for _ in range(rng.randint(0, max_entities)):
        idx = random_disjoint_entity(rng, n, set())
        if idx:
            entities.append(Entity(idx, rng.choice(labels)))
    return Sentence([f"w{rng.randrange(50)}" for _ in range(n)], entities)


# --------------------------------------------------------------------------
# bundled toy corpus

_SYMPTOMS = ["pain", "cramping", "aching", "numbness", "swelling", "stiffness", "tingling", "weakness"]
_PARTS = [["hands"], ["feet"], ["knees"], ["lower", "legs"], ["upper", "arms"], ["back"], ["neck"]]
_SINGLE = ["insomnia", "nausea", "dizziness", "fatigue", "headache", "rash"]


def build_toy_corpus(seed: int = 7, size: int = 20) -> list[Sentence]:
    """Small ADR-style corpus built around coordinated, overlapping discontinuous mentions."""
    rng = random.Random(seed)
    out: list[Sentence] = []
    while len(out) < size:
        kind = len(out) % 4
        if kind == 0:
            # "<s1> and <s2> in my <p1> and <p2> ." -> four discontinuous entities
            s1, s2 = rng.sample(_SYMPTOMS, 2)
            p1, p2 = rng.sample(_PARTS, 2)
            toks = [s1, "and", s2, "in", "my", *p1, "and", *p2, "."]
            i_p1 = list(range(5, 5 + len(p1)))
            i_p2 = list(range(6 + len(p1), 6 + len(p1) + len(p2)))
            ents = [Entity(tuple([h, 3, 4, *p]), "ADR") for h in (0, 2) for p in (i_p1, i_p2)]
        elif kind == 1:
            # "<single> was constant ." -> one-word entity
            w = rng.choice(_SINGLE)
            toks = [w.capitalize(), "was", rng.choice(["constant", "severe", "mild"]), "."]
            ents = [Entity((0,), "ADR")]
        elif kind == 2:
            # "<s1> in my <p1> and <p2> ." -> two entities sharing a prefix
            s1 = rng.choice(_SYMPTOMS)
            p1, p2 = rng.sample(_PARTS, 2)
            toks = ["severe", s1, "in", "my", *p1, "and", *p2, "after", "the", "tablets", "."]
            i_p1 = list(range(4, 4 + len(p1)))
            i_p2 = list(range(5 + len(p1), 5 + len(p1) + len(p2)))
            ents = [Entity(tuple([1, 2, 3, *p]), "ADR") for p in (i_p1, i_p2)]
        else:
            # one-word and contiguous mentions only
            s1, s2 = rng.sample(_SYMPTOMS, 2)
            p1 = rng.choice(_PARTS)
            toks = ["i", "had", s1, "then", rng.choice(_SINGLE), "and", s2, "of", "the", *p1, "."]
            ents = [Entity((2,), "ADR"), Entity((4,), "ADR"),
                    Entity(tuple(range(6, 9 + len(p1))), "ADR")]
        out.append(Sentence(toks, ents))
    return out


def load_toy_corpus() -> list[Sentence]:
    text = resources.files("gridner").joinpath("data/toy_corpus.json").read_text(encoding="utf-8")
    return from_json(text)


if __name__ == "__main__":  # regenerate the bundled file
    from .corpus import sentence_to_dict

    print(json.dumps([sentence_to_dict(s) for s in build_toy_corpus()], indent=1))
