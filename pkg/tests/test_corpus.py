import json
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gridner.corpus import (
    CorpusError,
    Dataset,
    Entity,
    ParseError,
    SchemaError,
    Sentence,
    compute_stats,
    format_inline,
    from_json,
    is_discontinuous,
    parse_inline,
    to_json,
)
from gridner.synthetic import random_overlapping_sentence

from conftest import PAIN_GOLD


def test_parse_single_word_entity():
    (s,) = parse_inline("Insomnia was constant .\n0,0 ADR\n")
    assert s.tokens == ["Insomnia", "was", "constant", "."]
    assert s.entities == [Entity((0,), "ADR")]


def test_parse_coordinated_fragments():
    text = ("Pain and cramping in my hands and lower legs .\n"
            "0,0;3,5 ADR|0,0;3,4;7,8 ADR|2,4;7,8 ADR|2,5 ADR\n")
    (s,) = parse_inline(text)
    assert [list(e.indices) for e in s.entities] == [
        [0, 3, 4, 5], [0, 3, 4, 7, 8], [2, 3, 4, 7, 8], [2, 3, 4, 5]]
    assert set(s.entities) == set(PAIN_GOLD)


def test_parse_empty_annotation():
    (s,) = parse_inline("a b\n\n")
    assert s.tokens == ["a", "b"] and s.entities == []


def test_parse_skips_blank_sentence():
    assert len(parse_inline("\n\na\n0,0 X\n")) == 1


@pytest.mark.parametrize("ann, line", [
    ("2,1 ADR", 2),
    ("a,1 ADR", 2),
    ("0,9 ADR", 2),
    ("0,1", 2),
    ("0;1 ADR", 2),
])
def test_parse_errors_carry_line_number(ann, line):
    with pytest.raises(ParseError) as exc:
        parse_inline(f"a b c\n{ann}\n")
    assert exc.value.line == line
    assert f"line {line}" in str(exc.value)


def test_parse_error_on_later_sentence():
    with pytest.raises(ParseError) as exc:
        parse_inline("a b\n0,0 X\nc d\n5,5 X\n")
    assert exc.value.line == 4


def test_odd_line_count():
    with pytest.raises(ParseError, match="pairs"):
        parse_inline("a b\n0,0 X\nc d")


def test_duplicate_entities_deduplicated():
    (s,) = parse_inline("a b c\n0,1 X|0,1 X|0,1 Y\n")
    assert s.entities == [Entity((0, 1), "X"), Entity((0, 1), "Y")]


def test_overlapping_fragments_merge():
    (s,) = parse_inline("a b c d\n0,2;1,3 X\n")
    assert s.entities == [Entity((0, 1, 2, 3), "X")]


def test_entity_invariants():
    with pytest.raises(CorpusError):
        Entity((), "X")
    with pytest.raises(CorpusError):
        Entity((3, 1), "X")
    with pytest.raises(CorpusError):
        Sentence(["a"], [Entity((1,), "X")])


def test_json_empty_sentence():
    assert json.loads(to_json([Sentence(["a"], [])])) == [{"sentence": ["a"], "ner": []}]


def test_json_coordinated_roundtrip(pain_cramping):
    text = to_json([pain_cramping])
    doc = json.loads(text)
    assert len(doc[0]["ner"]) == 4
    back = from_json(text)
    assert back == [pain_cramping]
    assert to_json(back) == text


def test_json_order_and_unknown_fields():
    text = json.dumps([
        {"sentence": ["a"], "ner": [], "extra": 1},
        {"sentence": ["b", "c"], "ner": [{"index": [1], "type": "T", "note": "x"}]},
    ])
    a, b = from_json(text)
    assert a.tokens == ["a"] and b.tokens == ["b", "c"]
    assert b.entities == [Entity((1,), "T")]


@pytest.mark.parametrize("doc, missing", [
    ({"ner": []}, "sentence"),
    ({"sentence": ["a"]}, "ner"),
    ({"sentence": ["a"], "ner": [{"type": "X"}]}, "ner.index"),
    ({"sentence": ["a"], "ner": [{"index": [0]}]}, "ner.type"),
])
def test_json_missing_field(doc, missing):
    with pytest.raises(SchemaError) as exc:
        from_json(json.dumps([doc]))
    assert exc.value.field == missing
    assert missing in str(exc.value)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_inline_json_inline_preserves_triples(seed):
    rng = random.Random(seed)
    sents = [random_overlapping_sentence(rng) for _ in range(rng.randint(1, 5))]
    inline = format_inline(sents)
    again = parse_inline(inline)
    via_json = from_json(to_json(again))
    triples = lambda ss: sorted((tuple(s.tokens), e.indices, e.label) for s in ss for e in s.entities)
    assert triples(via_json) == triples(sents)
    assert format_inline(via_json) == inline


def test_is_discontinuous():
    assert is_discontinuous(Entity((0, 3, 4, 5), "ADR"))
    assert not is_discontinuous(Entity((7, 8), "ADR"))
    assert not is_discontinuous(Entity((5,), "ADR"))


def test_stats_single_disc_entity():
    st_ = compute_stats([Sentence(list("abcdef"), [Entity((0, 3, 4, 5), "ADR")])])
    assert st_.discontinuous_entities == 1
    assert st_.token_gap_histogram == {2: 1}
    assert st_.disc_start_end_distance_range == (6, 6)


def test_stats_contiguous_only():
    st_ = compute_stats([Sentence(list("abcd"), [Entity((1, 2, 3), "ADR")])])
    assert (st_.continuous_entities, st_.discontinuous_entities) == (1, 0)
    assert st_.token_gap_histogram == {}


def test_stats_empty():
    st_ = compute_stats([])
    assert st_.total_sentences == st_.total_entities == 0
    assert st_.disc_percentage == 0.0


def test_stats_coordinated_sentence(pain_cramping):
    st_ = compute_stats([pain_cramping])
    # [2,3,4,5] is contiguous; gaps: [0,3,4,5] -> 2; [0,3,4,7,8] -> 2, 2; [2,3,4,7,8] -> 2
    assert st_.discontinuous_entities == 3
    assert st_.token_gap_histogram == {2: 4}


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_stats_invariants_and_permutation(seed):
    rng = random.Random(seed)
    sents = [random_overlapping_sentence(rng) for _ in range(rng.randint(0, 8))]
    a = compute_stats(sents)
    rng.shuffle(sents)
    b = compute_stats(sents)
    assert a == b
    assert a.continuous_entities + a.discontinuous_entities == a.total_entities
    assert all(g >= 1 for g in a.token_gap_histogram)
    if a.total_entities:
        assert a.disc_percentage == a.discontinuous_entities / a.total_entities


def test_dataset_label_set():
    s = Sentence(["a", "b"], [Entity((0,), "B"), Entity((1,), "A")])
    assert Dataset("d", {"train": [s]}).label_set == ["A", "B"]
    with pytest.raises(CorpusError):
        Dataset("d", {"train": [s]}, label_set=["A"])
