from __future__ import annotations

from collections import Counter

import numpy as np
import pytest

from conftest import concept_line
from taxolm.errors import DegenerateInput, EmptyCorpus
from taxolm.taxonomy import load_taxonomy_lines
from taxolm.tokenizer import (
    CLS_ID,
    NUM_SPECIALS,
    SEP_ID,
    UNK_ID,
    TokenSequence,
    build_pair_input,
    build_vocab,
    instance_text,
    load_vocab,
    pair_sequence,
    save_vocab,
    tokenize,
)


def _label_free_store(*descriptions: str):
    lines = [
        concept_line(f"S{i}", "skill", {"en": text}, label={"en": ""})
        for i, text in enumerate(descriptions)
    ]
    return load_taxonomy_lines(lines)


def test_tokenize_splits_punctuation_and_lowercases():
    assert tokenize("Animal therapist.") == ["animal", "therapist", "."]
    assert tokenize("") == []
    assert tokenize("  a,b  ") == ["a", ",", "b"]


def test_build_vocab_min_freq_thresholds():
    store = _label_free_store("animal therapist", "animal behavior")
    vocab = build_vocab(store, min_freq=1)
    assert {"animal", "therapist", "behavior"} <= set(vocab.id_to_token)
    vocab2 = build_vocab(store, min_freq=2)
    assert "animal" in vocab2.token_to_id
    assert "therapist" not in vocab2.token_to_id
    assert vocab2.encode("animal therapist") == [vocab2.token_to_id["animal"], UNK_ID]
    with pytest.raises(EmptyCorpus):
        build_vocab(store, min_freq=99)


def test_vocab_ordering_and_frequency_recount(tiny_store):
    vocab = build_vocab(tiny_store, min_freq=1)
    # Independent recount over exactly the text the vocabulary is built from.
    counts: Counter[str] = Counter()
    for cid, lang in tiny_store.entries:
        counts.update(tokenize(instance_text(tiny_store, cid, lang)))
    assert set(vocab.id_to_token[NUM_SPECIALS:]) == set(counts)
    ordered = sorted(counts, key=lambda tok: (-counts[tok], tok))
    assert list(vocab.id_to_token[NUM_SPECIALS:]) == ordered


def test_encode_decode_round_trip_random_in_vocab_text(tiny_store):
    vocab = build_vocab(tiny_store, min_freq=1)
    words = [t for t in vocab.id_to_token[NUM_SPECIALS:] if t.isalpha()]
    rng = np.random.default_rng(5)
    for _ in range(200):
        tokens = [words[i] for i in rng.integers(len(words), size=rng.integers(1, 12))]
        ids = vocab.encode(" ".join(tokens))
        assert vocab.decode(ids) == tokens


def test_vocab_save_load_round_trip(tmp_path, tiny_store):
    vocab = build_vocab(tiny_store, min_freq=1)
    path = tmp_path / "vocab.txt"
    save_vocab(vocab, str(path))
    reloaded = load_vocab(str(path))
    assert reloaded == vocab


def test_pair_input_short_segments(tiny_store):
    vocab = build_vocab(tiny_store, min_freq=1)
    seq = build_pair_input(vocab, "animal", "anatomy of animals", "nurse", "care standards", 128)
    # CLS + 4 + SEP + 3 + SEP
    assert len(seq) == 10
    assert seq.ids[0] == CLS_ID
    assert seq.ids[-1] == SEP_ID
    assert seq.segment_boundary == 6

    three = build_pair_input(vocab, "animal", "of animals", "care", "of nurse", 128)
    assert len(three) == 9
    assert three.segment_boundary == 5


def test_pair_input_truncates_to_exact_budget():
    ids_a = list(range(NUM_SPECIALS, NUM_SPECIALS + 100))
    ids_b = list(range(NUM_SPECIALS + 100, NUM_SPECIALS + 200))
    seq = pair_sequence(ids_a, ids_b, max_len=128)
    assert len(seq) == 128
    segment_a = seq.ids[1 : seq.segment_boundary - 1]
    segment_b = seq.ids[seq.segment_boundary : -1]
    assert len(segment_a) == 63
    assert len(segment_b) == 62
    assert list(segment_a) == ids_a[:63]
    assert list(segment_b) == ids_b[:62]


def test_pair_input_surplus_flows_to_long_segment():
    ids_a = list(range(NUM_SPECIALS, NUM_SPECIALS + 5))
    ids_b = list(range(NUM_SPECIALS, NUM_SPECIALS + 300))
    seq = pair_sequence(ids_a, ids_b, max_len=64)
    assert len(seq) == 64
    assert seq.segment_boundary == 7  # all 5 of segment A survive
    assert len(seq.ids[seq.segment_boundary : -1]) == 64 - 3 - 5


def test_pair_input_degenerate_and_bad_max_len(tiny_store):
    vocab = build_vocab(tiny_store, min_freq=1)
    with pytest.raises(DegenerateInput):
        build_pair_input(vocab, "animal", "anatomy", "", "", 64)
    with pytest.raises(ValueError):
        build_pair_input(vocab, "a", "b", "c", "d", 7)


def test_truncation_structure_property():
    rng = np.random.default_rng(11)
    for _ in range(300):
        len_a = int(rng.integers(1, 60))
        len_b = int(rng.integers(1, 60))
        max_len = int(rng.integers(8, 48))
        ids_a = [NUM_SPECIALS + i for i in range(len_a)]
        ids_b = [NUM_SPECIALS + 100 + i for i in range(len_b)]
        seq = pair_sequence(ids_a, ids_b, max_len)
        assert seq.ids[0] == CLS_ID
        assert seq.ids[-1] == SEP_ID
        assert sum(1 for i in seq.ids if i == SEP_ID) == 2
        assert 0 < seq.segment_boundary < len(seq)
        budget = max_len - 3
        if len_a + len_b >= budget:
            assert len(seq) == max_len  # budget fully used
        else:
            assert len(seq) == len_a + len_b + 3


def test_token_sequence_invariants_checked():
    with pytest.raises(ValueError):
        TokenSequence(ids=(SEP_ID, CLS_ID), segment_boundary=1)
    with pytest.raises(ValueError):
        TokenSequence(ids=(CLS_ID, 7, SEP_ID), segment_boundary=2)  # one SEP only
    with pytest.raises(ValueError):
        TokenSequence(ids=(CLS_ID, SEP_ID, 7, SEP_ID), segment_boundary=0)
