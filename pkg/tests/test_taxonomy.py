from __future__ import annotations

import json

import pytest

from conftest import concept_line, group_line
from taxolm.errors import DanglingReference, DuplicateId, KindError, SchemaError, UnknownId
from taxolm.taxonomy import (
    Kind,
    corpus_stats,
    description_entries,
    group_members,
    load_taxonomy_lines,
    occupation_page,
    serialize_taxonomy,
)
from taxolm.tokenizer import tokenize


def test_fixture_counts(tiny_store):
    assert len(tiny_store.concepts) == 9
    assert len(tiny_store.groups) == 2
    assert tiny_store.languages == {"en", "da", "de"}
    kinds = [rec.kind for rec in tiny_store.concepts.values()]
    assert kinds.count(Kind.OCCUPATION) == 3
    assert kinds.count(Kind.SKILL) == 4
    assert kinds.count(Kind.ALIAS) == 2


def test_unknown_essential_skill_is_dangling():
    lines = [
        group_line("G1", "g"),
        concept_line("O1", "occupation", {"en": "d"}, major_group="G1", essential=["NOPE"]),
    ]
    with pytest.raises(DanglingReference, match="NOPE"):
        load_taxonomy_lines(lines)


def test_alias_must_target_occupation():
    lines = [
        group_line("G1", "g"),
        concept_line("O1", "occupation", {"en": "d"}, major_group="G1"),
        concept_line("S1", "skill", {"en": "s"}),
        concept_line("A1", "alias", {"en": "s"}, alias_of="S1"),
    ]
    with pytest.raises(DanglingReference, match="not an occupation"):
        load_taxonomy_lines(lines)


def test_duplicate_id_rejected():
    lines = [
        group_line("G1", "g"),
        concept_line("O1", "occupation", {"en": "d"}, major_group="G1"),
        concept_line("O1", "occupation", {"en": "d"}, major_group="G1"),
    ]
    with pytest.raises(DuplicateId):
        load_taxonomy_lines(lines)


def test_schema_error_carries_line_number():
    lines = [group_line("G1", "g"), '{"kind": "occupation", "preferred_label": {}}']
    with pytest.raises(SchemaError) as err:
        load_taxonomy_lines(lines)
    assert err.value.line == 2
    assert "line 2" in str(err.value)


def test_occupation_requires_group_and_skills_only_on_occupations():
    with pytest.raises(SchemaError, match="major_group"):
        load_taxonomy_lines([concept_line("O1", "occupation", {"en": "d"})])
    with pytest.raises(SchemaError, match="skills"):
        load_taxonomy_lines([concept_line("S1", "skill", {"en": "d"}, essential=["S2"])])


def test_unknown_field_strict_vs_lenient():
    record = json.loads(concept_line("S1", "skill", {"en": "d"}))
    record["bogus"] = 1
    line = json.dumps(record)
    with pytest.raises(SchemaError, match="bogus"):
        load_taxonomy_lines([line], strict=True)
    with pytest.warns(UserWarning, match="bogus"):
        store = load_taxonomy_lines([line], strict=False)
    assert "S1" in store.concepts


def test_invalid_language_code_rejected():
    bad = json.dumps(
        {
            "concept_id": "S1",
            "kind": "skill",
            "esco_code": "",
            "alias_of": None,
            "major_group": None,
            "preferred_label": {"EN": "x"},
            "description": {"EN": "x"},
            "essential_skills": [],
            "optional_skills": [],
        }
    )
    with pytest.raises(SchemaError, match="language"):
        load_taxonomy_lines([bad])


def test_alias_descriptions_copy_target(tiny_store):
    assert tiny_store.concepts["A1"].description == tiny_store.concepts["O1"].description
    # even if the dump carried a divergent alias description
    lines = [
        group_line("G1", "g"),
        concept_line("O1", "occupation", {"en": "the real text"}, major_group="G1"),
        concept_line("A1", "alias", {"en": "something else"}, alias_of="O1"),
    ]
    store = load_taxonomy_lines(lines)
    assert store.concepts["A1"].description == {"en": "the real text"}


def test_occupation_page_contents(tiny_store):
    assert occupation_page(tiny_store, "O1") == {"O1", "A1", "S1", "S2"}
    assert occupation_page(tiny_store, "O2") == {"O2", "S3"}


def test_occupation_page_degenerate_is_singleton():
    lines = [group_line("G1", "g"), concept_line("O1", "occupation", {"en": "d"}, major_group="G1")]
    store = load_taxonomy_lines(lines)
    assert occupation_page(store, "O1") == {"O1"}


def test_occupation_page_errors(tiny_store):
    with pytest.raises(UnknownId):
        occupation_page(tiny_store, "nope")
    with pytest.raises(KindError):
        occupation_page(tiny_store, "S1")


def test_page_sizes_match_raw_jsonl_rescan(tiny_lines, tiny_store):
    # Independent oracle: recompute pages straight from the raw records.
    records = [json.loads(line) for line in tiny_lines]
    occupations = [r for r in records if r.get("kind") == "occupation"]
    for occ in occupations:
        expected = {occ["concept_id"]}
        expected.update(occ["essential_skills"])
        expected.update(occ["optional_skills"])
        expected.update(
            r["concept_id"]
            for r in records
            if r.get("kind") == "alias" and r["alias_of"] == occ["concept_id"]
        )
        assert occupation_page(tiny_store, occ["concept_id"]) == expected


def test_group_members_union_of_pages(tiny_store):
    assert group_members(tiny_store, "G1") == occupation_page(tiny_store, "O1") | occupation_page(
        tiny_store, "O2"
    )
    with pytest.raises(UnknownId):
        group_members(tiny_store, "nope")


def test_group_members_singleton_group():
    lines = [group_line("G1", "g"), concept_line("O1", "occupation", {"en": "d"}, major_group="G1")]
    store = load_taxonomy_lines(lines)
    assert group_members(store, "G1") == {"O1"}


def test_group_members_matches_brute_force_filter(rich_lines, rich_store):
    # Oracle: a concept belongs to group G iff it is an occupation of G, an
    # alias of one, or a skill listed by one.
    records = [json.loads(line) for line in rich_lines]
    by_id = {r["concept_id"]: r for r in records if "concept_id" in r}
    for gid in rich_store.groups:
        expected = set()
        for rec in by_id.values():
            kind = rec["kind"]
            if kind == "occupation":
                in_group = rec["major_group"] == gid
            elif kind == "alias":
                in_group = by_id[rec["alias_of"]]["major_group"] == gid
            else:
                in_group = any(
                    o["major_group"] == gid
                    and rec["concept_id"] in o["essential_skills"] + o["optional_skills"]
                    for o in by_id.values()
                    if o["kind"] == "occupation"
                )
            if in_group:
                expected.add(rec["concept_id"])
        assert group_members(rich_store, gid) == expected


def test_description_entries_skips_missing_and_empty(tiny_store):
    entries = description_entries(tiny_store)
    assert ("O2", "da") not in entries  # missing translation
    assert ("S4", "da") not in entries  # empty string
    assert ("S4", "en") in entries
    assert all(tiny_store.concepts[cid].description[lang].strip() for cid, lang in entries)
    assert entries == sorted(entries)


def test_description_entries_recount_oracle(tiny_lines, tiny_store):
    records = [json.loads(line) for line in tiny_lines if "concept_id" in json.loads(line)]
    expected = sum(
        1 for r in records for text in r["description"].values() if text.strip()
    )
    assert len(description_entries(tiny_store)) == expected
    per_lang = corpus_stats(tiny_store, tokenize)
    assert sum(s["instance_count"] for s in per_lang.values()) == expected


def test_description_entries_language_filter(tiny_store):
    only_en = description_entries(tiny_store, {"en"})
    assert only_en and all(lang == "en" for _, lang in only_en)


def test_corpus_stats_hand_counts():
    lines = [
        concept_line("S1", "skill", {"en": "alpha beta gamma"}, label={"en": ""}),
        concept_line("S2", "skill", {"en": "one two three four five"}, label={"en": ""}),
    ]
    stats = corpus_stats(load_taxonomy_lines(lines), tokenize)
    assert stats["en"] == {"instance_count": 2, "mean_token_length": 4.0, "max_token_length": 5}
    assert "da" not in stats


def test_round_trip_identical_store(tiny_store, rich_store):
    for store in (tiny_store, rich_store):
        reloaded = load_taxonomy_lines(serialize_taxonomy(store).splitlines())
        assert reloaded == store
        assert serialize_taxonomy(reloaded) == serialize_taxonomy(store)


def test_referential_closure(rich_store):
    for rec in rich_store.concepts.values():
        if rec.alias_of is not None:
            assert rec.alias_of in rich_store.concepts
        if rec.major_group is not None:
            assert rec.major_group in rich_store.groups
        for sid in (*rec.essential_skills, *rec.optional_skills):
            assert rich_store.concepts[sid].kind is Kind.SKILL


def test_page_and_group_invariants(rich_store):
    for occ, page in rich_store.pages.items():
        assert occ in page
        members = group_members(rich_store, rich_store.concepts[occ].major_group)
        assert page <= members
