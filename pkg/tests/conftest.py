from __future__ import annotations

import json

import pytest

from taxolm.synthetic import synthetic_taxonomy_lines
from taxolm.taxonomy import TaxonomyStore, load_taxonomy_lines


def group_line(gid: str, title: str, langs=("en",)) -> str:
    return json.dumps(
        {
            "kind": "group",
            "group_id": gid,
            "title": {lang: title for lang in langs},
            "description": {lang: f"{title} description" for lang in langs},
        }
    )


def concept_line(
    cid: str,
    kind: str,
    description: dict[str, str],
    label: dict[str, str] | None = None,
    alias_of: str | None = None,
    major_group: str | None = None,
    essential: list[str] | None = None,
    optional: list[str] | None = None,
    esco_code: str = "",
) -> str:
    return json.dumps(
        {
            "concept_id": cid,
            "kind": kind,
            "esco_code": esco_code,
            "alias_of": alias_of,
            "major_group": major_group,
            "preferred_label": label if label is not None else {lang: cid.lower() for lang in description},
            "description": description,
            "essential_skills": essential or [],
            "optional_skills": optional or [],
        }
    )


def tiny_fixture_lines() -> list[str]:
    """3 occupations, 4 skills, 2 aliases, 2 groups, 3 languages."""
    return [
        group_line("G1", "health workers", langs=("en", "da", "de")),
        group_line("G2", "data workers", langs=("en",)),
        concept_line(
            "O1",
            "occupation",
            {"en": "treats animals daily", "da": "behandler dyr dagligt", "de": "behandelt tiere"},
            label={"en": "animal therapist", "da": "dyreterapeut", "de": "tiertherapeut"},
            major_group="G1",
            essential=["S1"],
            optional=["S2"],
            esco_code="2250.4",
        ),
        concept_line(
            "O2",
            "occupation",
            {"en": "nurses people", "de": "pflegt menschen"},
            label={"en": "nurse", "de": "pfleger"},
            major_group="G1",
            essential=["S3"],
        ),
        concept_line(
            "O3",
            "occupation",
            {"en": "analyzes data", "da": "analyserer data"},
            label={"en": "data analyst", "da": "dataanalytiker"},
            major_group="G2",
            optional=["S4"],
        ),
        concept_line("S1", "skill", {"en": "anatomy of animals", "da": "dyreanatomi"}),
        concept_line("S2", "skill", {"en": "physiotherapy for animals"}),
        concept_line("S3", "skill", {"en": "care standards", "de": "pflegestandards"}),
        concept_line("S4", "skill", {"en": "statistics", "da": ""}),
        concept_line(
            "A1",
            "alias",
            {"en": "treats animals daily", "da": "behandler dyr dagligt", "de": "behandelt tiere"},
            label={"en": "animal rehab therapist"},
            alias_of="O1",
        ),
        concept_line(
            "A2",
            "alias",
            {"en": "analyzes data", "da": "analyserer data"},
            label={"en": "data cruncher"},
            alias_of="O3",
        ),
    ]


@pytest.fixture(scope="session")
def tiny_lines() -> list[str]:
    return tiny_fixture_lines()


@pytest.fixture(scope="session")
def tiny_store(tiny_lines) -> TaxonomyStore:
    return load_taxonomy_lines(tiny_lines)


@pytest.fixture(scope="session")
def rich_lines() -> list[str]:
    # Symmetric fixture: all pages have 7 concepts, all groups 3 occupations,
    # every concept described in all 3 languages; no relation is degenerate.
    return synthetic_taxonomy_lines(
        occupations=9,
        skills_per_occupation=4,
        groups=3,
        languages=3,
        aliases_per_occupation=2,
    )


@pytest.fixture(scope="session")
def rich_store(rich_lines) -> TaxonomyStore:
    return load_taxonomy_lines(rich_lines)
