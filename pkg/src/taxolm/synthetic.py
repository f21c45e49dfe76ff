"""Deterministic synthetic taxonomy dumps for tests and toy training runs.

Pseudo-languages are systematic token shifts of one another: every base
token `tok` surfaces as `tok<lang>` in language `<lang>`, so languages have
disjoint vocabularies but identical structure. Descriptions are built so
relations are lexically grounded: concepts on the same occupation page share
an occupation marker token, and concepts in the same major group share a
group marker token.
"""

from __future__ import annotations

import json

_PSEUDO_LANGS = ("aa", "ab", "ac", "ad", "ae", "af", "ag", "ah")


def pseudo_languages(n: int) -> tuple[str, ...]:
    if not 1 <= n <= len(_PSEUDO_LANGS):
        raise ValueError(f"between 1 and {len(_PSEUDO_LANGS)} pseudo-languages supported")
    return _PSEUDO_LANGS[:n]


def synthetic_taxonomy_lines(
    occupations: int = 20,
    skills_per_occupation: int = 5,
    groups: int = 5,
    languages: int = 3,
    aliases_per_occupation: int = 0,
    essential_fraction: float = 0.6,
    filler_tokens: int = 8,
) -> list[str]:
    """Build a synthetic taxonomy as JSONL lines.

    Each occupation belongs to group `occupation % groups`; each skill is
    listed by exactly one occupation, so occupation pages are disjoint and
    relation eligibility has simple closed forms.
    """
    langs = pseudo_languages(languages)
    n_essential = max(1, round(essential_fraction * skills_per_occupation))

    def shift(base: str, lang: str) -> str:
        return f"{base}{lang}"

    def text(bases: list[str], lang: str) -> str:
        return " ".join(shift(b, lang) for b in bases)

    lines: list[str] = []
    for g in range(groups):
        lines.append(
            json.dumps(
                {
                    "kind": "group",
                    "group_id": f"G{g}",
                    "title": {lang: text([f"grp{g}"], lang) for lang in langs},
                    "description": {lang: text([f"grp{g}", "groupdesc"], lang) for lang in langs},
                }
            )
        )

    for o in range(occupations):
        g = o % groups
        occ_id = f"O{o:03d}"
        skill_ids = [f"S{s:03d}" for s in range(o * skills_per_occupation, (o + 1) * skills_per_occupation)]
        # Markers appear twice per description so a masked copy still leaves
        # one surface for relation evidence and restoration context.
        desc_bases = [
            f"grp{g}",
            f"occ{o:03d}",
            f"fill{(o * 3) % filler_tokens}",
            f"grp{g}",
            f"occ{o:03d}",
            f"fill{(o * 3 + 1) % filler_tokens}",
        ]
        lines.append(
            json.dumps(
                {
                    "concept_id": occ_id,
                    "kind": "occupation",
                    "esco_code": f"{g}{o:03d}",
                    "alias_of": None,
                    "major_group": f"G{g}",
                    "preferred_label": {lang: text([f"occ{o:03d}"], lang) for lang in langs},
                    "description": {lang: text(desc_bases, lang) for lang in langs},
                    "essential_skills": skill_ids[:n_essential],
                    "optional_skills": skill_ids[n_essential:],
                }
            )
        )
        for a in range(aliases_per_occupation):
            lines.append(
                json.dumps(
                    {
                        "concept_id": f"A{o:03d}x{a}",
                        "kind": "alias",
                        "esco_code": f"{g}{o:03d}",
                        "alias_of": occ_id,
                        "major_group": None,
                        "preferred_label": {lang: text([f"occ{o:03d}", f"alt{a}"], lang) for lang in langs},
                        "description": {lang: text(desc_bases, lang) for lang in langs},
                        "essential_skills": [],
                        "optional_skills": [],
                    }
                )
            )
        for rank, sid in enumerate(skill_ids):
            s = o * skills_per_occupation + rank
            sk_bases = [
                f"grp{g}",
                f"occ{o:03d}",
                f"skl{s:04d}",
                f"grp{g}",
                f"occ{o:03d}",
                f"fill{(s * 5) % filler_tokens}",
            ]
            lines.append(
                json.dumps(
                    {
                        "concept_id": sid,
                        "kind": "skill",
                        "esco_code": f"sk{s:04d}",
                        "alias_of": None,
                        "major_group": None,
                        "preferred_label": {lang: text([f"skl{s:04d}"], lang) for lang in langs},
                        "description": {lang: text(sk_bases, lang) for lang in langs},
                        "essential_skills": [],
                        "optional_skills": [],
                    }
                )
            )
    return lines


def write_synthetic_taxonomy(path: str, **kwargs) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        handle.write("\n".join(synthetic_taxonomy_lines(**kwargs)) + "\n")
