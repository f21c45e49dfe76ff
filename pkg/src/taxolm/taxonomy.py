"""Multilingual taxonomy ingestion, validation, and indexing.

The input format is a flat JSONL dump, one object per line, UTF-8:

* concept records::

    {"concept_id": str, "kind": "occupation"|"skill"|"alias",
     "esco_code": str, "alias_of": str|null, "major_group": str|null,
     "preferred_label": {lang: str}, "description": {lang: str},
     "essential_skills": [str], "optional_skills": [str]}

* group records::

    {"kind": "group", "group_id": str, "title": {lang: str},
     "description": {lang: str}}

Unknown fields are rejected in strict mode and ignored with a warning
otherwise. The loaded store is referentially closed, immutable, and indexed
for occupation pages, major-group membership, and nonempty description
entries.
"""

from __future__ import annotations

import enum
import json
import re
import warnings
from dataclasses import dataclass, field
from typing import Callable, Iterable

from .errors import (
    DanglingReference,
    DuplicateId,
    KindError,
    SchemaError,
    UnknownId,
)

_LANG_RE = re.compile(r"^[a-z]{2}$")


class Kind(str, enum.Enum):
    OCCUPATION = "occupation"
    SKILL = "skill"
    ALIAS = "alias"


@dataclass(frozen=True)
class MajorGroup:
    """A top-level occupation category with per-language title/description."""

    group_id: str
    title: dict[str, str]
    description: dict[str, str]


@dataclass(frozen=True)
class ConceptRecord:
    """One taxonomy node: an occupation, a skill, or an occupation alias.

    Alias records always carry the description map of their target
    occupation (the loader materializes the copy), so an alias can stand in
    for the occupation anywhere a description is needed.
    """

    concept_id: str
    kind: Kind
    esco_code: str
    preferred_label: dict[str, str]
    description: dict[str, str]
    alias_of: str | None = None
    major_group: str | None = None
    essential_skills: tuple[str, ...] = ()
    optional_skills: tuple[str, ...] = ()


@dataclass(frozen=True, eq=False)
class TaxonomyStore:
    """Validated, indexed view of a taxonomy dump. Immutable after load.

    Safe for concurrent read access; all derived indexes are built once at
    construction time.
    """

    concepts: dict[str, ConceptRecord]
    groups: dict[str, MajorGroup]
    languages: frozenset[str]
    # Derived indexes (not part of equality):
    pages: dict[str, frozenset[str]] = field(repr=False, default_factory=dict)
    page_hosts: dict[str, frozenset[str]] = field(repr=False, default_factory=dict)
    concept_groups: dict[str, frozenset[str]] = field(repr=False, default_factory=dict)
    group_occupations: dict[str, tuple[str, ...]] = field(repr=False, default_factory=dict)
    entries: tuple[tuple[str, str], ...] = field(repr=False, default=())
    entry_languages: dict[str, tuple[str, ...]] = field(repr=False, default_factory=dict)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TaxonomyStore):
            return NotImplemented
        return (
            self.concepts == other.concepts
            and self.groups == other.groups
            and self.languages == other.languages
        )

    def __hash__(self) -> int:  # identity hash; contents are dict-valued
        return id(self)


def _build_store(concepts: dict[str, ConceptRecord], groups: dict[str, MajorGroup]) -> TaxonomyStore:
    languages: set[str] = set()
    for rec in concepts.values():
        languages.update(rec.preferred_label)
        languages.update(rec.description)
    for grp in groups.values():
        languages.update(grp.title)
        languages.update(grp.description)

    occupations = sorted(cid for cid, r in concepts.items() if r.kind is Kind.OCCUPATION)

    aliases_of: dict[str, list[str]] = {cid: [] for cid in occupations}
    for cid, rec in sorted(concepts.items()):
        if rec.kind is Kind.ALIAS:
            aliases_of[rec.alias_of].append(cid)

    pages: dict[str, frozenset[str]] = {}
    for occ in occupations:
        rec = concepts[occ]
        members = {occ}
        members.update(aliases_of[occ])
        members.update(rec.essential_skills)
        members.update(rec.optional_skills)
        pages[occ] = frozenset(members)

    # page_hosts maps a concept to every occupation whose page contains it.
    hosts: dict[str, set[str]] = {cid: set() for cid in concepts}
    for occ, members in pages.items():
        for cid in members:
            hosts[cid].add(occ)
    page_hosts = {cid: frozenset(h) for cid, h in hosts.items()}

    concept_groups = {
        cid: frozenset(
            concepts[occ].major_group for occ in page_hosts[cid]  # type: ignore[misc]
        )
        for cid in concepts
    }

    group_occupations: dict[str, list[str]] = {gid: [] for gid in groups}
    for occ in occupations:
        group_occupations[concepts[occ].major_group].append(occ)  # type: ignore[index]

    entries: list[tuple[str, str]] = []
    entry_languages: dict[str, tuple[str, ...]] = {}
    for cid in sorted(concepts):
        langs = tuple(
            lang
            for lang in sorted(concepts[cid].description)
            if concepts[cid].description[lang].strip()
        )
        entry_languages[cid] = langs
        entries.extend((cid, lang) for lang in langs)

    return TaxonomyStore(
        concepts=concepts,
        groups=groups,
        languages=frozenset(languages),
        pages=pages,
        page_hosts=page_hosts,
        concept_groups=concept_groups,
        group_occupations={gid: tuple(occs) for gid, occs in group_occupations.items()},
        entries=tuple(entries),
        entry_languages=entry_languages,
    )


_CONCEPT_FIELDS = {
    "concept_id",
    "kind",
    "esco_code",
    "alias_of",
    "major_group",
    "preferred_label",
    "description",
    "essential_skills",
    "optional_skills",
}
_GROUP_FIELDS = {"kind", "group_id", "title", "description"}


def _lang_map(raw: object, name: str, line: int) -> dict[str, str]:
    if not isinstance(raw, dict):
        raise SchemaError(f"field {name!r} must be an object of language: text", line)
    out: dict[str, str] = {}
    for lang, text in raw.items():
        if not isinstance(lang, str) or not _LANG_RE.match(lang):
            raise SchemaError(f"field {name!r} has invalid language code {lang!r}", line)
        if not isinstance(text, str):
            raise SchemaError(f"field {name!r}[{lang!r}] must be a string", line)
        out[lang] = text
    return out


def _id_list(raw: object, name: str, line: int) -> tuple[str, ...]:
    if raw is None:
        return ()
    if not isinstance(raw, list) or not all(isinstance(x, str) for x in raw):
        raise SchemaError(f"field {name!r} must be a list of ids", line)
    return tuple(raw)


def _opt_str(raw: object, name: str, line: int) -> str | None:
    if raw is None:
        return None
    if not isinstance(raw, str):
        raise SchemaError(f"field {name!r} must be a string or null", line)
    return raw


def _check_unknown(obj: dict, allowed: set[str], line: int, strict: bool) -> None:
    unknown = sorted(set(obj) - allowed)
    if not unknown:
        return
    if strict:
        raise SchemaError(f"unknown field(s) {', '.join(map(repr, unknown))}", line)
    warnings.warn(f"line {line}: ignoring unknown field(s) {', '.join(map(repr, unknown))}")


def _parse_concept(obj: dict, kind: Kind, line: int, strict: bool) -> ConceptRecord:
    _check_unknown(obj, _CONCEPT_FIELDS, line, strict)
    for required in ("concept_id", "preferred_label", "description"):
        if required not in obj:
            raise SchemaError(f"missing field {required!r}", line)
    cid = obj["concept_id"]
    if not isinstance(cid, str) or not cid:
        raise SchemaError("field 'concept_id' must be a nonempty string", line)

    esco_code = obj.get("esco_code", "")
    if not isinstance(esco_code, str):
        raise SchemaError("field 'esco_code' must be a string", line)

    alias_of = _opt_str(obj.get("alias_of"), "alias_of", line)
    major_group = _opt_str(obj.get("major_group"), "major_group", line)
    essential = _id_list(obj.get("essential_skills"), "essential_skills", line)
    optional = _id_list(obj.get("optional_skills"), "optional_skills", line)

    if kind is Kind.ALIAS and alias_of is None:
        raise SchemaError(f"alias {cid!r} requires 'alias_of'", line)
    if kind is not Kind.ALIAS and alias_of is not None:
        raise SchemaError(f"{kind.value} {cid!r} must not set 'alias_of'", line)
    if kind is Kind.OCCUPATION and major_group is None:
        raise SchemaError(f"occupation {cid!r} requires 'major_group'", line)
    if kind is not Kind.OCCUPATION and major_group is not None:
        raise SchemaError(f"{kind.value} {cid!r} must not set 'major_group'", line)
    if kind is not Kind.OCCUPATION and (essential or optional):
        raise SchemaError(f"{kind.value} {cid!r} must not list skills", line)

    return ConceptRecord(
        concept_id=cid,
        kind=kind,
        esco_code=esco_code,
        preferred_label=_lang_map(obj["preferred_label"], "preferred_label", line),
        description=_lang_map(obj["description"], "description", line),
        alias_of=alias_of,
        major_group=major_group,
        essential_skills=essential,
        optional_skills=optional,
    )


def _parse_group(obj: dict, line: int, strict: bool) -> MajorGroup:
    _check_unknown(obj, _GROUP_FIELDS, line, strict)
    if "group_id" not in obj:
        raise SchemaError("missing field 'group_id'", line)
    gid = obj["group_id"]
    if not isinstance(gid, str) or not gid:
        raise SchemaError("field 'group_id' must be a nonempty string", line)
    if "title" not in obj:
        raise SchemaError("missing field 'title'", line)
    title = _lang_map(obj["title"], "title", line)
    if not any(t.strip() for t in title.values()):
        raise SchemaError(f"group {gid!r} needs at least one nonempty title", line)
    description = _lang_map(obj.get("description", {}), "description", line)
    return MajorGroup(group_id=gid, title=title, description=description)


def load_taxonomy_lines(lines: Iterable[str], strict: bool = False) -> TaxonomyStore:
    """Parse and validate taxonomy JSONL given as an iterable of lines."""
    concepts: dict[str, ConceptRecord] = {}
    concept_lines: dict[str, int] = {}
    groups: dict[str, MajorGroup] = {}

    for line_no, raw_line in enumerate(lines, start=1):
        if not raw_line.strip():
            continue
        try:
            obj = json.loads(raw_line)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"invalid JSON: {exc.msg}", line_no) from exc
        if not isinstance(obj, dict):
            raise SchemaError("record must be a JSON object", line_no)
        kind_raw = obj.get("kind")
        if kind_raw == "group":
            group = _parse_group(obj, line_no, strict)
            if group.group_id in groups:
                raise DuplicateId(f"duplicate group_id {group.group_id!r}", line_no)
            groups[group.group_id] = group
        elif kind_raw in (Kind.OCCUPATION.value, Kind.SKILL.value, Kind.ALIAS.value):
            rec = _parse_concept(obj, Kind(kind_raw), line_no, strict)
            if rec.concept_id in concepts:
                raise DuplicateId(f"duplicate concept_id {rec.concept_id!r}", line_no)
            concepts[rec.concept_id] = rec
            concept_lines[rec.concept_id] = line_no
        else:
            raise SchemaError(f"field 'kind' must be one of occupation/skill/alias/group, got {kind_raw!r}", line_no)

    # Referential closure over the fully-read file.
    for cid, rec in concepts.items():
        line_no = concept_lines[cid]
        if rec.kind is Kind.ALIAS:
            target = concepts.get(rec.alias_of or "")
            if target is None:
                raise DanglingReference(f"alias {cid!r} targets unknown id {rec.alias_of!r}", line_no)
            if target.kind is not Kind.OCCUPATION:
                raise DanglingReference(
                    f"alias {cid!r} targets {rec.alias_of!r} which is a {target.kind.value}, not an occupation",
                    line_no,
                )
        if rec.kind is Kind.OCCUPATION:
            if rec.major_group not in groups:
                raise DanglingReference(f"occupation {cid!r} references unknown group {rec.major_group!r}", line_no)
            for sid in (*rec.essential_skills, *rec.optional_skills):
                skill = concepts.get(sid)
                if skill is None:
                    raise DanglingReference(f"occupation {cid!r} lists unknown skill {sid!r}", line_no)
                if skill.kind is not Kind.SKILL:
                    raise DanglingReference(
                        f"occupation {cid!r} lists {sid!r} which is a {skill.kind.value}, not a skill", line_no
                    )

    # Aliases share their target occupation's description map verbatim.
    for cid, rec in list(concepts.items()):
        if rec.kind is Kind.ALIAS:
            target = concepts[rec.alias_of]  # type: ignore[index]
            if rec.description != target.description:
                concepts[cid] = ConceptRecord(
                    concept_id=rec.concept_id,
                    kind=rec.kind,
                    esco_code=rec.esco_code,
                    preferred_label=rec.preferred_label,
                    description=dict(target.description),
                    alias_of=rec.alias_of,
                )

    return _build_store(concepts, groups)


def load_taxonomy(path: str, strict: bool = False) -> TaxonomyStore:
    """Load, validate, and index a taxonomy JSONL dump.

    Raises SchemaError / DuplicateId / DanglingReference with the offending
    1-based line number.
    """
    with open(path, encoding="utf-8") as handle:
        return load_taxonomy_lines(handle, strict=strict)


def _concept_to_json(rec: ConceptRecord) -> dict:
    return {
        "concept_id": rec.concept_id,
        "kind": rec.kind.value,
        "esco_code": rec.esco_code,
        "alias_of": rec.alias_of,
        "major_group": rec.major_group,
        "preferred_label": {k: rec.preferred_label[k] for k in sorted(rec.preferred_label)},
        "description": {k: rec.description[k] for k in sorted(rec.description)},
        "essential_skills": list(rec.essential_skills),
        "optional_skills": list(rec.optional_skills),
    }


def serialize_taxonomy(store: TaxonomyStore) -> str:
    """Render a store back to normalized JSONL (groups first, ids sorted)."""
    lines = []
    for gid in sorted(store.groups):
        grp = store.groups[gid]
        lines.append(
            json.dumps(
                {
                    "kind": "group",
                    "group_id": gid,
                    "title": {k: grp.title[k] for k in sorted(grp.title)},
                    "description": {k: grp.description[k] for k in sorted(grp.description)},
                },
                ensure_ascii=False,
            )
        )
    for cid in sorted(store.concepts):
        lines.append(json.dumps(_concept_to_json(store.concepts[cid]), ensure_ascii=False))
    return "\n".join(lines) + "\n"


def save_taxonomy(store: TaxonomyStore, path: str) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(serialize_taxonomy(store))


def occupation_page(store: TaxonomyStore, occupation_id: str) -> frozenset[str]:
    """The occupation itself, all its aliases, and all its listed skills."""
    rec = store.concepts.get(occupation_id)
    if rec is None:
        raise UnknownId(f"unknown concept id {occupation_id!r}")
    if rec.kind is not Kind.OCCUPATION:
        raise KindError(f"{occupation_id!r} is a {rec.kind.value}, not an occupation")
    return store.pages[occupation_id]


def group_members(store: TaxonomyStore, group_id: str) -> frozenset[str]:
    """Union of the occupation pages of every occupation in the group."""
    if group_id not in store.groups:
        raise UnknownId(f"unknown group id {group_id!r}")
    members: set[str] = set()
    for occ in store.group_occupations[group_id]:
        members.update(store.pages[occ])
    return frozenset(members)


def description_entries(
    store: TaxonomyStore, language_filter: set[str] | frozenset[str] | None = None
) -> list[tuple[str, str]]:
    """All (concept_id, language) pairs with a nonempty description.

    Whitespace-only descriptions count as empty. Order is deterministic:
    sorted by concept_id, then language.
    """
    if language_filter is None:
        return list(store.entries)
    return [(cid, lang) for cid, lang in store.entries if lang in language_filter]


def corpus_stats(
    store: TaxonomyStore, tokenizer: Callable[[str], list]
) -> dict[str, dict[str, float | int]]:
    """Per-language description counts and token-length statistics.

    `tokenizer` is any callable mapping text to a token sequence; only the
    sequence length is used. Languages with zero entries are omitted.
    """
    per_lang: dict[str, list[int]] = {}
    for cid, lang in store.entries:
        length = len(tokenizer(store.concepts[cid].description[lang]))
        per_lang.setdefault(lang, []).append(length)
    stats: dict[str, dict[str, float | int]] = {}
    for lang in sorted(per_lang):
        lengths = per_lang[lang]
        stats[lang] = {
            "instance_count": len(lengths),
            "mean_token_length": sum(lengths) / len(lengths),
            "max_token_length": max(lengths),
        }
    return stats
