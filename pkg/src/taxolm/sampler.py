"""Anchor/partner pair sampling under three relation strategies.

A pair is drawn by picking an anchor uniformly over description entries and
then a partner according to a relation chosen with probability 1/3 each:

* random  — any entry in any language;
* linked  — an entry from the anchor's occupation page;
* grouped — an entry sharing a major group with the anchor.

In strict mode (the default) the three labels are mutually exclusive:
grouped partners must not be linked-eligible, and random draws are
rejection-resampled while they collide with a linked or grouped relation.
`verify_relation` recomputes the strongest true relation by exhaustive graph
inspection and is the soundness oracle for sampled labels.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateRelation, EmptyCorpus, ExhaustedRetries, UnknownId
from .taxonomy import TaxonomyStore

Entry = tuple[str, str]


class Relation(enum.IntEnum):
    RANDOM = 0
    LINKED = 1
    GROUPED = 2

    @property
    def wire_name(self) -> str:
        return self.name.lower()

    @classmethod
    def from_wire(cls, name: str) -> "Relation":
        return cls[name.upper()]


@dataclass(frozen=True)
class PairSample:
    """An anchor/partner entry pair with its assigned relation label."""

    anchor: Entry
    partner: Entry
    relation: Relation


@dataclass(frozen=True)
class SamplerConfig:
    seed: int
    strict_disjoint_random: bool = True
    max_retries: int = 64

    def __post_init__(self):
        if self.max_retries < 1:
            raise ValueError("max_retries must be >= 1")


def _require_entry(store: TaxonomyStore, entry: Entry) -> None:
    cid, lang = entry
    if cid not in store.concepts:
        raise UnknownId(f"unknown concept id {cid!r}")
    if lang not in store.entry_languages.get(cid, ()):
        raise UnknownId(f"no nonempty {lang!r} description for {cid!r}")


def _linked_concepts(store: TaxonomyStore, concept_id: str) -> set[str]:
    """Concepts sharing at least one occupation page with `concept_id`."""
    related: set[str] = set()
    for host in store.page_hosts[concept_id]:
        related.update(store.pages[host])
    return related


def _grouped_concepts(store: TaxonomyStore, concept_id: str) -> set[str]:
    """Concepts sharing at least one major group with `concept_id`."""
    related: set[str] = set()
    for gid in store.concept_groups[concept_id]:
        for occ in store.group_occupations[gid]:
            related.update(store.pages[occ])
    return related


def _entries_for(store: TaxonomyStore, concept_ids, exclude: Entry) -> list[Entry]:
    out: list[Entry] = []
    for cid in sorted(concept_ids):
        for lang in store.entry_languages[cid]:
            entry = (cid, lang)
            if entry != exclude:
                out.append(entry)
    return out


def sample_anchor(store: TaxonomyStore, rng: np.random.Generator) -> Entry:
    """Uniform draw over all (concept, language) description entries."""
    if not store.entries:
        raise EmptyCorpus("store has no nonempty description entries")
    return store.entries[int(rng.integers(len(store.entries)))]


def sample_partner(
    store: TaxonomyStore,
    anchor: Entry,
    relation: Relation,
    rng: np.random.Generator,
    strict: bool = True,
    max_retries: int = 64,
) -> Entry:
    """Draw a partner entry for `anchor` under the given relation.

    Raises DegenerateRelation when no eligible partner exists (for random,
    when the rejection budget is exhausted).
    """
    _require_entry(store, anchor)
    anchor_id, _ = anchor

    if relation is Relation.LINKED:
        hosts = sorted(store.page_hosts[anchor_id])
        if not hosts:
            raise DegenerateRelation(f"{anchor_id!r} is on no occupation page")
        owner = hosts[int(rng.integers(len(hosts)))]
        candidates = _entries_for(store, store.pages[owner], exclude=anchor)
        if not candidates:
            raise DegenerateRelation(f"occupation page of {owner!r} has no other entries")
        return candidates[int(rng.integers(len(candidates)))]

    if relation is Relation.GROUPED:
        eligible = _grouped_concepts(store, anchor_id)
        if strict:
            eligible -= _linked_concepts(store, anchor_id)
        if not eligible:
            raise DegenerateRelation(f"{anchor_id!r} has no grouped partners")
        candidates = _entries_for(store, eligible, exclude=anchor)
        if not candidates:
            raise DegenerateRelation(f"{anchor_id!r} has no grouped partner entries")
        return candidates[int(rng.integers(len(candidates)))]

    # Random: uniform over all entries; strict mode rejects entries that
    # would also qualify as linked or grouped.
    grouped = _grouped_concepts(store, anchor_id) if strict else set()
    linked = _linked_concepts(store, anchor_id) if strict else set()
    for _ in range(max_retries):
        partner = store.entries[int(rng.integers(len(store.entries)))]
        if partner == anchor:
            continue
        if strict and (partner[0] in grouped or partner[0] in linked):
            continue
        return partner
    raise DegenerateRelation(f"no random partner for {anchor_id!r} within {max_retries} retries")


def sample_pair(store: TaxonomyStore, config: SamplerConfig, rng: np.random.Generator) -> PairSample:
    """Draw one labeled pair; relations have probability exactly 1/3 each.

    A relation that is degenerate for the drawn anchor is excluded and the
    relation redrawn; the anchor itself is redrawn only once all three
    relations have failed for it.
    """
    if not store.entries:
        raise EmptyCorpus("store has no nonempty description entries")
    for _ in range(config.max_retries):
        anchor = sample_anchor(store, rng)
        available = [Relation.RANDOM, Relation.LINKED, Relation.GROUPED]
        while available:
            relation = available.pop(int(rng.integers(len(available))))
            try:
                partner = sample_partner(
                    store,
                    anchor,
                    relation,
                    rng,
                    strict=config.strict_disjoint_random,
                    max_retries=config.max_retries,
                )
            except DegenerateRelation:
                continue
            return PairSample(anchor=anchor, partner=partner, relation=relation)
    raise ExhaustedRetries(f"no samplable pair after {config.max_retries} anchors")


def verify_relation(store: TaxonomyStore, pair: PairSample) -> Relation:
    """Strongest true relation of a pair, by exhaustive graph inspection.

    Precedence is linked > grouped > random: a linked pair always shares the
    linking occupation's major group, so linked wins where both hold.
    """
    _require_entry(store, pair.anchor)
    _require_entry(store, pair.partner)
    anchor_id, partner_id = pair.anchor[0], pair.partner[0]
    if store.page_hosts[anchor_id] & store.page_hosts[partner_id]:
        return Relation.LINKED
    if store.concept_groups[anchor_id] & store.concept_groups[partner_id]:
        return Relation.GROUPED
    return Relation.RANDOM


def pair_to_json(pair: PairSample) -> dict:
    return {
        "anchor_id": pair.anchor[0],
        "anchor_lang": pair.anchor[1],
        "partner_id": pair.partner[0],
        "partner_lang": pair.partner[1],
        "relation": pair.relation.wire_name,
    }


def pair_from_json(obj: dict) -> PairSample:
    return PairSample(
        anchor=(obj["anchor_id"], obj["anchor_lang"]),
        partner=(obj["partner_id"], obj["partner_lang"]),
        relation=Relation.from_wire(obj["relation"]),
    )
