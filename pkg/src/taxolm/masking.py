"""Dynamic masked-language-modeling corruption.

The selection pattern is regenerated on every call, so feeding the same
sequence twice with an advancing generator yields different corruptions.
Positions holding special ids (CLS/SEP/PAD/MASK/UNK, all ids below
FIRST_CONTENT_ID) are never selected and never used as random replacements.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .sampler import Relation
from .tokenizer import FIRST_CONTENT_ID, MASK_ID, TokenSequence, Vocab

IGNORE_INDEX = -100


@dataclass(frozen=True)
class MaskingPolicy:
    """Selection rate plus the mask/random/keep replacement mix."""

    select_rate: float = 0.15
    mask_frac: float = 0.8
    random_frac: float = 0.1
    keep_frac: float = 0.1

    def __post_init__(self):
        if not 0.0 < self.select_rate < 1.0:
            raise ValueError("select_rate must be in (0, 1)")
        if abs(self.mask_frac + self.random_frac + self.keep_frac - 1.0) > 1e-9:
            raise ValueError("mask/random/keep fractions must sum to 1")
        if min(self.mask_frac, self.random_frac, self.keep_frac) < 0.0:
            raise ValueError("replacement fractions must be nonnegative")


@dataclass(frozen=True)
class MaskedInstance:
    """A corrupted input with per-position restoration labels.

    mlm_labels holds the original id at selected positions and IGNORE_INDEX
    (-100) everywhere else; overwriting input_ids at labeled positions with
    mlm_labels recovers the uncorrupted sequence.
    """

    input_ids: np.ndarray
    mlm_labels: np.ndarray
    erp_label: Relation
    boundary: int


def mask_sequence(
    seq: TokenSequence,
    vocab: Vocab,
    policy: MaskingPolicy,
    rng: np.random.Generator,
    erp_label: Relation,
) -> MaskedInstance:
    """Corrupt one sequence: select each content position independently with
    probability select_rate, then mask / randomize / keep selected positions
    in the configured proportions.

    A draw that selects zero positions is legal; the instance simply
    contributes no MLM loss.
    """
    if vocab.size <= FIRST_CONTENT_ID:
        raise ValueError("vocab needs at least one non-special token")
    ids = np.asarray(seq.ids, dtype=np.int64)
    selectable = ids >= FIRST_CONTENT_ID

    selected = (rng.random(ids.shape) < policy.select_rate) & selectable
    action = rng.random(ids.shape)

    labels = np.where(selected, ids, IGNORE_INDEX)
    corrupted = ids.copy()
    mask_here = selected & (action < policy.mask_frac)
    random_here = selected & (action >= policy.mask_frac) & (action < policy.mask_frac + policy.random_frac)
    corrupted[mask_here] = MASK_ID
    n_random = int(random_here.sum())
    if n_random:
        corrupted[random_here] = rng.integers(FIRST_CONTENT_ID, vocab.size, size=n_random)

    return MaskedInstance(
        input_ids=corrupted,
        mlm_labels=labels,
        erp_label=erp_label,
        boundary=seq.segment_boundary,
    )


def instance_to_json(instance: MaskedInstance) -> dict:
    return {
        "input_ids": [int(i) for i in instance.input_ids],
        "mlm_labels": [int(i) for i in instance.mlm_labels],
        "erp_label": int(instance.erp_label),
        "boundary": instance.boundary,
    }


def instance_from_json(obj: dict) -> MaskedInstance:
    return MaskedInstance(
        input_ids=np.asarray(obj["input_ids"], dtype=np.int64),
        mlm_labels=np.asarray(obj["mlm_labels"], dtype=np.int64),
        erp_label=Relation(obj["erp_label"]),
        boundary=int(obj["boundary"]),
    )
