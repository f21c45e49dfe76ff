"""Word-level vocabulary, encoding, and paired-segment input assembly.

The tokenizer lowercases and splits on whitespace and punctuation
boundaries; out-of-vocabulary tokens map to UNK. It is deliberately a plain
word-level scheme: subword tokenizers can be substituted behind the same
encode/decode surface without touching downstream modules.
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass

from .errors import DegenerateInput, EmptyCorpus
from .taxonomy import TaxonomyStore

CLS_ID = 0
SEP_ID = 1
PAD_ID = 2
MASK_ID = 3
UNK_ID = 4

SPECIAL_TOKENS = ("<cls>", "<sep>", "<pad>", "<mask>", "<unk>")
NUM_SPECIALS = len(SPECIAL_TOKENS)
FIRST_CONTENT_ID = NUM_SPECIALS

_TOKEN_RE = re.compile(r"\w+|[^\w\s]")


def tokenize(text: str) -> list[str]:
    """Lowercase and split into word / single-punctuation tokens."""
    return _TOKEN_RE.findall(text.lower())


@dataclass(frozen=True)
class Vocab:
    """Token/id bijection with five reserved special ids."""

    id_to_token: tuple[str, ...]
    token_to_id: dict[str, int]

    @property
    def size(self) -> int:
        return len(self.id_to_token)

    def encode(self, text: str) -> list[int]:
        """Token ids for normalized text; OOV tokens become UNK."""
        return [self.token_to_id.get(tok, UNK_ID) for tok in tokenize(text)]

    def decode(self, ids: list[int]) -> list[str]:
        return [self.id_to_token[i] for i in ids]


def _vocab_from_tokens(tokens: list[str]) -> Vocab:
    id_to_token = SPECIAL_TOKENS + tuple(tokens)
    return Vocab(
        id_to_token=id_to_token,
        token_to_id={tok: i for i, tok in enumerate(id_to_token)},
    )


def instance_text(store: TaxonomyStore, concept_id: str, language: str) -> str:
    """Concept label concatenated with its description, single space between."""
    rec = store.concepts[concept_id]
    label = rec.preferred_label.get(language, "")
    description = rec.description.get(language, "")
    return f"{label} {description}".strip()


def build_vocab(store: TaxonomyStore, min_freq: int = 1) -> Vocab:
    """Count tokens over every description entry's label+description text.

    Tokens with frequency >= min_freq are kept, ordered by frequency
    descending then lexicographically, after the five reserved specials.
    """
    if min_freq < 1:
        raise ValueError("min_freq must be >= 1")
    counts: Counter[str] = Counter()
    for cid, lang in store.entries:
        counts.update(tokenize(instance_text(store, cid, lang)))
    kept = sorted(
        (tok for tok, freq in counts.items() if freq >= min_freq),
        key=lambda tok: (-counts[tok], tok),
    )
    if not kept:
        raise EmptyCorpus("no tokens reach min_freq over the description corpus")
    return _vocab_from_tokens(kept)


def save_vocab(vocab: Vocab, path: str) -> None:
    """One non-special token per line; line number = id - number of specials."""
    with open(path, "w", encoding="utf-8") as handle:
        for tok in vocab.id_to_token[NUM_SPECIALS:]:
            handle.write(tok + "\n")


def load_vocab(path: str) -> Vocab:
    with open(path, encoding="utf-8") as handle:
        tokens = [line.rstrip("\n") for line in handle if line.rstrip("\n")]
    return _vocab_from_tokens(tokens)


@dataclass(frozen=True)
class TokenSequence:
    """A paired-segment input: CLS, segment A, SEP, segment B, SEP.

    segment_boundary is the index of the first token of segment B.
    """

    ids: tuple[int, ...]
    segment_boundary: int

    def __post_init__(self):
        if not self.ids or self.ids[0] != CLS_ID:
            raise ValueError("sequence must start with CLS")
        if self.ids[-1] != SEP_ID or sum(1 for i in self.ids if i == SEP_ID) != 2:
            raise ValueError("sequence must contain exactly two SEP tokens, one terminal")
        if not 0 < self.segment_boundary < len(self.ids):
            raise ValueError("segment boundary out of range")

    def __len__(self) -> int:
        return len(self.ids)


def _split_budget(len_a: int, len_b: int, budget: int) -> tuple[int, int]:
    # Segment A gets the odd leftover token; a segment's unused budget is
    # transferred to the other before tail truncation.
    budget_b = budget // 2
    budget_a = budget - budget_b
    if len_a < budget_a:
        budget_b += budget_a - len_a
    elif len_b < budget_b:
        budget_a += budget_b - len_b
    return min(len_a, budget_a), min(len_b, budget_b)


def pair_sequence(ids_a: list[int], ids_b: list[int], max_len: int) -> TokenSequence:
    """Assemble CLS + A + SEP + B + SEP from pre-encoded segments."""
    if max_len < 8:
        raise ValueError("max_len must be >= 8")
    if not ids_a or not ids_b:
        raise DegenerateInput("both pair segments must be nonempty after encoding")
    take_a, take_b = _split_budget(len(ids_a), len(ids_b), max_len - 3)
    ids = (CLS_ID, *ids_a[:take_a], SEP_ID, *ids_b[:take_b], SEP_ID)
    return TokenSequence(ids=ids, segment_boundary=take_a + 2)


def build_pair_input(
    vocab: Vocab,
    label_a: str,
    desc_a: str,
    label_b: str,
    desc_b: str,
    max_len: int,
) -> TokenSequence:
    """Encode two label+description segments into one paired input.

    The token budget (max_len - 3) is split evenly between the segments;
    surplus from a short segment goes to the other, and overlong segments
    are tail-truncated. CLS and both SEP markers always survive.
    """
    ids_a = vocab.encode(f"{label_a} {desc_a}")
    ids_b = vocab.encode(f"{label_b} {desc_b}")
    return pair_sequence(ids_a, ids_b, max_len)
