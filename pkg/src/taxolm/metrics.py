"""Evaluation suite: BIO span decoding, entity- and surface-level span-F1,
span-length bucket analysis, unique-entity ratio, MRR, and weighted macro-F1.

Sequence-labeling data is two-column UTF-8 text (token and tag separated by
a tab or whitespace run, blank line between sentences; when a line carries
more columns, the first is the token and the last is the tag). Gold and
prediction files are parallel. All metrics are corpus-level, deterministic,
and invariant under sentence reordering.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import EmptyInput, LengthMismatch, MalformedTag

BUCKETS = ("1-2", "3-4", "5-6", "7-8", "9-10")
OVERFLOW_BUCKET = "11+"


@dataclass(frozen=True)
class LabeledSpan:
    """A labeled token span; start inclusive, end exclusive."""

    start: int
    end: int
    label: str
    surface: str

    def __post_init__(self):
        if not 0 <= self.start < self.end:
            raise ValueError("span must satisfy 0 <= start < end")
        if not self.surface:
            raise ValueError("span surface must be nonempty")

    @property
    def length(self) -> int:
        return self.end - self.start


def _parse_tag(tag: str) -> tuple[str, str | None]:
    if tag == "O":
        return "O", None
    if len(tag) > 2 and tag[1] == "-" and tag[0] in ("B", "I"):
        return tag[0], tag[2:]
    raise MalformedTag(f"cannot parse tag {tag!r}")


def decode_bio(tags: Sequence[str], tokens: Sequence[str]) -> list[LabeledSpan]:
    """Decode BIO tags into spans.

    Maximal B-I runs with a consistent label become spans. A dangling I-X
    (not preceded by B-X or I-X) opens a new span, matching conlleval's
    repair behavior; a label change always closes the open span.
    """
    if len(tags) != len(tokens):
        raise LengthMismatch(f"{len(tags)} tags for {len(tokens)} tokens")
    spans: list[LabeledSpan] = []
    start = None
    label = None

    def close(end: int) -> None:
        nonlocal start, label
        if start is not None:
            spans.append(
                LabeledSpan(start=start, end=end, label=label, surface=" ".join(tokens[start:end]))
            )
        start, label = None, None

    for i, tag in enumerate(tags):
        marker, tag_label = _parse_tag(tag)
        if marker == "O":
            close(i)
        elif marker == "B" or tag_label != label:
            close(i)
            start, label = i, tag_label
    close(len(tags))
    return spans


def _prf(tp: int, n_pred: int, n_gold: int) -> dict[str, float]:
    if n_gold == 0 and n_pred == 0:
        return {"precision": 1.0, "recall": 1.0, "f1": 1.0}
    precision = tp / n_pred if n_pred else 0.0
    recall = tp / n_gold if n_gold else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return {"precision": precision, "recall": recall, "f1": f1}


def _check_parallel(gold: Sequence, pred: Sequence) -> None:
    if len(gold) != len(pred):
        raise LengthMismatch(f"{len(gold)} gold sentences vs {len(pred)} predicted")


def entity_span_f1(
    gold: Sequence[Sequence[LabeledSpan]], pred: Sequence[Sequence[LabeledSpan]]
) -> dict[str, float]:
    """Exact-match span P/R/F1: a prediction is correct iff the same
    (start, end, label) span exists in the same sentence."""
    _check_parallel(gold, pred)
    tp = n_gold = n_pred = 0
    for gold_spans, pred_spans in zip(gold, pred):
        gold_keys = {(s.start, s.end, s.label) for s in gold_spans}
        pred_keys = {(s.start, s.end, s.label) for s in pred_spans}
        tp += len(gold_keys & pred_keys)
        n_gold += len(gold_keys)
        n_pred += len(pred_keys)
    return _prf(tp, n_pred, n_gold)


def surface_span_f1(
    gold: Sequence[Sequence[LabeledSpan]], pred: Sequence[Sequence[LabeledSpan]]
) -> dict[str, float]:
    """Span-F1 over unique (surface, label) types across the whole corpus.

    Rewards recognizing a diverse range of entities instead of repeatedly
    catching the most frequent surface forms. Deduplication is
    case-sensitive and label-qualified.
    """
    _check_parallel(gold, pred)
    gold_types = {(s.surface, s.label) for spans in gold for s in spans}
    pred_types = {(s.surface, s.label) for spans in pred for s in spans}
    tp = len(gold_types & pred_types)
    return _prf(tp, len(pred_types), len(gold_types))


def bucket_of(length: int) -> str:
    if length > 10:
        return OVERFLOW_BUCKET
    return BUCKETS[(length - 1) // 2]


def bucket_f1(
    gold: Sequence[Sequence[LabeledSpan]], pred: Sequence[Sequence[LabeledSpan]]
) -> dict[str, float]:
    """Per-length-bucket F1 over gold span lengths 1-2 .. 9-10 plus an 11+
    overflow bucket. Matched predictions are credited to the bucket of the
    matched gold span; unmatched predictions to the bucket of their own
    length. Buckets with no gold and no predicted mass are omitted."""
    _check_parallel(gold, pred)
    tp: dict[str, int] = {}
    n_gold: dict[str, int] = {}
    n_pred: dict[str, int] = {}
    for gold_spans, pred_spans in zip(gold, pred):
        gold_keys = {(s.start, s.end, s.label): s for s in gold_spans}
        pred_keys = {(s.start, s.end, s.label): s for s in pred_spans}
        for key, span in gold_keys.items():
            bucket = bucket_of(span.length)
            n_gold[bucket] = n_gold.get(bucket, 0) + 1
            if key in pred_keys:
                tp[bucket] = tp.get(bucket, 0) + 1
        for key, span in pred_keys.items():
            if key in gold_keys:
                bucket = bucket_of(gold_keys[key].length)
            else:
                bucket = bucket_of(span.length)
            n_pred[bucket] = n_pred.get(bucket, 0) + 1
    out: dict[str, float] = {}
    for bucket in (*BUCKETS, OVERFLOW_BUCKET):
        if n_gold.get(bucket, 0) or n_pred.get(bucket, 0):
            out[bucket] = _prf(tp.get(bucket, 0), n_pred.get(bucket, 0), n_gold.get(bucket, 0))["f1"]
    return out


def unique_entity_ratio(spans: Sequence[LabeledSpan]) -> float:
    """|unique (surface, label) types| / |spans|; 1.0 means all unique."""
    if not spans:
        raise EmptyInput("no spans to measure")
    types = {(s.surface, s.label) for s in spans}
    return len(types) / len(spans)


def mrr(rankings: Sequence[Sequence[str]], gold: Sequence[Iterable[str]]) -> float:
    """Mean reciprocal rank of the first relevant candidate per query.

    Queries whose ranking contains no relevant candidate contribute 0.
    """
    _check_parallel(rankings, gold)
    if not rankings:
        raise EmptyInput("no queries")
    total = 0.0
    for candidates, relevant in zip(rankings, gold):
        if not candidates:
            raise EmptyInput("every query needs at least one candidate")
        relevant_set = set(relevant)
        for rank, candidate in enumerate(candidates, start=1):
            if candidate in relevant_set:
                total += 1.0 / rank
                break
    return total / len(rankings)


def weighted_macro_f1(gold_labels: Sequence[str], pred_labels: Sequence[str]) -> float:
    """Per-class F1 weighted by gold support, summed over classes."""
    if len(gold_labels) != len(pred_labels):
        raise LengthMismatch(f"{len(gold_labels)} gold labels vs {len(pred_labels)} predicted")
    if not gold_labels:
        raise EmptyInput("no labels")
    classes = sorted(set(gold_labels))
    total = len(gold_labels)
    score = 0.0
    for cls in classes:
        tp = sum(1 for g, p in zip(gold_labels, pred_labels) if g == cls and p == cls)
        n_gold = sum(1 for g in gold_labels if g == cls)
        n_pred = sum(1 for p in pred_labels if p == cls)
        precision = tp / n_pred if n_pred else 0.0
        recall = tp / n_gold
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        score += (n_gold / total) * f1
    return score


@dataclass
class EvalReport:
    """Metric bundle for one evaluation run; unused sections stay None."""

    entity_f1: dict[str, float] | None = None
    surface_f1: dict[str, float] | None = None
    bucket_f1: dict[str, float | None] | None = None
    overflow_bucket_f1: float | None = None
    unique_entity_ratio: float | None = None
    mrr: float | None = None
    weighted_macro_f1: float | None = None

    def to_json(self) -> dict:
        out: dict = {}
        if self.entity_f1 is not None:
            out["entity_f1"] = self.entity_f1
        if self.surface_f1 is not None:
            out["surface_f1"] = self.surface_f1
        if self.bucket_f1 is not None:
            out["bucket_f1"] = self.bucket_f1
            out["overflow_bucket_f1"] = self.overflow_bucket_f1
        if self.unique_entity_ratio is not None:
            out["unique_entity_ratio"] = self.unique_entity_ratio
        if self.mrr is not None:
            out["mrr"] = self.mrr
        if self.weighted_macro_f1 is not None:
            out["weighted_macro_f1"] = self.weighted_macro_f1
        return out

    def table(self) -> str:
        rows: list[tuple[str, str]] = []
        if self.entity_f1 is not None:
            for key in ("precision", "recall", "f1"):
                rows.append((f"entity span {key}", f"{self.entity_f1[key]:.4f}"))
        if self.surface_f1 is not None:
            for key in ("precision", "recall", "f1"):
                rows.append((f"surface span {key}", f"{self.surface_f1[key]:.4f}"))
        if self.bucket_f1 is not None:
            for bucket in BUCKETS:
                value = self.bucket_f1.get(bucket)
                rows.append((f"bucket {bucket} f1", "-" if value is None else f"{value:.4f}"))
            if self.overflow_bucket_f1 is not None:
                rows.append((f"bucket {OVERFLOW_BUCKET} f1", f"{self.overflow_bucket_f1:.4f}"))
        if self.unique_entity_ratio is not None:
            rows.append(("unique entity ratio", f"{self.unique_entity_ratio:.4f}"))
        if self.mrr is not None:
            rows.append(("mrr", f"{self.mrr:.4f}"))
        if self.weighted_macro_f1 is not None:
            rows.append(("weighted macro f1", f"{self.weighted_macro_f1:.4f}"))
        width = max(len(name) for name, _ in rows) if rows else 0
        return "\n".join(f"{name.ljust(width)}  {value}" for name, value in rows)


def sequence_report(
    gold: Sequence[Sequence[LabeledSpan]], pred: Sequence[Sequence[LabeledSpan]]
) -> EvalReport:
    """Full span-level report over parallel gold/predicted corpora."""
    buckets = bucket_f1(gold, pred)
    flat_gold = [s for spans in gold for s in spans]
    return EvalReport(
        entity_f1=entity_span_f1(gold, pred),
        surface_f1=surface_span_f1(gold, pred),
        bucket_f1={b: buckets.get(b) for b in BUCKETS},
        overflow_bucket_f1=buckets.get(OVERFLOW_BUCKET),
        unique_entity_ratio=unique_entity_ratio(flat_gold) if flat_gold else None,
    )


def read_bio_file(path: str) -> list[tuple[list[str], list[str]]]:
    """Read two-column token/tag text; returns (tokens, tags) per sentence."""
    sentences: list[tuple[list[str], list[str]]] = []
    tokens: list[str] = []
    tags: list[str] = []
    with open(path, encoding="utf-8") as handle:
        for line_no, raw in enumerate(handle, start=1):
            line = raw.strip()
            if not line:
                if tokens:
                    sentences.append((tokens, tags))
                    tokens, tags = [], []
                continue
            fields = line.split()
            if len(fields) < 2:
                raise MalformedTag(f"{path}:{line_no}: expected token and tag, got {line!r}")
            tokens.append(fields[0])
            tags.append(fields[-1])
    if tokens:
        sentences.append((tokens, tags))
    return sentences


def spans_from_bio_file(path: str) -> list[list[LabeledSpan]]:
    return [decode_bio(tags, tokens) for tokens, tags in read_bio_file(path)]


def read_label_file(path: str, key: str) -> list:
    """Read one JSON object per line, extracting `key` from each."""
    out = []
    with open(path, encoding="utf-8") as handle:
        for line_no, raw in enumerate(handle, start=1):
            if not raw.strip():
                continue
            try:
                obj = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise MalformedTag(f"{path}:{line_no}: invalid JSON: {exc.msg}") from exc
            if not isinstance(obj, dict) or key not in obj:
                raise MalformedTag(f"{path}:{line_no}: expected an object with {key!r}")
            out.append(obj[key])
    return out
