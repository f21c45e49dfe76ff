"""Exception hierarchy shared across the toolkit.

Everything user-facing derives from :class:`TaxolmError`. ``InputError``
subclasses mark problems with user-supplied data or arguments (the CLI maps
them to exit code 2); the remaining errors are runtime failures (exit code 1).
"""

from __future__ import annotations


class TaxolmError(Exception):
    """Base class for all toolkit errors."""


class InputError(TaxolmError):
    """Invalid user input: bad files, bad ids, bad arguments."""


class SchemaError(InputError):
    """A taxonomy record is missing a field, mistyped, or malformed.

    Carries the 1-based JSONL line number when known.
    """

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DuplicateId(SchemaError):
    """The same concept_id or group_id occurs more than once."""


class DanglingReference(SchemaError):
    """A record references an id that does not resolve to the right kind."""


class UnknownId(InputError):
    """A lookup id is not present in the store."""


class KindError(InputError):
    """An id resolves to a concept of the wrong kind for the operation."""


class EmptyCorpus(InputError):
    """No usable description entries (or no vocabulary tokens) exist."""


class DegenerateRelation(TaxolmError):
    """No eligible partner exists for the requested relation and anchor."""


class ExhaustedRetries(TaxolmError):
    """Pair sampling failed for every relation across the retry budget."""


class DegenerateInput(InputError):
    """A pair-input segment is empty after tokenization."""


class ShapeError(InputError):
    """A model input violates the configured shapes or id range."""


class NonFiniteGradient(TaxolmError):
    """Backpropagation produced a NaN or infinite gradient."""


class ScheduleExhausted(TaxolmError):
    """An optimizer step was requested beyond the configured total."""


class MalformedTag(InputError):
    """A sequence-labeling tag string is not O, B-<label>, or I-<label>."""


class LengthMismatch(InputError):
    """Parallel gold/prediction structures differ in length."""


class EmptyInput(InputError):
    """A metric was invoked on an empty collection."""
