"""Three-valued Kleene logic.

Values are encoded as small integers so that the logical order is the
numeric order: ``FALSE=0 < MAYBE=1 < TRUE=2``. Conjunction is ``min``,
disjunction is ``max`` and negation is ``2 - x``. The same encoding is
used for the numpy arrays inside logical structures.
"""
from __future__ import annotations

from enum import IntEnum


class TruthValue(IntEnum):
    FALSE = 0
    MAYBE = 1
    TRUE = 2

    def __str__(self) -> str:
        return _TEXT[self]

    @classmethod
    def parse(cls, text: str) -> "TruthValue":
        try:
            return _BY_TEXT[text.strip()]
        except KeyError:
            raise ValueError(f"not a truth value: {text!r}") from None

    @classmethod
    def of(cls, flag: bool) -> "TruthValue":
        return cls.TRUE if flag else cls.FALSE

    @property
    def definite(self) -> bool:
        return self is not TruthValue.MAYBE


FALSE = TruthValue.FALSE
MAYBE = TruthValue.MAYBE
TRUE = TruthValue.TRUE
VALUES = (FALSE, MAYBE, TRUE)

_TEXT = {FALSE: "0", MAYBE: "1/2", TRUE: "1"}
_BY_TEXT = {v: k for k, v in _TEXT.items()}


def and_(a: TruthValue, b: TruthValue) -> TruthValue:
    return TruthValue(min(a, b))


def or_(a: TruthValue, b: TruthValue) -> TruthValue:
    return TruthValue(max(a, b))


def not_(a: TruthValue) -> TruthValue:
    return TruthValue(2 - a)


def implies(a: TruthValue, b: TruthValue) -> TruthValue:
    return or_(not_(a), b)


def info_le(a: int, b: int) -> bool:
    """Information order: ``a`` is at least as precise as ``b``."""
    return a == b or b == MAYBE


def logical_le(a: int, b: int) -> bool:
    return a <= b


def info_join(a: TruthValue, b: TruthValue) -> TruthValue:
    return TruthValue(a) if a == b else MAYBE
