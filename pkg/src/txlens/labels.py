"""The five credit transaction classes, in canonical order."""

from __future__ import annotations

import enum


class ClassLabel(enum.Enum):
    """Output classes of the credit classifier.

    Declaration order is the canonical order used everywhere a fixed
    ordering matters: probability vectors, confusion-matrix axes, and
    argmax tie-breaking.
    """

    FUNDING = "FUNDING"
    INCOME_INVOICE = "INCOME_INVOICE"
    INCOME_CASH = "INCOME_CASH"
    INCOME_CHEQUE = "INCOME_CHEQUE"
    OTHER = "OTHER"

    @property
    def index(self) -> int:
        return _INDEX[self]

    @property
    def wire_key(self) -> str:
        """Snake-case key used in probability payloads (e.g. ``income_cash``)."""
        return self.value.lower()

    @classmethod
    def from_name(cls, name: str) -> "ClassLabel":
        try:
            return cls[name.strip().upper()]
        except KeyError:
            raise ValueError(f"unknown class label {name!r}") from None


CLASS_ORDER: tuple[ClassLabel, ...] = tuple(ClassLabel)
N_CLASSES = len(CLASS_ORDER)
_INDEX = {label: i for i, label in enumerate(CLASS_ORDER)}
