"""Feature engineering: fitted schema plus deterministic vectorization.

Every transaction becomes a fixed-width dense vector laid out as
``[bank one-hot | industry one-hot | amount | year | month one-hot | day | text]``.
The text block is a hashed bag of words so the schema never stores a token
vocabulary.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .ingest import EnrichedTransaction

MIN_TEXT_DIM = 8
DEFAULT_TEXT_DIM = 64

# Group names in vector order; the spans of a vector partition it in this order.
FEATURE_GROUPS = ("bank", "industry", "amount", "year", "month", "day", "text")

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = (1 << 64) - 1

_TOKEN_SPLIT = re.compile(r"[^a-z0-9]+")


def clean_tokenize(description: str) -> list[str]:
    """Lowercase and split on non-alphanumeric runs; digit tokens survive."""
    return [t for t in _TOKEN_SPLIT.split(description.lower()) if t]


def fnv1a64(data: bytes) -> int:
    """64-bit FNV-1a. Stable across platforms, unlike the builtin hash."""
    h = _FNV_OFFSET
    for byte in data:
        h = ((h ^ byte) * _FNV_PRIME) & _MASK64
    return h


def text_vector(tokens: Sequence[str], dim: int) -> np.ndarray:
    """Hashed bag of words, L2-normalized unless empty."""
    if dim < MIN_TEXT_DIM:
        raise ValueError(f"text_dim must be at least {MIN_TEXT_DIM}, got {dim}")
    vec = np.zeros(dim, dtype=np.float64)
    for token in tokens:
        vec[fnv1a64(token.encode("utf-8")) % dim] += 1.0
    norm = float(np.sqrt(vec @ vec))
    if norm > 0.0:
        vec /= norm
    return vec


def one_hot(value: str, vocab: Sequence[str]) -> np.ndarray:
    """0/1 vector of length |vocab|+1; unknown values hit the trailing slot."""
    vec = np.zeros(len(vocab) + 1, dtype=np.float64)
    try:
        vec[list(vocab).index(value)] = 1.0
    except ValueError:
        vec[-1] = 1.0
    return vec


@dataclass(frozen=True)
class Scaler:
    minimum: float
    maximum: float

    def __post_init__(self):
        if self.maximum < self.minimum:
            raise ValueError(f"scaler range inverted: {self.minimum} > {self.maximum}")

    @classmethod
    def fit(cls, values: Iterable[float]) -> "Scaler":
        values = list(values)
        if not values:
            raise ValueError("cannot fit scaler on no values")
        return cls(min(values), max(values))

    def apply(self, x: float) -> float:
        if self.maximum == self.minimum:
            return 0.0
        scaled = (x - self.minimum) / (self.maximum - self.minimum)
        return min(1.0, max(0.0, scaled))


# Day of month has a fixed natural range; never fitted.
DAY_SCALER = Scaler(0.0, 31.0)

_MONTH_SLOTS = 12


@dataclass(frozen=True)
class FeatureSchema:
    bank_vocab: tuple[str, ...]
    industry_vocab: tuple[str, ...]
    amount_scaler: Scaler
    year_scaler: Scaler
    text_dim: int
    version: int = 1

    def __post_init__(self):
        if len(set(self.bank_vocab)) != len(self.bank_vocab):
            raise ValueError("bank_vocab has duplicates")
        if len(set(self.industry_vocab)) != len(self.industry_vocab):
            raise ValueError("industry_vocab has duplicates")
        if self.text_dim < MIN_TEXT_DIM:
            raise ValueError(f"text_dim must be at least {MIN_TEXT_DIM}, got {self.text_dim}")
        if self.version < 1:
            raise ValueError("schema version must be positive")

    @property
    def group_sizes(self) -> dict[str, int]:
        return {
            "bank": len(self.bank_vocab) + 1,
            "industry": len(self.industry_vocab) + 1,
            "amount": 1,
            "year": 1,
            "month": _MONTH_SLOTS,
            "day": 1,
            "text": self.text_dim,
        }

    @property
    def group_index(self) -> dict[str, tuple[int, int]]:
        """Half-open [start, stop) span per group, in vector order."""
        spans: dict[str, tuple[int, int]] = {}
        offset = 0
        for name in FEATURE_GROUPS:
            size = self.group_sizes[name]
            spans[name] = (offset, offset + size)
            offset += size
        return spans

    @property
    def length(self) -> int:
        return sum(self.group_sizes.values())


@dataclass(frozen=True)
class FeatureVector:
    sha: str
    values: np.ndarray
    group_index: Mapping[str, tuple[int, int]]
    schema_version: int

    def group_values(self, group: str) -> np.ndarray:
        start, stop = self.group_index[group]
        return self.values[start:stop]


def fit_schema(dataset: Sequence[EnrichedTransaction], text_dim: int = DEFAULT_TEXT_DIM,
               version: int = 1) -> FeatureSchema:
    """Fit vocabularies and scalers on training data. Deterministic: sorted
    distinct categorical values, min/max numeric ranges."""
    if not dataset:
        raise ValueError("cannot fit schema on an empty dataset")
    return FeatureSchema(
        bank_vocab=tuple(sorted({tx.bank for tx in dataset})),
        industry_vocab=tuple(sorted({tx.industry for tx in dataset})),
        amount_scaler=Scaler.fit(tx.raw.amount for tx in dataset),
        year_scaler=Scaler.fit(float(tx.raw.date.year) for tx in dataset),
        text_dim=text_dim,
        version=version,
    )


def build_feature_vector(tx: EnrichedTransaction, schema: FeatureSchema) -> FeatureVector:
    """Pure transform of one transaction under a fitted schema. OOV categories
    and out-of-range numerics are absorbed, so this never fails."""
    month = np.zeros(_MONTH_SLOTS, dtype=np.float64)
    month[tx.raw.date.month - 1] = 1.0
    values = np.concatenate([
        one_hot(tx.bank, schema.bank_vocab),
        one_hot(tx.industry, schema.industry_vocab),
        [schema.amount_scaler.apply(tx.raw.amount)],
        [schema.year_scaler.apply(float(tx.raw.date.year))],
        month,
        [DAY_SCALER.apply(float(tx.raw.date.day))],
        text_vector(clean_tokenize(tx.raw.description), schema.text_dim),
    ])
    return FeatureVector(
        sha=tx.raw.sha,
        values=values,
        group_index=schema.group_index,
        schema_version=schema.version,
    )


# --------------------------------------------------------------------------
# Persistence
# --------------------------------------------------------------------------

def schema_to_json(schema: FeatureSchema) -> str:
    return json.dumps({
        "version": schema.version,
        "bank_vocab": list(schema.bank_vocab),
        "industry_vocab": list(schema.industry_vocab),
        "amount_scaler": {"min": schema.amount_scaler.minimum,
                          "max": schema.amount_scaler.maximum},
        "year_scaler": {"min": schema.year_scaler.minimum,
                        "max": schema.year_scaler.maximum},
        "text_dim": schema.text_dim,
    }, indent=2)


def schema_from_json(text: str) -> FeatureSchema:
    doc = json.loads(text)
    return FeatureSchema(
        bank_vocab=tuple(doc["bank_vocab"]),
        industry_vocab=tuple(doc["industry_vocab"]),
        amount_scaler=Scaler(doc["amount_scaler"]["min"], doc["amount_scaler"]["max"]),
        year_scaler=Scaler(doc["year_scaler"]["min"], doc["year_scaler"]["max"]),
        text_dim=int(doc["text_dim"]),
        version=int(doc["version"]),
    )


def vector_to_record(fv: FeatureVector) -> dict:
    return {
        "sha": fv.sha,
        "schema_version": fv.schema_version,
        "values": [float(v) for v in fv.values],
        "group_index": {name: list(span) for name, span in fv.group_index.items()},
    }


def vector_from_record(record: Mapping) -> FeatureVector:
    return FeatureVector(
        sha=record["sha"],
        values=np.asarray(record["values"], dtype=np.float64),
        group_index={name: (int(a), int(b))
                     for name, (a, b) in record["group_index"].items()},
        schema_version=int(record["schema_version"]),
    )


def vectors_to_jsonl(vectors: Iterable[FeatureVector]) -> str:
    lines = [json.dumps(vector_to_record(fv), sort_keys=True) for fv in vectors]
    return "\n".join(lines) + ("\n" if lines else "")


def vectors_from_jsonl(text: str) -> list[FeatureVector]:
    return [vector_from_record(json.loads(line))
            for line in text.splitlines() if line.strip()]
