"""Parsing, validation, enrichment, and synthetic generation of raw transactions.

Two wire formats are supported: the nested application JSON document
(``ApplicationId``/``BankAccounts``/``Transactions``) and the flat CSV export
with per-row customer/bank/industry context. Both produce credit transactions
keyed by a content sha.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import math
from dataclasses import dataclass, field
from datetime import date, datetime, timedelta, timezone
from typing import Iterable, Mapping, Protocol, Sequence

from .labels import CLASS_ORDER, ClassLabel

logger = logging.getLogger(__name__)


# --------------------------------------------------------------------------
# Errors
# --------------------------------------------------------------------------

class IngestError(ValueError):
    """Base class for ingest failures."""


class ParseError(IngestError):
    """Malformed document; carries the byte offset where decoding failed."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


class FieldPathError(IngestError):
    """A mandatory field is missing or invalid; carries its dotted path."""

    def __init__(self, path: str, problem: str = "missing"):
        super().__init__(f"{problem} field at {path}")
        self.path = path


class ShaConflictError(IngestError):
    """Duplicate sha with conflicting content, or duplicate within a batch."""


class CsvSchemaError(IngestError):
    """CSV header does not match the expected column set."""


class RowParseError(IngestError):
    """A CSV data row failed to parse; carries the 1-based data row number."""

    def __init__(self, row: int, problem: str):
        super().__init__(f"row {row}: {problem}")
        self.row = row


# --------------------------------------------------------------------------
# Domain types
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class RawTransaction:
    sha: str
    date: datetime
    amount: float
    description: str
    tx_type: str = "credit"


@dataclass(frozen=True)
class RawAccount:
    bank: str
    account_name: str
    account_number: str
    transactions: tuple[RawTransaction, ...]
    account_nickname: str | None = None


@dataclass(frozen=True)
class RawApplication:
    application_id: str
    industry_category: str
    bank_accounts: tuple[RawAccount, ...]

    def all_transactions(self) -> list[RawTransaction]:
        return [tx for acct in self.bank_accounts for tx in acct.transactions]


@dataclass(frozen=True)
class TransactionContext:
    """A raw transaction plus the customer/bank/industry columns of its row."""

    raw: RawTransaction
    customer_id: int
    bank: str
    industry: str


@dataclass(frozen=True)
class EnrichedTransaction:
    raw: RawTransaction
    customer_id: int
    bank: str
    industry: str
    enrichment_tags: Mapping[str, tuple[str, ...]] = field(default_factory=dict)

    @property
    def sha(self) -> str:
        return self.raw.sha


# --------------------------------------------------------------------------
# Application document (nested JSON wire format)
# --------------------------------------------------------------------------

_APP_FIELDS = ("ApplicationId", "IndustryCategory", "BankAccounts")
_ACCOUNT_FIELDS = ("Bank", "AccountName", "AccountNumber", "Transactions")
_TX_FIELDS = ("Sha", "Date", "Amount", "Description")


def _require(obj: Mapping, key: str, path: str):
    if not isinstance(obj, Mapping) or key not in obj or obj[key] is None:
        raise FieldPathError(f"{path}.{key}" if path else key)
    return obj[key]


def parse_timestamp(value, path: str = "date") -> datetime:
    if not isinstance(value, str):
        raise FieldPathError(path, "non-string date")
    text = value.strip()
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    try:
        parsed = datetime.fromisoformat(text)
    except ValueError:
        raise FieldPathError(path, f"unparseable ISO-8601 date {value!r}") from None
    if parsed.tzinfo is None:
        # Timestamps without an offset are taken as UTC.
        return parsed.replace(tzinfo=timezone.utc)
    return parsed.astimezone(timezone.utc)


def _parse_amount(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise FieldPathError(where, f"non-numeric amount {value!r}")
    amount = float(value)
    if not math.isfinite(amount):
        raise FieldPathError(where, f"non-finite amount {value!r}")
    return amount


def parse_application(document: bytes | str) -> RawApplication:
    """Parse an application document into transactions grouped by account.

    Raises :class:`ParseError` (with byte offset) on malformed JSON,
    :class:`FieldPathError` on missing/invalid mandatory fields, and
    :class:`ShaConflictError` when a sha repeats inside the document.
    """
    if isinstance(document, bytes):
        try:
            document = document.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError("invalid UTF-8", exc.start) from exc
    try:
        payload = json.loads(document)
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed document: {exc.msg}", exc.pos) from exc
    if not isinstance(payload, Mapping):
        raise ParseError("document root is not an object", 0)

    app_id = str(_require(payload, "ApplicationId", ""))
    if not app_id.strip():
        raise FieldPathError("ApplicationId", "empty")
    industry = str(_require(payload, "IndustryCategory", ""))
    accounts_raw = _require(payload, "BankAccounts", "")
    if not isinstance(accounts_raw, Sequence) or isinstance(accounts_raw, (str, bytes)):
        raise FieldPathError("BankAccounts", "non-list")
    if len(accounts_raw) == 0:
        raise IngestError("no accounts")

    seen: set[str] = set()
    accounts: list[RawAccount] = []
    for ai, acct in enumerate(accounts_raw):
        apath = f"BankAccounts[{ai}]"
        bank = str(_require(acct, "Bank", apath))
        name = str(_require(acct, "AccountName", apath))
        number = str(_require(acct, "AccountNumber", apath))
        if not number.strip():
            raise FieldPathError(f"{apath}.AccountNumber", "empty")
        nickname = acct.get("AccountNickname")
        txs_raw = _require(acct, "Transactions", apath)
        txs: list[RawTransaction] = []
        for ti, tx in enumerate(txs_raw):
            tpath = f"{apath}.Transactions[{ti}]"
            sha = str(_require(tx, "Sha", tpath))
            if sha in seen:
                raise ShaConflictError(f"duplicate sha {sha}")
            seen.add(sha)
            txs.append(RawTransaction(
                sha=sha,
                date=parse_timestamp(_require(tx, "Date", tpath), f"{tpath}.Date"),
                amount=_parse_amount(_require(tx, "Amount", tpath), f"{tpath}.Amount"),
                description=str(_require(tx, "Description", tpath)),
            ))
        accounts.append(RawAccount(
            bank=bank,
            account_name=name,
            account_number=number,
            transactions=tuple(txs),
            account_nickname=None if nickname is None else str(nickname),
        ))
    return RawApplication(app_id, industry, tuple(accounts))


def serialize_application(app: RawApplication) -> str:
    """Emit an application back in its wire format (field names bit-exact)."""
    doc = {
        "ApplicationId": app.application_id,
        "IndustryCategory": app.industry_category,
        "BankAccounts": [
            {
                "Bank": acct.bank,
                "AccountName": acct.account_name,
                "AccountNickname": acct.account_nickname,
                "AccountNumber": acct.account_number,
                "Transactions": [
                    {
                        "Sha": tx.sha,
                        "Date": tx.date.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%S"),
                        "Amount": tx.amount,
                        "Description": tx.description,
                    }
                    for tx in acct.transactions
                ],
            }
            for acct in app.bank_accounts
        ],
    }
    return json.dumps(doc, indent=4)


def application_to_contexts(app: RawApplication, customer_id: int = 0) -> list[TransactionContext]:
    """Flatten an application into per-transaction context rows."""
    return [
        TransactionContext(raw=tx, customer_id=customer_id, bank=acct.bank,
                           industry=app.industry_category)
        for acct in app.bank_accounts
        for tx in acct.transactions
    ]


# --------------------------------------------------------------------------
# Flat CSV wire format
# --------------------------------------------------------------------------

CSV_COLUMNS = (
    "Customer Id",
    "Bank Name",
    "Transaction Amount",
    "Transaction Date",
    "Transaction Description",
    "Industry Class",
)
_OPTIONAL_CSV_COLUMNS = ("Transaction Type",)


def content_sha(customer_id: int, bank: str, amount: float, when: datetime,
                description: str, industry: str) -> str:
    """Deterministic content identifier for records that arrive without one."""
    digest = hashlib.sha1(
        f"{customer_id}|{bank}|{amount!r}|{when.isoformat()}|{description}|{industry}"
        .encode("utf-8")
    ).hexdigest()
    return f"TX_{digest[:16]}"


def parse_raw_csv(document: bytes | str) -> list[TransactionContext]:
    """Parse the flat CSV export into context rows.

    The header must contain exactly the expected columns (an optional
    ``Transaction Type`` column is honored: non-credit rows are skipped with
    a warning). Byte-identical duplicate rows are accepted idempotently.
    """
    if isinstance(document, bytes):
        document = document.decode("utf-8")
    reader = csv.reader(io.StringIO(document))
    try:
        header = next(reader)
    except StopIteration:
        raise CsvSchemaError("empty document: no header row") from None
    header = [h.strip() for h in header]
    unknown = [h for h in header if h not in CSV_COLUMNS + _OPTIONAL_CSV_COLUMNS]
    missing = [c for c in CSV_COLUMNS if c not in header]
    if unknown:
        raise CsvSchemaError(f"unknown header column(s): {', '.join(unknown)}")
    if missing:
        raise CsvSchemaError(f"missing header column(s): {', '.join(missing)}")
    col = {name: header.index(name) for name in header}
    has_type = "Transaction Type" in col

    rows: list[TransactionContext] = []
    seen: set[str] = set()
    for n, cells in enumerate(reader, start=1):
        if not cells or all(not c.strip() for c in cells):
            continue
        if len(cells) != len(header):
            raise RowParseError(n, f"expected {len(header)} cells, got {len(cells)}")
        if has_type and cells[col["Transaction Type"]].strip().lower() != "credit":
            logger.warning("row %d: skipping non-credit transaction", n)
            continue
        try:
            customer = int(cells[col["Customer Id"]])
        except ValueError:
            raise RowParseError(n, f"unparseable customer id {cells[col['Customer Id']]!r}") from None
        try:
            amount = float(cells[col["Transaction Amount"]])
        except ValueError:
            raise RowParseError(n, f"unparseable amount {cells[col['Transaction Amount']]!r}") from None
        if not math.isfinite(amount):
            raise RowParseError(n, f"non-finite amount {amount!r}")
        try:
            when = parse_timestamp(cells[col["Transaction Date"]], "Transaction Date")
        except FieldPathError:
            raise RowParseError(n, f"unparseable date {cells[col['Transaction Date']]!r}") from None
        bank = cells[col["Bank Name"]].strip()
        industry = cells[col["Industry Class"]].strip()
        description = cells[col["Transaction Description"]]
        sha = content_sha(customer, bank, amount, when, description, industry)
        if sha in seen:
            continue
        seen.add(sha)
        rows.append(TransactionContext(
            raw=RawTransaction(sha=sha, date=when, amount=amount, description=description),
            customer_id=customer,
            bank=bank,
            industry=industry,
        ))
    return rows


# --------------------------------------------------------------------------
# Enrichment
# --------------------------------------------------------------------------

class EnrichmentProvider(Protocol):
    name: str

    def entities(self, tx: TransactionContext) -> Sequence[str]:
        """Named entities recognized in the transaction; may be empty."""
        ...


class MockProvider:
    """In-process lookup-table provider: term -> tags, matched as a
    case-insensitive substring of the description."""

    name = "mock"

    def __init__(self, knowledge: Mapping[str, Sequence[str]]):
        self._knowledge = {str(k): tuple(str(t) for t in v) for k, v in knowledge.items()}

    @classmethod
    def from_file(cls, path) -> "MockProvider":
        with open(path, "r", encoding="utf-8") as fh:
            return cls(json.load(fh))

    def entities(self, tx: TransactionContext) -> list[str]:
        haystack = tx.raw.description.lower()
        found: list[str] = []
        for term in sorted(self._knowledge):
            if term.lower() in haystack:
                for tag in self._knowledge[term]:
                    if tag not in found:
                        found.append(tag)
        return found


def enrich(tx: TransactionContext, provider: EnrichmentProvider) -> EnrichedTransaction:
    """Attach provider entities as tags. Best-effort: a provider failure
    yields empty tags plus a warning, never an exception."""
    tags: dict[str, tuple[str, ...]] = {}
    try:
        entities = tuple(provider.entities(tx))
        if entities:
            tags[provider.name] = entities
    except Exception:
        logger.warning("enrichment provider %r failed for %s; continuing without tags",
                       getattr(provider, "name", provider), tx.raw.sha, exc_info=True)
    return EnrichedTransaction(
        raw=tx.raw,
        customer_id=tx.customer_id,
        bank=tx.bank,
        industry=tx.industry,
        enrichment_tags=tags,
    )


def without_enrichment(tx: TransactionContext) -> EnrichedTransaction:
    return EnrichedTransaction(tx.raw, tx.customer_id, tx.bank, tx.industry, {})


# --------------------------------------------------------------------------
# Synthetic generator
# --------------------------------------------------------------------------

DEFAULT_CLASS_VOCAB: dict[ClassLabel, tuple[str, ...]] = {
    ClassLabel.FUNDING: ("funding", "loan", "advance", "capital", "drawdown", "lender"),
    ClassLabel.INCOME_INVOICE: ("invoice", "direct", "myob", "billing", "remittance", "xero"),
    ClassLabel.INCOME_CASH: ("cash", "branch", "atm", "eftpos", "takings", "teller"),
    ClassLabel.INCOME_CHEQUE: ("cheque", "clearing", "presentment", "drawn", "payee", "chq"),
    ClassLabel.OTHER: ("transfer", "internal", "interest", "reversal", "misc", "sweep"),
}

# (low, high) AUD ranges, deliberately overlapping so the text block carries
# most of the signal.
AMOUNT_RANGES: dict[ClassLabel, tuple[float, float]] = {
    ClassLabel.FUNDING: (5_000.0, 50_000.0),
    ClassLabel.INCOME_INVOICE: (400.0, 9_000.0),
    ClassLabel.INCOME_CASH: (20.0, 1_200.0),
    ClassLabel.INCOME_CHEQUE: (100.0, 3_000.0),
    ClassLabel.OTHER: (5.0, 2_000.0),
}

_NOISE_TOKENS = ("payment", "credit", "online", "pty", "ltd", "ref", "aus", "deposit")
_BANKS = ("ANZ", "NAB", "Suncorp Bank", "CBA", "Westpac", "Bendigo Bank")
_INDUSTRIES = ("Hospitality", "Building and Trade", "Professional services",
               "Meat", "Retail", "Transport", "Agriculture")


@dataclass(frozen=True)
class SyntheticConfig:
    seed: int = 42
    n_customers: int = 200
    n_transactions: int = 1000
    class_mix: tuple[float, float, float, float, float] = (0.2, 0.2, 0.2, 0.2, 0.2)
    vocab_per_class: Mapping[ClassLabel, tuple[str, ...]] = field(
        default_factory=lambda: dict(DEFAULT_CLASS_VOCAB))


def _allocate_counts(n: int, weights: Sequence[float]) -> list[int]:
    """Largest-remainder allocation; guarantees the histogram matches the mix
    as closely as integer counts allow."""
    total = float(sum(weights))
    quotas = [n * w / total for w in weights]
    counts = [int(q) for q in quotas]
    remainder = n - sum(counts)
    order = sorted(range(len(weights)), key=lambda i: (counts[i] - quotas[i], i))
    for i in order[:remainder]:
        counts[i] += 1
    return counts


def generate_synthetic(config: SyntheticConfig) -> list[tuple[EnrichedTransaction, ClassLabel]]:
    """Seeded synthetic dataset: a pure function of the config."""
    if config.n_transactions <= 0 or config.n_customers <= 0:
        raise IngestError("config error: counts must be positive")
    if len(config.class_mix) != len(CLASS_ORDER):
        raise IngestError(f"config error: class_mix needs {len(CLASS_ORDER)} weights")
    if any(w < 0 for w in config.class_mix):
        raise IngestError("config error: negative class weight")
    if sum(config.class_mix) <= 0:
        raise IngestError("config error: all class weights are zero")

    import random

    rng = random.Random(config.seed)
    counts = _allocate_counts(config.n_transactions, config.class_mix)
    labels: list[ClassLabel] = []
    for cls, count in zip(CLASS_ORDER, counts):
        labels.extend([cls] * count)
    rng.shuffle(labels)

    start = date(2019, 1, 1)
    span_days = (date(2021, 12, 31) - start).days
    dataset: list[tuple[EnrichedTransaction, ClassLabel]] = []
    for i, label in enumerate(labels):
        vocab = tuple(config.vocab_per_class[label])
        k = rng.randint(2, min(4, len(vocab)))
        tokens = rng.sample(vocab, k)
        tokens += rng.sample(_NOISE_TOKENS, rng.randint(0, 2))
        if rng.random() < 0.5:
            tokens.append("".join(rng.choice("0123456789x") for _ in range(6)))
        description = " ".join(t.upper() for t in tokens)

        low, high = AMOUNT_RANGES[label]
        amount = round(rng.uniform(low, high), 2)
        when = datetime.combine(start + timedelta(days=rng.randint(0, span_days)),
                                datetime.min.time(), tzinfo=timezone.utc)
        customer = rng.randint(1, config.n_customers)
        bank = rng.choice(_BANKS)
        industry = rng.choice(_INDUSTRIES)
        sha = content_sha(customer, bank, amount, when, f"{i}:{description}", industry)
        tx = EnrichedTransaction(
            raw=RawTransaction(sha=sha, date=when, amount=amount, description=description),
            customer_id=customer,
            bank=bank,
            industry=industry,
            enrichment_tags={},
        )
        dataset.append((tx, label))
    return dataset


# --------------------------------------------------------------------------
# Dataset persistence and batch merging
# --------------------------------------------------------------------------

def transaction_to_record(tx: EnrichedTransaction, label: ClassLabel | None = None) -> dict:
    record = {
        "sha": tx.raw.sha,
        "date": tx.raw.date.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%S"),
        "amount": tx.raw.amount,
        "description": tx.raw.description,
        "customer_id": tx.customer_id,
        "bank": tx.bank,
        "industry": tx.industry,
        "enrichment_tags": {k: list(v) for k, v in sorted(tx.enrichment_tags.items())},
    }
    if label is not None:
        record["label"] = label.value
    return record


def transaction_from_record(record: Mapping) -> tuple[EnrichedTransaction, ClassLabel | None]:
    tx = EnrichedTransaction(
        raw=RawTransaction(
            sha=record["sha"],
            date=parse_timestamp(record["date"], "date"),
            amount=float(record["amount"]),
            description=record["description"],
        ),
        customer_id=int(record["customer_id"]),
        bank=record["bank"],
        industry=record["industry"],
        enrichment_tags={k: tuple(v) for k, v in record.get("enrichment_tags", {}).items()},
    )
    label = record.get("label")
    return tx, (ClassLabel.from_name(label) if label else None)


def dataset_to_jsonl(dataset: Iterable[tuple[EnrichedTransaction, ClassLabel | None]]) -> str:
    lines = [json.dumps(transaction_to_record(tx, label), sort_keys=True)
             for tx, label in dataset]
    return "\n".join(lines) + ("\n" if lines else "")


def dataset_from_jsonl(text: str) -> list[tuple[EnrichedTransaction, ClassLabel | None]]:
    return [transaction_from_record(json.loads(line))
            for line in text.splitlines() if line.strip()]


def merge_batch(
    existing: Sequence[tuple[EnrichedTransaction, ClassLabel | None]],
    incoming: Sequence[tuple[EnrichedTransaction, ClassLabel | None]],
) -> list[tuple[EnrichedTransaction, ClassLabel | None]]:
    """Merge a new batch into a dataset keyed by sha.

    A sha already present with identical content is accepted idempotently;
    the same sha with different content is a conflict.
    """
    merged = list(existing)
    by_sha = {tx.raw.sha: (tx, label) for tx, label in existing}
    for tx, label in incoming:
        prior = by_sha.get(tx.raw.sha)
        if prior is None:
            by_sha[tx.raw.sha] = (tx, label)
            merged.append((tx, label))
        elif prior[0] != tx:
            raise ShaConflictError(f"conflicting content for sha {tx.raw.sha}")
        # identical content: idempotent accept
    return merged
