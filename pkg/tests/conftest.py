"""Shared fixtures.

Three hand-frozen sample sets drive most tests:
- a nine-transaction review batch with known actual/predicted classes and
  probabilities (4 of 9 correct),
- a four-row raw CSV export,
- an eight-row pre-coded feature sample with integer-coded banks/industries.
Plus a small synthetic pipeline session for service-level tests.
"""

from __future__ import annotations

from datetime import datetime, timezone
from pathlib import Path

import pytest

from txlens import evidence, featurize, ingest, pnn, service
from txlens.labels import ClassLabel

F = ClassLabel.FUNDING
I = ClassLabel.INCOME_INVOICE
C = ClassLabel.INCOME_CASH
Q = ClassLabel.INCOME_CHEQUE
O = ClassLabel.OTHER

# The review batch: (actual, predicted, probabilities in canonical class
# order as scored). Row 3's probabilities do not sum to 1 as recorded; the
# builder normalizes every row, which never changes the argmax.
REVIEW_ROWS = [
    (I, I, (0.14, 0.328, 0.325, 0.074, 0.141)),
    (F, F, (0.41, 0.023, 0.273, 0.005, 0.34)),
    (F, F, (0.551, 0.062, 0.021, 0.35, 0.185)),
    (I, C, (0.141, 0.314, 0.329, 0.075, 0.142)),
    (I, C, (0.070, 0.133, 0.577, 0.021, 0.199)),
    (F, F, (0.536, 0.005, 0.201, 0.125, 0.133)),
    (F, O, (0.214, 0.063, 0.273, 0.005, 0.445)),
    (I, Q, (0.056, 0.203, 0.217, 0.498, 0.026)),
    (I, C, (0.155, 0.306, 0.312, 0.147, 0.080)),
]

_REVIEW_DESCRIPTIONS = [
    "DIRECT CREDIT MYOB INVOICE 000003",
    "LOAN ADVANCE DRAWDOWN CAPITAL",
    "FUNDING LENDER ADVANCE 2xxxx3",
    "INVOICE PAYMENT RECEIVED BRANCH",
    "MISCELLANEOUS CREDIT INTERNET PAYMENT",
    "CAPITAL DRAWDOWN FACILITY",
    "TRANSFER INTEREST REVERSAL",
    "CHEQUE PRESENTMENT DRAWN PAYEE",
    "PAYMENT RECEIVED TRANSFER AMOUNT FOR BBBB",
]
_REVIEW_BANKS = ["ANZ", "NAB", "NAB", "ANZ", "Suncorp Bank", "NAB", "ANZ", "NAB", "Suncorp Bank"]
_REVIEW_INDUSTRIES = ["Hospitality", "Building and Trade", "Hospitality", "Meat",
                      "Hospitality", "Professional services", "Meat",
                      "Building and Trade", "Hospitality"]
_REVIEW_AMOUNTS = [402.5, 5000.0, 12000.0, 150.0, 88.2, 7600.0, 45.0, 990.0, 310.4]


def review_sha(row: int) -> str:
    """1-based sha for a review-batch row."""
    return f"TX_REVIEW_{row:02d}"


def build_review_transactions() -> list[ingest.EnrichedTransaction]:
    txs = []
    for i in range(9):
        txs.append(ingest.EnrichedTransaction(
            raw=ingest.RawTransaction(
                sha=review_sha(i + 1),
                date=datetime(2020, (i % 12) + 1, (i % 27) + 1, tzinfo=timezone.utc),
                amount=_REVIEW_AMOUNTS[i],
                description=_REVIEW_DESCRIPTIONS[i],
            ),
            customer_id=100 + i,
            bank=_REVIEW_BANKS[i],
            industry=_REVIEW_INDUSTRIES[i],
            enrichment_tags={},
        ))
    return txs


def build_review_state() -> service.SessionState:
    """Session whose store holds the nine review rows with their recorded
    probabilities. The model is trained on the same rows (labeled by their
    predicted class, which covers all five classes) so what-if probes work."""
    txs = build_review_transactions()
    schema = featurize.fit_schema(txs, text_dim=16, version=1)
    vectors = [featurize.build_feature_vector(tx, schema) for tx in txs]
    model = pnn.train(
        [(fv, predicted) for fv, (_, predicted, _) in zip(vectors, REVIEW_ROWS)],
        sigma=0.5,
    )
    predictions = []
    for fv, (_, predicted, probs) in zip(vectors, REVIEW_ROWS):
        total = sum(probs)
        predictions.append(pnn.Prediction(
            sha=fv.sha,
            probabilities={label: p / total
                           for label, p in zip(ClassLabel, probs)},
            final=predicted,
            model_id=model.model_id,
        ))
    actuals = {fv.sha: actual for fv, (actual, _, _) in zip(vectors, REVIEW_ROWS)}
    store = evidence.load_join(txs, vectors, predictions, actuals)
    split = service.SplitSpec(seed=0, eval_fraction=0.0,
                              train=(), eval=tuple(sorted(actuals)))
    return service.SessionState(schema=schema, model=model, store=store, split=split)


RAW_EXPORT_CSV = (
    "Customer Id,Bank Name,Transaction Amount,Transaction Date,"
    "Transaction Description,Industry Class\n"
    "1,ANZ,280.97,2019-06-09,EFTPOS TRANSACTION,Hospitality\n"
    "2,NAB,802.47,2020-03-04,INTER-BANK CREDIT Wages Bank,Building and Trade\n"
    "3,NAB,150,2020-11-02,TRANSFER CREDIT ONLINE Linked transaction CONSTRUC,Hospitality\n"
    "4,NAB,626,2019-09-18,McDonald 3xxxcx6,Professional services\n"
)

# Pre-coded feature sample: banks and industries arrive as opaque digit codes.
CODED_ROWS = [
    (22931, "2", 4.453, 2020, 6, 9, "DIRECT CREDIT 2xxxx3 MYOB PAY BY 000003", "1"),
    (22241, "33", 2.80, 2020, 6, 9, "MISCELLANEOUS CREDIT INTERNET PAYMENT", "1"),
    (27909, "46", 0.11, 2021, 1, 4, "DEPOSIT PAYMENT BANK", "4"),
    (22819, "25", 8.8, 2021, 2, 15, "PAYMENT FROM ABC XYZ", "4"),
    (28707, "19", 0.5, 2021, 4, 20, "SEASON 2xxx45 BANK 0xxxx", "7"),
    (27414, "3", 1.4, 2021, 1, 14, "NAME ELSE PERSON TRANSFER", "2"),
    (25459, "51", 0.4, 2020, 9, 29, "PAYMENT RECEIVED MANGOES TRANSFER AMOUNT FOR BBBB", "4"),
    (21474, "117", 1.5, 2021, 8, 20, "MISCELLANEOUS CREDIT INTERNET PAYMENT PURCHASE", "6"),
]


def build_coded_transactions() -> list[ingest.EnrichedTransaction]:
    txs = []
    for customer, bank, amount, year, month, day, description, industry in CODED_ROWS:
        txs.append(ingest.EnrichedTransaction(
            raw=ingest.RawTransaction(
                sha=f"TX_CODED_{customer}",
                date=datetime(year, month, day, tzinfo=timezone.utc),
                amount=amount,
                description=description,
            ),
            customer_id=customer,
            bank=bank,
            industry=industry,
            enrichment_tags={},
        ))
    return txs


APPLICATION_DOC = """{
    "ApplicationId": "32000",
    "IndustryCategory": "Meat",
    "BankAccounts": [
        {
            "Bank": "Suncorp Bank",
            "AccountName": "Cash Management Account",
            "AccountNumber": "123-456-789",
            "Transactions": [
                {
                    "Sha": "SHA_0001",
                    "Date": "2018-09-01T00:00:00",
                    "Amount": 7.47,
                    "Description": "DIRECT CREDIT A 123-56NSW"
                },
                {
                    "Sha": "SHA_0002",
                    "Date": "2018-09-02T00:00:00",
                    "Amount": 13.5,
                    "Description": "EFTPOS"
                },
                {
                    "Sha": "SHA_0004",
                    "Date": "2018-09-02T00:00:00",
                    "Amount": 15.5,
                    "Description": "EFTPOS"
                }
            ]
        },
        {
            "Bank": "Suncorp Bank",
            "AccountName": "Everyday Account",
            "AccountNickname": null,
            "AccountNumber": "123-456-788",
            "Transactions": [
                {
                    "Sha": "SHA_0003",
                    "Date": "2018-09-01T00:00:00",
                    "Amount": 1000.15,
                    "Description": "Commissions for xyz"
                }
            ]
        }
    ]
}"""


@pytest.fixture(autouse=True)
def _isolated_data_dir_env(monkeypatch):
    monkeypatch.delenv(service.DATA_DIR_ENV, raising=False)


@pytest.fixture(scope="session")
def review_state() -> service.SessionState:
    return build_review_state()


@pytest.fixture(scope="session")
def coded_transactions() -> list[ingest.EnrichedTransaction]:
    return build_coded_transactions()


@pytest.fixture(scope="session")
def coded_store(coded_transactions) -> evidence.EvidenceStore:
    """Store over the coded rows with placeholder uniform predictions, for
    queries that only need features (neighbors, token index)."""
    schema = featurize.fit_schema(coded_transactions, text_dim=16)
    vectors = [featurize.build_feature_vector(tx, schema) for tx in coded_transactions]
    predictions = [
        pnn.Prediction(sha=tx.raw.sha,
                       probabilities={label: 0.2 for label in ClassLabel},
                       final=ClassLabel.FUNDING,
                       model_id="pnn-fixture")
        for tx in coded_transactions
    ]
    return evidence.load_join(coded_transactions, vectors, predictions)


@pytest.fixture(scope="session")
def synth_state(tmp_path_factory) -> service.SessionState:
    """A real pipeline run over a small synthetic dataset."""
    dataset = ingest.generate_synthetic(ingest.SyntheticConfig(
        seed=7, n_transactions=400, n_customers=60))
    config = service.ServiceConfig(
        data_dir=tmp_path_factory.mktemp("synth"), seed=7, eval_fraction=0.2)
    return service.run_pipeline(dataset, config)


@pytest.fixture(scope="session")
def review_client(review_state, tmp_path_factory):
    from fastapi.testclient import TestClient

    config = service.ServiceConfig(data_dir=tmp_path_factory.mktemp("review"))
    workbench = service.WorkbenchService(config, state=review_state)
    return TestClient(service.create_app(workbench))
