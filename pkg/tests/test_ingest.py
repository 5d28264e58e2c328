"""Parsing, enrichment, synthetic generation, and batch merge semantics."""

import json
from datetime import datetime, timezone

import pytest

from txlens import ingest
from txlens.labels import CLASS_ORDER, ClassLabel

from conftest import APPLICATION_DOC, RAW_EXPORT_CSV


class TestParseApplication:
    def test_sample_document_values(self):
        app = ingest.parse_application(APPLICATION_DOC)
        assert app.application_id == "32000"
        assert app.industry_category == "Meat"
        assert [a.bank for a in app.bank_accounts] == ["Suncorp Bank", "Suncorp Bank"]
        assert app.bank_accounts[0].account_name == "Cash Management Account"
        assert app.bank_accounts[0].account_number == "123-456-789"
        assert app.bank_accounts[0].account_nickname is None
        assert app.bank_accounts[1].account_name == "Everyday Account"

        txs = app.all_transactions()
        assert [t.sha for t in txs] == ["SHA_0001", "SHA_0002", "SHA_0004", "SHA_0003"]
        assert [t.amount for t in txs] == [7.47, 13.5, 15.5, 1000.15]
        assert txs[0].description == "DIRECT CREDIT A 123-56NSW"
        assert txs[3].description == "Commissions for xyz"
        # Dates without an offset land as UTC.
        assert txs[0].date == datetime(2018, 9, 1, tzinfo=timezone.utc)
        assert txs[3].date == datetime(2018, 9, 1, tzinfo=timezone.utc)

    def test_accepts_bytes(self):
        app = ingest.parse_application(APPLICATION_DOC.encode("utf-8"))
        assert app.application_id == "32000"

    def test_round_trip_preserves_values(self):
        app = ingest.parse_application(APPLICATION_DOC)
        again = ingest.parse_application(ingest.serialize_application(app))
        assert again == app

    def test_serialized_field_names_are_wire_names(self):
        doc = json.loads(ingest.serialize_application(ingest.parse_application(APPLICATION_DOC)))
        assert set(doc) == {"ApplicationId", "IndustryCategory", "BankAccounts"}
        account = doc["BankAccounts"][0]
        assert set(account) == {"Bank", "AccountName", "AccountNickname",
                                "AccountNumber", "Transactions"}
        assert set(account["Transactions"][0]) == {"Sha", "Date", "Amount", "Description"}

    def test_malformed_json_reports_byte_offset(self):
        bad = '{"ApplicationId": "1", }'
        with pytest.raises(ingest.ParseError) as err:
            ingest.parse_application(bad)
        assert err.value.offset == bad.index("}")
        assert f"byte offset {bad.index('}')}" in str(err.value)

    def test_non_object_root(self):
        with pytest.raises(ingest.ParseError, match="not an object"):
            ingest.parse_application("[1, 2]")

    def test_missing_field_names_its_path(self):
        doc = json.loads(APPLICATION_DOC)
        del doc["BankAccounts"][1]["AccountNumber"]
        with pytest.raises(ingest.FieldPathError) as err:
            ingest.parse_application(json.dumps(doc))
        assert err.value.path == "BankAccounts[1].AccountNumber"

    def test_missing_transaction_field_names_its_path(self):
        doc = json.loads(APPLICATION_DOC)
        del doc["BankAccounts"][0]["Transactions"][1]["Amount"]
        with pytest.raises(ingest.FieldPathError) as err:
            ingest.parse_application(json.dumps(doc))
        assert err.value.path == "BankAccounts[0].Transactions[1].Amount"

    def test_empty_application_id(self):
        doc = json.loads(APPLICATION_DOC)
        doc["ApplicationId"] = "   "
        with pytest.raises(ingest.FieldPathError, match="ApplicationId"):
            ingest.parse_application(json.dumps(doc))

    def test_no_accounts(self):
        doc = json.loads(APPLICATION_DOC)
        doc["BankAccounts"] = []
        with pytest.raises(ingest.IngestError, match="no accounts"):
            ingest.parse_application(json.dumps(doc))

    def test_duplicate_sha_across_accounts(self):
        doc = json.loads(APPLICATION_DOC)
        doc["BankAccounts"][1]["Transactions"][0]["Sha"] = "SHA_0002"
        with pytest.raises(ingest.ShaConflictError, match="duplicate sha SHA_0002"):
            ingest.parse_application(json.dumps(doc))

    def test_non_numeric_amount(self):
        doc = json.loads(APPLICATION_DOC)
        doc["BankAccounts"][0]["Transactions"][0]["Amount"] = "7.47"
        with pytest.raises(ingest.FieldPathError, match="non-numeric amount"):
            ingest.parse_application(json.dumps(doc))

    def test_contexts_carry_account_bank_and_application_industry(self):
        app = ingest.parse_application(APPLICATION_DOC)
        contexts = ingest.application_to_contexts(app, customer_id=7)
        assert len(contexts) == 4
        assert all(ctx.bank == "Suncorp Bank" for ctx in contexts)
        assert all(ctx.industry == "Meat" for ctx in contexts)
        assert all(ctx.customer_id == 7 for ctx in contexts)


class TestParseTimestamp:
    def test_zulu_suffix(self):
        assert ingest.parse_timestamp("2020-01-02T03:04:05Z") == datetime(
            2020, 1, 2, 3, 4, 5, tzinfo=timezone.utc)

    def test_naive_is_utc(self):
        assert ingest.parse_timestamp("2020-01-02T03:04:05").tzinfo == timezone.utc

    def test_offset_normalized_to_utc(self):
        parsed = ingest.parse_timestamp("2020-01-02T10:00:00+10:00")
        assert parsed == datetime(2020, 1, 2, 0, 0, tzinfo=timezone.utc)

    def test_garbage_raises_with_path(self):
        with pytest.raises(ingest.FieldPathError, match="unparseable ISO-8601"):
            ingest.parse_timestamp("junk", "Transactions[0].Date")


class TestParseRawCsv:
    def test_sample_export_values(self):
        rows = ingest.parse_raw_csv(RAW_EXPORT_CSV)
        assert len(rows) == 4
        assert [r.customer_id for r in rows] == [1, 2, 3, 4]
        assert [r.bank for r in rows] == ["ANZ", "NAB", "NAB", "NAB"]
        assert [r.raw.amount for r in rows] == [280.97, 802.47, 150.0, 626.0]
        assert rows[0].raw.date == datetime(2019, 6, 9, tzinfo=timezone.utc)
        assert rows[3].raw.description == "McDonald 3xxxcx6"
        assert rows[1].industry == "Building and Trade"
        assert all(r.raw.sha.startswith("TX_") for r in rows)
        assert len({r.raw.sha for r in rows}) == 4

    def test_header_order_is_free(self):
        lines = RAW_EXPORT_CSV.splitlines()
        header = lines[0].split(",")
        reordered = ",".join(reversed(header)) + "\n" + "\n".join(
            ",".join(reversed(line.split(","))) for line in lines[1:])
        rows = ingest.parse_raw_csv(reordered)
        assert [r.customer_id for r in rows] == [1, 2, 3, 4]
        assert rows[0].bank == "ANZ"

    def test_unknown_column_rejected(self):
        bad = RAW_EXPORT_CSV.replace("Bank Name", "Bank")
        with pytest.raises(ingest.CsvSchemaError, match="unknown header column"):
            ingest.parse_raw_csv(bad)

    def test_missing_column_rejected(self):
        lines = RAW_EXPORT_CSV.splitlines()
        trimmed = "\n".join(",".join(line.split(",")[1:]) for line in lines)
        with pytest.raises(ingest.CsvSchemaError, match="missing header column.*Customer Id"):
            ingest.parse_raw_csv(trimmed)

    def test_empty_document(self):
        with pytest.raises(ingest.CsvSchemaError, match="no header row"):
            ingest.parse_raw_csv("")

    def test_bad_amount_reports_row_number(self):
        bad = RAW_EXPORT_CSV.replace("802.47", "eight")
        with pytest.raises(ingest.RowParseError, match="row 2") as err:
            ingest.parse_raw_csv(bad)
        assert err.value.row == 2

    def test_bad_date_reports_row_number(self):
        bad = RAW_EXPORT_CSV.replace("2020-11-02", "02/11/2020")
        with pytest.raises(ingest.RowParseError, match="row 3: unparseable date"):
            ingest.parse_raw_csv(bad)

    def test_duplicate_rows_accepted_once(self):
        lines = RAW_EXPORT_CSV.splitlines()
        doubled = "\n".join(lines + [lines[1]])
        rows = ingest.parse_raw_csv(doubled)
        assert len(rows) == 4

    def test_non_credit_rows_skipped_with_warning(self, caplog):
        lines = RAW_EXPORT_CSV.splitlines()
        header = lines[0] + ",Transaction Type"
        body = [line + ("," + ("debit" if i == 1 else "credit"))
                for i, line in enumerate(lines[1:])]
        with caplog.at_level("WARNING", logger="txlens.ingest"):
            rows = ingest.parse_raw_csv("\n".join([header] + body))
        assert len(rows) == 3
        assert [r.customer_id for r in rows] == [1, 3, 4]
        assert any("skipping non-credit" in r.message for r in caplog.records)

    def test_blank_lines_ignored(self):
        rows = ingest.parse_raw_csv(RAW_EXPORT_CSV + "\n\n")
        assert len(rows) == 4


class TestContentSha:
    def test_deterministic(self):
        when = datetime(2020, 1, 1, tzinfo=timezone.utc)
        a = ingest.content_sha(1, "ANZ", 10.0, when, "EFTPOS", "Meat")
        b = ingest.content_sha(1, "ANZ", 10.0, when, "EFTPOS", "Meat")
        assert a == b
        assert a.startswith("TX_") and len(a) == 19

    def test_any_field_changes_the_sha(self):
        when = datetime(2020, 1, 1, tzinfo=timezone.utc)
        base = ingest.content_sha(1, "ANZ", 10.0, when, "EFTPOS", "Meat")
        assert ingest.content_sha(2, "ANZ", 10.0, when, "EFTPOS", "Meat") != base
        assert ingest.content_sha(1, "NAB", 10.0, when, "EFTPOS", "Meat") != base
        assert ingest.content_sha(1, "ANZ", 10.01, when, "EFTPOS", "Meat") != base
        assert ingest.content_sha(1, "ANZ", 10.0, when, "eftpos", "Meat") != base


class TestEnrichment:
    def _context(self, description: str) -> ingest.TransactionContext:
        return ingest.TransactionContext(
            raw=ingest.RawTransaction(
                sha="TX_E1", date=datetime(2020, 1, 1, tzinfo=timezone.utc),
                amount=5.0, description=description),
            customer_id=1, bank="ANZ", industry="Meat")

    def test_mock_provider_matches_substring_case_insensitively(self):
        provider = ingest.MockProvider({"McDonald": ["business:food"]})
        enriched = ingest.enrich(self._context("MCDONALD 3xxxcx6"), provider)
        assert enriched.enrichment_tags == {"mock": ("business:food",)}

    def test_no_match_means_no_tags(self):
        provider = ingest.MockProvider({"McDonald": ["business:food"]})
        enriched = ingest.enrich(self._context("EFTPOS"), provider)
        assert enriched.enrichment_tags == {}

    def test_terms_apply_in_sorted_order_without_duplicate_tags(self):
        provider = ingest.MockProvider({
            "zeta": ["b", "c"],
            "alpha": ["a", "b"],
        })
        enriched = ingest.enrich(self._context("alpha zeta"), provider)
        assert enriched.enrichment_tags["mock"] == ("a", "b", "c")

    def test_provider_failure_is_contained(self, caplog):
        class Exploding:
            name = "boom"

            def entities(self, tx):
                raise RuntimeError("provider outage")

        with caplog.at_level("WARNING", logger="txlens.ingest"):
            enriched = ingest.enrich(self._context("EFTPOS"), Exploding())
        assert enriched.enrichment_tags == {}
        assert any("continuing without tags" in r.message for r in caplog.records)

    def test_provider_from_file(self, tmp_path):
        path = tmp_path / "knowledge.json"
        path.write_text('{"McDonald": ["business:food"]}', encoding="utf-8")
        provider = ingest.MockProvider.from_file(path)
        assert provider.entities(self._context("at mcdonald")) == ["business:food"]


class TestSyntheticGenerator:
    def test_exact_class_mix(self):
        dataset = ingest.generate_synthetic(ingest.SyntheticConfig(seed=3, n_transactions=1000))
        histogram = {label: 0 for label in CLASS_ORDER}
        for _, label in dataset:
            histogram[label] += 1
        assert all(count == 200 for count in histogram.values())

    def test_uneven_mix_allocated_by_largest_remainder(self):
        config = ingest.SyntheticConfig(seed=1, n_transactions=10,
                                        class_mix=(0.5, 0.2, 0.1, 0.1, 0.1))
        histogram = {label: 0 for label in CLASS_ORDER}
        for _, label in ingest.generate_synthetic(config):
            histogram[label] += 1
        assert [histogram[label] for label in CLASS_ORDER] == [5, 2, 1, 1, 1]

    def test_same_seed_is_byte_identical(self):
        config = ingest.SyntheticConfig(seed=11, n_transactions=120)
        first = ingest.dataset_to_jsonl(ingest.generate_synthetic(config))
        second = ingest.dataset_to_jsonl(ingest.generate_synthetic(config))
        assert first == second

    def test_different_seeds_differ(self):
        a = ingest.dataset_to_jsonl(ingest.generate_synthetic(
            ingest.SyntheticConfig(seed=1, n_transactions=50)))
        b = ingest.dataset_to_jsonl(ingest.generate_synthetic(
            ingest.SyntheticConfig(seed=2, n_transactions=50)))
        assert a != b

    def test_dates_are_utc_midnights_in_range(self):
        dataset = ingest.generate_synthetic(ingest.SyntheticConfig(seed=5, n_transactions=60))
        for tx, _ in dataset:
            when = tx.raw.date
            assert when.tzinfo == timezone.utc
            assert (when.hour, when.minute, when.second) == (0, 0, 0)
            assert datetime(2019, 1, 1, tzinfo=timezone.utc) <= when \
                <= datetime(2021, 12, 31, tzinfo=timezone.utc)

    def test_amounts_respect_class_ranges(self):
        dataset = ingest.generate_synthetic(ingest.SyntheticConfig(seed=5, n_transactions=200))
        for tx, label in dataset:
            low, high = ingest.AMOUNT_RANGES[label]
            assert low <= tx.raw.amount <= high

    def test_shas_unique(self):
        dataset = ingest.generate_synthetic(ingest.SyntheticConfig(seed=5, n_transactions=500))
        assert len({tx.raw.sha for tx, _ in dataset}) == 500

    @pytest.mark.parametrize("config,message", [
        (ingest.SyntheticConfig(n_transactions=0), "counts must be positive"),
        (ingest.SyntheticConfig(n_customers=0), "counts must be positive"),
        (ingest.SyntheticConfig(class_mix=(1.0, 1.0)), "needs 5 weights"),
        (ingest.SyntheticConfig(class_mix=(1, 1, 1, 1, -1)), "negative class weight"),
        (ingest.SyntheticConfig(class_mix=(0, 0, 0, 0, 0)), "weights are zero"),
    ])
    def test_config_validation(self, config, message):
        with pytest.raises(ingest.IngestError, match=f"config error: .*{message}"):
            ingest.generate_synthetic(config)


class TestDatasetPersistence:
    def test_record_round_trip_with_label_and_tags(self):
        tx = ingest.EnrichedTransaction(
            raw=ingest.RawTransaction(
                sha="TX_RT", date=datetime(2020, 5, 6, tzinfo=timezone.utc),
                amount=12.5, description="CASH AT BRANCH"),
            customer_id=9, bank="NAB", industry="Retail",
            enrichment_tags={"mock": ("a", "b")})
        back, label = ingest.transaction_from_record(
            ingest.transaction_to_record(tx, ClassLabel.INCOME_CASH))
        assert back == tx
        assert label == ClassLabel.INCOME_CASH

    def test_record_round_trip_unlabeled(self):
        tx = ingest.EnrichedTransaction(
            raw=ingest.RawTransaction(
                sha="TX_RT2", date=datetime(2020, 5, 6, tzinfo=timezone.utc),
                amount=12.5, description="EFTPOS"),
            customer_id=9, bank="NAB", industry="Retail")
        record = ingest.transaction_to_record(tx)
        assert "label" not in record
        back, label = ingest.transaction_from_record(record)
        assert back == tx and label is None

    def test_jsonl_round_trip(self):
        dataset = ingest.generate_synthetic(ingest.SyntheticConfig(seed=8, n_transactions=40))
        text = ingest.dataset_to_jsonl(dataset)
        assert ingest.dataset_from_jsonl(text) == dataset

    def test_empty_jsonl(self):
        assert ingest.dataset_to_jsonl([]) == ""
        assert ingest.dataset_from_jsonl("") == []


class TestMergeBatch:
    def _dataset(self, n: int, seed: int = 21):
        return ingest.generate_synthetic(ingest.SyntheticConfig(seed=seed, n_transactions=n))

    def test_disjoint_batches_append(self):
        first = self._dataset(10, seed=1)
        second = self._dataset(10, seed=2)
        merged = ingest.merge_batch(first, second)
        assert len(merged) == 20
        assert merged[:10] == first

    def test_identical_reingest_is_idempotent(self):
        dataset = self._dataset(10)
        merged = ingest.merge_batch(dataset, dataset)
        assert merged == dataset

    def test_conflicting_content_rejected(self):
        dataset = self._dataset(5)
        tx, label = dataset[0]
        altered = ingest.EnrichedTransaction(
            raw=ingest.RawTransaction(
                sha=tx.raw.sha, date=tx.raw.date, amount=tx.raw.amount + 1.0,
                description=tx.raw.description),
            customer_id=tx.customer_id, bank=tx.bank, industry=tx.industry)
        with pytest.raises(ingest.ShaConflictError,
                           match=f"conflicting content for sha {tx.raw.sha}"):
            ingest.merge_batch(dataset, [(altered, label)])
