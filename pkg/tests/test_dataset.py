import json

import pytest

from docstudy.analysis import analyze_document
from docstudy.corpus import Corpus, document_from_record, ingest_jsonl
from docstudy.dataset import (
    DegenerateSplitError,
    SplitSpec,
    attach_loss_policy,
    build_manifest,
    doc_record,
    manifest_bytes,
    overlap_report,
    qa_record,
    read_manifest,
    split_corpus,
    task_record,
    verify_manifest,
    write_manifest,
)
from docstudy.errors import DataError
from docstudy.qagen import QAPair
from docstudy.taskgen import build_suite

from _synth import synthetic_records, write_jsonl


def make_corpus(n, seed=0, tmp_path=None, name="c"):
    docs = tuple(document_from_record(r) for r in synthetic_records(n, seed=seed))
    return Corpus(name=name, seed=seed, documents=docs)


class TestSplit:
    def test_paper_sized_split(self):
        corpus = make_corpus(1263)
        train, test = split_corpus(corpus, SplitSpec(test_fraction=0.1, seed=42))
        assert (len(train), len(test)) == (1136, 127)

    def test_two_docs_half(self):
        corpus = make_corpus(2)
        train, test = split_corpus(corpus, SplitSpec(test_fraction=0.5, seed=1))
        assert len(train) == 1 and len(test) == 1

    def test_duplicate_title_rejected_before_split(self):
        records = synthetic_records(4)
        records[3]["title"] = records[0]["title"]
        docs = tuple(document_from_record(r) for r in records)
        corpus = Corpus(name="c", seed=0, documents=docs)
        with pytest.raises(DataError):
            split_corpus(corpus, SplitSpec(test_fraction=0.5, seed=1))

    def test_degenerate_split_rejected(self):
        corpus = make_corpus(2)
        with pytest.raises(DegenerateSplitError):
            split_corpus(corpus, SplitSpec(test_fraction=0.95, seed=1))
        with pytest.raises(DegenerateSplitError):
            split_corpus(Corpus(name="c", seed=0, documents=make_corpus(1).documents),
                         SplitSpec(test_fraction=0.5, seed=1))

    def test_disjoint_conserving_deterministic(self):
        corpus = make_corpus(100, seed=3)
        spec = SplitSpec(test_fraction=0.2, seed=7)
        train_a, test_a = split_corpus(corpus, spec)
        train_b, test_b = split_corpus(corpus, spec)
        assert [d.id for d in train_a] == [d.id for d in train_b]
        assert [d.id for d in test_a] == [d.id for d in test_b]
        assert train_a.ids() & test_a.ids() == set()
        assert set(train_a.titles()) & set(test_a.titles()) == set()
        assert len(train_a) + len(test_a) == len(corpus)
        assert train_a.ids() | test_a.ids() == corpus.ids()

    def test_order_preserved_within_sides(self):
        corpus = make_corpus(50, seed=5)
        train, test = split_corpus(corpus, SplitSpec(test_fraction=0.3, seed=11))
        original = [d.id for d in corpus]
        assert [d.id for d in train] == [i for i in original if i in train.ids()]
        assert [d.id for d in test] == [i for i in original if i in test.ids()]

    def test_fraction_bounds_validated(self):
        with pytest.raises(DataError):
            SplitSpec(test_fraction=0.0, seed=1)
        with pytest.raises(DataError):
            SplitSpec(test_fraction=1.0, seed=1)

    def test_overlap_report_advisory(self):
        records = synthetic_records(6, seed=9)
        # force a shared 8-gram across the split by copying a long clause
        shared = "they walked along the harbor road toward the old lighthouse keeper"
        records[0]["body"] += f" {shared}."
        records[5]["body"] += f" {shared}."
        docs = tuple(document_from_record(r) for r in records)
        corpus = Corpus(name="c", seed=0, documents=docs)
        train, test = split_corpus(corpus, SplitSpec(test_fraction=0.34, seed=2))
        report = overlap_report(train, test, ngram_size=8)
        assert report["ngram_size"] == 8
        sides = {r["id"] for r in (records[0], records[5])}
        if sides & train.ids() and sides & test.ids():
            assert report["documents_with_overlap"] >= 1


class TestLossPolicy:
    def test_doc_full_sequence(self):
        record = {"kind": "doc", "payload": {"id": "x"}}
        assert attach_loss_policy(record)["loss_policy"] == "full_sequence"

    def test_memorization_task_full_sequence(self):
        record = {"kind": "task", "payload": {"kind": "memorization"}}
        assert attach_loss_policy(record)["loss_policy"] == "full_sequence"

    def test_other_task_answer_only(self):
        record = {"kind": "task", "payload": {"kind": "cloze"}}
        assert attach_loss_policy(record)["loss_policy"] == "answer_only"

    def test_qa_answer_only(self):
        record = {"kind": "qa", "payload": {}}
        assert attach_loss_policy(record)["loss_policy"] == "answer_only"

    def test_idempotent(self):
        record = attach_loss_policy({"kind": "qa", "payload": {}})
        assert attach_loss_policy(record) is record

    def test_unknown_kind_error(self):
        with pytest.raises(DataError):
            attach_loss_policy({"kind": "mystery"})


class TestManifests:
    def _records(self, n=5, seed=0):
        records = []
        for record in synthetic_records(n, seed=seed):
            doc = document_from_record(record)
            records.append(doc_record(doc))
            suite = build_suite(analyze_document(doc), seed=seed)
            records.extend(task_record(ex) for ex in suite.examples[:2])
        return records

    def test_byte_identical_across_runs(self, tmp_path):
        records = self._records()
        a = write_manifest(records, "m", "train", tmp_path / "a.jsonl", seed=4)
        b = write_manifest(records, "m", "train", tmp_path / "b.jsonl", seed=4)
        assert (tmp_path / "a.jsonl").read_bytes() == (tmp_path / "b.jsonl").read_bytes()
        assert a.checksum == b.checksum

    def test_single_record_manifest(self, tmp_path):
        records = self._records(1)[:1]
        manifest = write_manifest(records, "m", "train", tmp_path / "m.jsonl")
        assert len(manifest) == 1
        assert verify_manifest(tmp_path / "m.jsonl").ok

    def test_empty_manifest_rejected(self, tmp_path):
        with pytest.raises(DataError):
            write_manifest([], "m", "train", tmp_path / "m.jsonl")

    def test_every_record_has_one_policy(self, tmp_path):
        manifest = write_manifest(self._records(), "m", "train", tmp_path / "m.jsonl")
        for record in manifest.records:
            assert record["loss_policy"] in ("full_sequence", "answer_only")

    def test_footer_schema(self, tmp_path):
        write_manifest(self._records(), "m", "train", tmp_path / "m.jsonl", seed=9)
        last = (tmp_path / "m.jsonl").read_text("utf-8").splitlines()[-1]
        footer = json.loads(last)
        assert set(footer) == {"checksum", "count", "seed"}
        assert footer["seed"] == 9

    def test_read_round_trip(self, tmp_path):
        manifest = write_manifest(self._records(), "m", "train", tmp_path / "m.jsonl", seed=1)
        loaded = read_manifest(tmp_path / "m.jsonl", name="m", split="train")
        assert loaded.records == manifest.records
        assert loaded.checksum == manifest.checksum
        assert manifest_bytes(loaded) == (tmp_path / "m.jsonl").read_bytes()


class TestVerify:
    def _write(self, tmp_path, n=6):
        records = []
        for record in synthetic_records(n, seed=1):
            records.append(doc_record(document_from_record(record)))
        path = tmp_path / "m.jsonl"
        write_manifest(records, "m", "train", path)
        return path

    def test_untouched_ok(self, tmp_path):
        assert verify_manifest(self._write(tmp_path)).ok

    def test_truncated_reports_last_index(self, tmp_path):
        path = self._write(tmp_path)
        lines = path.read_text("utf-8").splitlines()
        path.write_text("\n".join(lines[:3] + lines[-1:]) + "\n", "utf-8")
        result = verify_manifest(path)
        assert not result.ok
        assert "truncated" in result.reason
        assert result.first_divergence == 2

    def test_flipped_byte_rejected(self, tmp_path):
        path = self._write(tmp_path)
        raw = bytearray(path.read_bytes())
        target = raw.find(b"doc-00002")
        raw[target] = ord("X")
        path.write_bytes(bytes(raw))
        assert not verify_manifest(path).ok

    def test_reordered_records_rejected(self, tmp_path):
        path = self._write(tmp_path)
        lines = path.read_text("utf-8").splitlines()
        lines[0], lines[1] = lines[1], lines[0]
        path.write_text("\n".join(lines) + "\n", "utf-8")
        result = verify_manifest(path)
        assert not result.ok

    def test_unparseable_record_localized(self, tmp_path):
        path = self._write(tmp_path)
        lines = path.read_text("utf-8").splitlines()
        lines[4] = "garbage{"
        path.write_text("\n".join(lines) + "\n", "utf-8")
        result = verify_manifest(path)
        assert not result.ok
        assert result.first_divergence == 4


class TestSideFollowing:
    def test_qa_and_tasks_follow_document_side(self, tmp_path):
        records = synthetic_records(30, seed=8)
        path = tmp_path / "c.jsonl"
        write_jsonl(records, path)
        corpus = ingest_jsonl(path, name="c", seed=0)
        train, test = split_corpus(corpus, SplitSpec(test_fraction=0.25, seed=13))
        pairs = [
            QAPair(doc_id=rec["id"], task="generation", question="Q?", answer="A.")
            for rec in records
        ]
        train_ids, test_ids = train.ids(), test.ids()
        routed_train = [p for p in pairs if p.doc_id in train_ids]
        routed_test = [p for p in pairs if p.doc_id in test_ids]
        assert len(routed_train) + len(routed_test) == len(pairs)
        assert {p.doc_id for p in routed_train} <= train_ids
        assert {p.doc_id for p in routed_test} <= test_ids


class TestRecordBuilders:
    def test_task_record_carries_policy(self):
        doc = document_from_record(synthetic_records(1)[0])
        suite = build_suite(analyze_document(doc), seed=0)
        memorization = suite.by_kind("memorization")[0]
        record = task_record(memorization)
        assert record["loss_policy"] == "full_sequence"
        assert record["payload"]["kind"] == "memorization"

    def test_qa_record_shape(self):
        pair = QAPair(doc_id="d", task="generation", question="Q?", answer="A.")
        record = attach_loss_policy(qa_record(pair))
        assert record["kind"] == "qa"
        assert record["loss_policy"] == "answer_only"
