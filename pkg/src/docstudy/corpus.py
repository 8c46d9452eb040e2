"""Canonical document model and JSONL corpus ingestion.

A corpus is an ordered list of single-paragraph documents with stable,
unique ids. Ingestion normalizes whitespace, strips wiki-style header
decoration from titles, and truncates bodies to their first paragraph.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field
from pathlib import Path

from .errors import DataError

_WIKI_SUFFIX = " - Wikipedia"
_PARA_BREAK = re.compile(r"\n[ \t]*\n")


class HeaderError(DataError):
    """Header stripped down to an empty title."""


class MalformedLineError(DataError):
    def __init__(self, path, line_no: int, reason: str):
        super().__init__(f"{path}:{line_no}: {reason}")
        self.line_no = line_no


class DuplicateIdError(DataError):
    def __init__(self, doc_id: str, first_line: int, second_line: int):
        super().__init__(
            f"duplicate document id {doc_id!r} on lines {first_line} and {second_line}"
        )
        self.doc_id = doc_id
        self.lines = (first_line, second_line)


def parse_header(header: str) -> str:
    """Extract the bare title from a ``<Title - Wikipedia>`` header line.

    Inputs without surrounding angle brackets are returned trimmed and
    otherwise untouched, which makes the function idempotent.
    """
    title = header.strip()
    while title.startswith("<") and title.endswith(">") and len(title) >= 2:
        inner = title[1:-1].rstrip()
        if inner.endswith(_WIKI_SUFFIX):
            inner = inner[: -len(_WIKI_SUFFIX)]
        title = inner.strip()
    if not title:
        raise HeaderError(f"header {header!r} leaves an empty title")
    return title


def first_paragraph(article_text: str) -> str:
    """Text up to (excluding) the first blank-line separator."""
    if not article_text:
        raise DataError("first_paragraph: empty article text")
    match = _PARA_BREAK.search(article_text)
    if match:
        return article_text[: match.start()]
    return article_text


def normalize_text(text: str) -> str:
    """Collapse space/tab runs inside lines, keep newlines, trim edges."""
    text = text.replace("\r\n", "\n").replace("\r", "\n")
    lines = [re.sub(r"[ \t]+", " ", line).strip() for line in text.split("\n")]
    return "\n".join(lines).strip("\n")


def content_id(title: str, body: str) -> str:
    """Deterministic lowercase-hex id derived from title and body."""
    digest = hashlib.sha256()
    digest.update(title.encode("utf-8"))
    digest.update(b"\x1e")
    digest.update(body.encode("utf-8"))
    return digest.hexdigest()[:16]


@dataclass(frozen=True)
class RawDocument:
    """A titled article body (its first paragraph) plus provenance."""

    id: str
    title: str
    body: str
    source: str = ""
    collected_at: str | None = None

    def __post_init__(self):
        if not self.id:
            raise DataError("document id must be non-empty")
        if not self.title or "\n" in self.title:
            raise DataError(f"bad title for document {self.id!r}")
        if not self.body.strip():
            raise DataError(f"empty body for document {self.id!r}")

    def to_record(self) -> dict:
        record = {"id": self.id, "title": self.title, "body": self.body}
        if self.source:
            record["source"] = self.source
        if self.collected_at is not None:
            record["collected_at"] = self.collected_at
        return record


@dataclass(frozen=True)
class Corpus:
    """Immutable ordered document collection with distinct ids."""

    name: str
    seed: int
    documents: tuple[RawDocument, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "documents", tuple(self.documents))
        seen: dict[str, int] = {}
        for pos, doc in enumerate(self.documents):
            if doc.id in seen:
                raise DuplicateIdError(doc.id, seen[doc.id] + 1, pos + 1)
            seen[doc.id] = pos

    def __len__(self) -> int:
        return len(self.documents)

    def __iter__(self):
        return iter(self.documents)

    def ids(self) -> set[str]:
        return {doc.id for doc in self.documents}

    def titles(self) -> list[str]:
        return [doc.title for doc in self.documents]

    def by_id(self, doc_id: str) -> RawDocument:
        for doc in self.documents:
            if doc.id == doc_id:
                return doc
        raise KeyError(doc_id)


def document_from_record(record: dict, line_ref: str = "<record>") -> RawDocument:
    """Build a normalized document from one JSONL record."""
    title_raw = record.get("title")
    body_raw = record.get("body")
    if not isinstance(title_raw, str) or not isinstance(body_raw, str):
        raise DataError(f"{line_ref}: record needs string 'title' and 'body' fields")
    if "\n" in title_raw.strip("\n"):
        raise DataError(f"{line_ref}: title must be a single line")
    title = parse_header(normalize_text(title_raw))
    body = first_paragraph(normalize_text(body_raw)) if body_raw.strip() else ""
    if not body:
        raise DataError(f"{line_ref}: body is empty after normalization")
    doc_id = record.get("id") or content_id(title, body)
    return RawDocument(
        id=str(doc_id),
        title=title,
        body=body,
        source=record.get("source", "") or "",
        collected_at=record.get("collected_at"),
    )


def ingest_jsonl(path, name: str | None = None, seed: int = 0) -> Corpus:
    """Read one-record-per-line JSONL into a Corpus.

    Ids are taken from the records when present, otherwise derived from
    the content hash. Duplicate ids are rejected with both line numbers.
    """
    path = Path(path)
    documents: list[RawDocument] = []
    seen: dict[str, int] = {}
    with open(path, encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, 1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedLineError(path, line_no, f"invalid JSON ({exc.msg})") from exc
            if not isinstance(record, dict):
                raise MalformedLineError(path, line_no, "record is not a JSON object")
            try:
                doc = document_from_record(record, line_ref=f"{path}:{line_no}")
            except HeaderError:
                raise
            except DataError as exc:
                raise MalformedLineError(path, line_no, str(exc)) from exc
            if doc.id in seen:
                raise DuplicateIdError(doc.id, seen[doc.id], line_no)
            seen[doc.id] = line_no
            documents.append(doc)
    return Corpus(name=name or path.stem, seed=seed, documents=tuple(documents))


def serialize_corpus(corpus: Corpus) -> bytes:
    """Canonical JSONL bytes: sorted keys, UTF-8, LF line endings."""
    lines = [
        json.dumps(doc.to_record(), sort_keys=True, ensure_ascii=False, separators=(",", ":"))
        for doc in corpus.documents
    ]
    return ("\n".join(lines) + "\n" if lines else "").encode("utf-8")


def write_corpus(corpus: Corpus, path) -> None:
    Path(path).write_bytes(serialize_corpus(corpus))
