"""Generate the nine self-supervised study tasks for one document.

One record per kind per document (the NLI generator may add a corrupted
false statement as a second record). All sampling draws from per-document
streams keyed by (corpus seed, doc id, kind), so suites are a pure
function of (seed, document, config).
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path

from .analysis import AnalyzedDocument, EntitySpan, sentence_tokens
from .errors import DataError
from .rng import stream_for

FULL_SEQUENCE = "full_sequence"
ANSWER_ONLY = "answer_only"

MEMORIZATION = "memorization"
SUMMARIZATION = "summarization"
GIST = "gist"
NLI = "nli"
TEACHING = "teaching"
FLASHCARDS = "flashcards"
CLOZE = "cloze"
MULTICHOICE = "multichoice"
COMPLETION = "completion"

KIND_ORDER = (
    MEMORIZATION,
    SUMMARIZATION,
    GIST,
    NLI,
    TEACHING,
    FLASHCARDS,
    CLOZE,
    MULTICHOICE,
    COMPLETION,
)

NLI_OPTIONS = ("Yes", "It's impossible to say", "No")
BLANK = "--"

TEMPLATES = {
    MEMORIZATION: "<{title} - Wikipedia> {body}",
    SUMMARIZATION: "Write a title: {document}",
    GIST: "Highlight the key information within the article: {document}",
    NLI: (
        "{document} Based on the article above can we conclude that\n"
        "<{title}> {statement}\nOptions:\n{options}"
    ),
    TEACHING: "Tell me about {title}.",
    FLASHCARDS: (
        "Generate a concrete description about {title} "
        "based on the following keywords:\n{keywords}"
    ),
    CLOZE: "<{title}> {blanked}",
    MULTICHOICE: "<{title}> {blanked}\nOptions:\n{options}",
    COMPLETION: "<{title}> {prefix}:",
}

_PLACEHOLDER = re.compile(r"\{(\w+)\}")


def fill(template: str, **values) -> str:
    """Single-pass placeholder substitution; braces in values stay literal."""
    return _PLACEHOLDER.sub(
        lambda m: str(values[m.group(1)]) if m.group(1) in values else m.group(0),
        template,
    )


def options_block(options) -> str:
    return "\n".join(f"- {opt}" for opt in options)


@dataclass
class TaskConfig:
    enabled: tuple[str, ...] = KIND_ORDER
    option_count: int = 4
    multiplicity: dict = field(default_factory=dict)
    templates: dict = field(default_factory=dict)

    def __post_init__(self):
        unknown = [k for k in self.enabled if k not in KIND_ORDER]
        if unknown:
            raise DataError(f"unknown task kinds in config: {unknown}")
        if self.option_count < 2:
            raise DataError("option_count must be at least 2")

    def template(self, kind: str) -> str:
        return self.templates.get(kind, TEMPLATES[kind])

    def cap(self, kind: str) -> int:
        return self.multiplicity.get(kind, 2 if kind == NLI else 1)

    @classmethod
    def from_file(cls, path) -> "TaskConfig":
        raw = json.loads(Path(path).read_text("utf-8"))
        return cls(
            enabled=tuple(raw.get("enabled", KIND_ORDER)),
            option_count=int(raw.get("option_count", 4)),
            multiplicity=dict(raw.get("multiplicity", {})),
            templates=dict(raw.get("templates", {})),
        )


@dataclass(frozen=True)
class TaskExample:
    kind: str
    question: str
    answer: str
    doc_id: str
    loss_policy: str
    options: tuple[str, ...] | None = None
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.answer:
            raise DataError(f"{self.kind} example for {self.doc_id} has empty answer")
        wants_options = self.kind in (NLI, MULTICHOICE)
        if wants_options != (self.options is not None):
            raise DataError(f"options presence mismatch for kind {self.kind}")
        expected = FULL_SEQUENCE if self.kind == MEMORIZATION else ANSWER_ONLY
        if self.loss_policy != expected:
            raise DataError(f"loss policy {self.loss_policy} invalid for {self.kind}")

    def to_record(self) -> dict:
        record = {
            "kind": self.kind,
            "question": self.question,
            "answer": self.answer,
            "doc_id": self.doc_id,
            "provenance": self.provenance,
        }
        if self.options is not None:
            record["options"] = list(self.options)
        return record


@dataclass(frozen=True)
class TaskSuite:
    doc_id: str
    examples: tuple[TaskExample, ...]
    counts: dict

    def by_kind(self, kind: str) -> list[TaskExample]:
        return [ex for ex in self.examples if ex.kind == kind]


def render_document(adoc: AnalyzedDocument, config: TaskConfig | None = None) -> str:
    template = (config or TaskConfig()).template(MEMORIZATION)
    return fill(template, title=adoc.doc.title, body=adoc.doc.body)


def _gist_keywords(adoc: AnalyzedDocument) -> list[str]:
    seen = []
    for entity in adoc.entities:
        if entity.surface not in seen:
            seen.append(entity.surface)
    return seen


def gen_memorization(adoc: AnalyzedDocument, config: TaskConfig | None = None) -> TaskExample:
    config = config or TaskConfig()
    return TaskExample(
        kind=MEMORIZATION,
        question="",
        answer=render_document(adoc, config),
        doc_id=adoc.doc.id,
        loss_policy=FULL_SEQUENCE,
    )


def gen_summarization(adoc: AnalyzedDocument, config: TaskConfig | None = None) -> TaskExample:
    config = config or TaskConfig()
    question = fill(config.template(SUMMARIZATION), document=render_document(adoc, config))
    return TaskExample(
        kind=SUMMARIZATION,
        question=question,
        answer=adoc.doc.title,
        doc_id=adoc.doc.id,
        loss_policy=ANSWER_ONLY,
    )


def gen_gist(adoc: AnalyzedDocument, config: TaskConfig | None = None) -> TaskExample | None:
    config = config or TaskConfig()
    keywords = _gist_keywords(adoc)
    if not keywords:
        return None
    question = fill(config.template(GIST), document=render_document(adoc, config))
    return TaskExample(
        kind=GIST,
        question=question,
        answer="; ".join(keywords),
        doc_id=adoc.doc.id,
        loss_policy=ANSWER_ONLY,
    )


def _nli_question(adoc, statement, config):
    return fill(
        config.template(NLI),
        document=render_document(adoc, config),
        title=adoc.doc.title,
        statement=statement,
        options=options_block(NLI_OPTIONS),
    )


def gen_nli_pair(adoc: AnalyzedDocument, rng, config: TaskConfig | None = None) -> list[TaskExample]:
    """True statement from a sampled sentence, plus a corrupted false one
    when a same-kind entity from another sentence can substitute in."""
    config = config or TaskConfig()
    if not adoc.sentences:
        return []
    sent_index = rng.below(len(adoc.sentences))
    span = adoc.sentences[sent_index]
    statement = adoc.doc.body[span.start : span.end]

    examples = [
        TaskExample(
            kind=NLI,
            question=_nli_question(adoc, statement, config),
            answer="Yes",
            doc_id=adoc.doc.id,
            loss_policy=ANSWER_ONLY,
            options=NLI_OPTIONS,
            provenance={"sentence_index": sent_index, "corrupted": False},
        )
    ]

    inside = [
        e for e in adoc.entities if span.start <= e.start and e.end <= span.end
    ]
    outside = [e for e in adoc.entities if e.end <= span.start or e.start >= span.end]
    candidates = [
        (target, repl)
        for target in inside
        for repl in outside
        if repl.kind == target.kind and repl.surface != target.surface
    ]
    if len(adoc.sentences) >= 2 and candidates:
        target, repl = candidates[rng.below(len(candidates))]
        rel_start = target.start - span.start
        rel_end = target.end - span.start
        corrupted = statement[:rel_start] + repl.surface + statement[rel_end:]
        examples.append(
            TaskExample(
                kind=NLI,
                question=_nli_question(adoc, corrupted, config),
                answer="No",
                doc_id=adoc.doc.id,
                loss_policy=ANSWER_ONLY,
                options=NLI_OPTIONS,
                provenance={
                    "sentence_index": sent_index,
                    "corrupted": True,
                    "target_start": rel_start,
                    "target_end": rel_end,
                    "original_surface": target.surface,
                    "replacement_surface": repl.surface,
                },
            )
        )
    return examples


def gen_teaching(adoc: AnalyzedDocument, config: TaskConfig | None = None) -> TaskExample:
    config = config or TaskConfig()
    return TaskExample(
        kind=TEACHING,
        question=fill(config.template(TEACHING), title=adoc.doc.title),
        answer=adoc.doc.body,
        doc_id=adoc.doc.id,
        loss_policy=ANSWER_ONLY,
    )


def gen_flashcards(adoc: AnalyzedDocument, config: TaskConfig | None = None) -> TaskExample | None:
    config = config or TaskConfig()
    keywords = _gist_keywords(adoc)
    if not keywords:
        return None
    question = fill(
        config.template(FLASHCARDS), title=adoc.doc.title, keywords="; ".join(keywords)
    )
    return TaskExample(
        kind=FLASHCARDS,
        question=question,
        answer=adoc.doc.body,
        doc_id=adoc.doc.id,
        loss_policy=ANSWER_ONLY,
    )


def _blank_body(adoc: AnalyzedDocument, entity: EntitySpan) -> str:
    body = adoc.doc.body
    return body[: entity.start] + BLANK + body[entity.end :]


def gen_cloze(adoc: AnalyzedDocument, rng, config: TaskConfig | None = None) -> TaskExample | None:
    config = config or TaskConfig()
    if not adoc.entities:
        return None
    entity = adoc.entities[rng.below(len(adoc.entities))]
    question = fill(
        config.template(CLOZE), title=adoc.doc.title, blanked=_blank_body(adoc, entity)
    )
    return TaskExample(
        kind=CLOZE,
        question=question,
        answer=entity.surface,
        doc_id=adoc.doc.id,
        loss_policy=ANSWER_ONLY,
        provenance={"entity_start": entity.start, "entity_end": entity.end},
    )


def gen_multichoice(adoc: AnalyzedDocument, rng, config: TaskConfig | None = None) -> TaskExample | None:
    config = config or TaskConfig()
    surfaces = _gist_keywords(adoc)
    if len(surfaces) < config.option_count:
        return None
    entity = adoc.entities[rng.below(len(adoc.entities))]
    pool = [s for s in surfaces if s != entity.surface]
    picked = rng.sample_indices(len(pool), config.option_count - 1)
    options = [entity.surface] + [pool[i] for i in picked]
    rng.shuffle(options)
    question = fill(
        config.template(MULTICHOICE),
        title=adoc.doc.title,
        blanked=_blank_body(adoc, entity),
        options=options_block(options),
    )
    return TaskExample(
        kind=MULTICHOICE,
        question=question,
        answer=entity.surface,
        doc_id=adoc.doc.id,
        loss_policy=ANSWER_ONLY,
        options=tuple(options),
        provenance={"entity_start": entity.start, "entity_end": entity.end},
    )


def _completion_split(sentence: str, positions: list[int]) -> tuple[int, str] | None:
    """Character split point after the final preposition, or None if the
    sentence cannot be rebuilt as ``prefix + " " + answer + "."``."""
    if not positions or not sentence.endswith("."):
        return None
    tokens = sentence_tokens(sentence)
    prep = tokens[positions[-1]]
    if prep.end >= len(sentence.rstrip(".")):
        return None
    prefix = sentence[: prep.end]
    rest = sentence[prep.end :]
    if not rest.startswith(" "):
        return None
    answer = rest[1:-1]
    if not answer.strip() or "\n" in rest or sentence != prefix + " " + answer + ".":
        return None
    return prep.end, answer


def gen_completion(adoc: AnalyzedDocument, rng, config: TaskConfig | None = None) -> TaskExample | None:
    config = config or TaskConfig()
    qualifying = []
    for span in adoc.sentences:
        sentence = adoc.doc.body[span.start : span.end]
        split = _completion_split(sentence, adoc.prepositions[span.index])
        if split is not None:
            qualifying.append((span.index, sentence, split))
    if not qualifying:
        return None
    sent_index, sentence, (cut, answer) = qualifying[rng.below(len(qualifying))]
    question = fill(config.template(COMPLETION), title=adoc.doc.title, prefix=sentence[:cut])
    return TaskExample(
        kind=COMPLETION,
        question=question,
        answer=answer,
        doc_id=adoc.doc.id,
        loss_policy=ANSWER_ONLY,
        provenance={"sentence_index": sent_index, "split_offset": cut},
    )


def build_suite(adoc: AnalyzedDocument, config: TaskConfig | None = None, seed: int = 0) -> TaskSuite:
    """Run every enabled generator in fixed order, honoring skip rules."""
    config = config or TaskConfig()
    doc_id = adoc.doc.id
    examples: list[TaskExample] = []

    def rng_for(kind: str):
        return stream_for(seed, doc_id, kind)

    for kind in KIND_ORDER:
        if kind not in config.enabled or config.cap(kind) < 1:
            continue
        if kind == MEMORIZATION:
            produced = [gen_memorization(adoc, config)]
        elif kind == SUMMARIZATION:
            produced = [gen_summarization(adoc, config)]
        elif kind == GIST:
            produced = [gen_gist(adoc, config)]
        elif kind == NLI:
            produced = gen_nli_pair(adoc, rng_for(kind), config)
        elif kind == TEACHING:
            produced = [gen_teaching(adoc, config)]
        elif kind == FLASHCARDS:
            produced = [gen_flashcards(adoc, config)]
        elif kind == CLOZE:
            produced = [gen_cloze(adoc, rng_for(kind), config)]
        elif kind == MULTICHOICE:
            produced = [gen_multichoice(adoc, rng_for(kind), config)]
        else:
            produced = [gen_completion(adoc, rng_for(kind), config)]
        produced = [ex for ex in produced if ex is not None][: config.cap(kind)]
        examples.extend(produced)

    counts = {kind: 0 for kind in config.enabled}
    for ex in examples:
        counts[ex.kind] += 1
    return TaskSuite(doc_id=doc_id, examples=tuple(examples), counts=counts)


READING_PREAMBLE = "Answer the questions based on the article:"


def format_reading_comprehension(suite: TaskSuite, config: TaskConfig | None = None) -> str:
    """Concatenate the document and its Q/A blocks into one training text.

    Questions that embed the full document rendering (summarization, gist,
    NLI) drop it, since the article already opens the text.
    """
    memorization = suite.by_kind(MEMORIZATION)
    if not memorization:
        raise DataError(f"suite for {suite.doc_id} has no memorization example")
    doc_text = memorization[0].answer

    blocks = [doc_text, READING_PREAMBLE]
    for kind in KIND_ORDER:
        if kind == MEMORIZATION:
            continue
        for example in suite.by_kind(kind):
            question = example.question
            if question.endswith(doc_text):
                question = question[: -len(doc_text)].rstrip()
            elif question.startswith(doc_text):
                question = question[len(doc_text) :].lstrip()
            blocks.append(f"Question: {question}\nAnswer:{example.answer}")
    return "\n\n".join(blocks)
