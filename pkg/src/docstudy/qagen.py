"""Prompt construction and response parsing for external QA generation.

Prompts are byte-stable package assets instantiated per document; the
chat client speaks a generic JSON-over-HTTP chat-completion protocol and
persists every raw response next to its parsed pairs so that reruns
replay from disk instead of re-billing.
"""

from __future__ import annotations

import json
import logging
import os
import re
import threading
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .corpus import RawDocument
from .errors import DataError, UsageError

logger = logging.getLogger(__name__)

TASK_GENERATION = "generation"
TASK_NLI = "nli"

NLI_OPTION_STRINGS = ("Yes", "It's impossible to say", "No")
LABEL_YES = "Yes"
LABEL_NO = "No"
LABEL_IMPOSSIBLE = "Impossible"

_LABEL_CANON = {
    "yes": LABEL_YES,
    "no": LABEL_NO,
    "impossible": LABEL_IMPOSSIBLE,
    "it's impossible to say": LABEL_IMPOSSIBLE,
    "its impossible to say": LABEL_IMPOSSIBLE,
}

ENDPOINT_ENV = "DOCSTUDY_CHAT_ENDPOINT"
API_KEY_ENV = "DOCSTUDY_API_KEY"


class ParseError(DataError):
    """Raw response contained no parseable question/answer block."""


def _prompt_asset(name: str) -> str:
    return resources.files("docstudy").joinpath("data", "prompts", name).read_text("utf-8")


def _instantiate(template: str, **values: str) -> str:
    # plain replace keeps braces inside substituted values literal and
    # leaves the exemplar blocks untouched
    out = template
    for key, value in values.items():
        out = out.replace("{" + key + "}", value)
    return out.rstrip("\n")


def build_generation_prompt(doc: RawDocument) -> str:
    if not doc.title or not doc.body:
        raise DataError("document needs a title and body")
    return _instantiate(_prompt_asset("qa_generation.txt"), topic=doc.title, paragraph=doc.body)


def build_nli_prompt(doc: RawDocument) -> str:
    if not doc.title or not doc.body:
        raise DataError("document needs a title and body")
    return _instantiate(_prompt_asset("qa_nli.txt"), topic=doc.title, paragraph=doc.body)


def build_type_prompt(doc: RawDocument, qas: list["QAPair"]) -> str:
    if not qas:
        raise DataError("type annotation prompt needs at least one QA pair")
    qa_text = "\n".join(f"Question: {qa.question}\nAnswer: {qa.answer}" for qa in qas)
    return _instantiate(_prompt_asset("qa_types.txt"), paragraph=doc.body, QA=qa_text)


def five_shot_eval_prompt() -> str:
    """Static few-shot preamble for downstream open-ended evaluation."""
    return _prompt_asset("eval_five_shot.txt").rstrip("\n")


@dataclass(frozen=True)
class QAPair:
    doc_id: str
    task: str
    question: str
    answer: str
    options: tuple[str, ...] | None = None
    answer_label: str | None = None

    def __post_init__(self):
        if self.task == TASK_NLI:
            if self.answer_label not in (LABEL_YES, LABEL_NO, LABEL_IMPOSSIBLE):
                raise DataError(f"bad NLI label {self.answer_label!r}")
        elif not self.answer:
            raise DataError("generation answer must be non-empty")

    def to_record(self) -> dict:
        record = {
            "doc_id": self.doc_id,
            "task": self.task,
            "question": self.question,
            "answer": self.answer,
        }
        if self.options is not None:
            record["options"] = list(self.options)
        if self.answer_label is not None:
            record["answer_label"] = self.answer_label
        return record

    @classmethod
    def from_record(cls, record: dict) -> "QAPair":
        options = record.get("options")
        return cls(
            doc_id=record["doc_id"],
            task=record["task"],
            question=record["question"],
            answer=record["answer"],
            options=tuple(options) if options else None,
            answer_label=record.get("answer_label"),
        )


def canonical_label(text: str) -> str | None:
    return _LABEL_CANON.get(text.strip().strip(".").lower())


@dataclass
class ParsedResponse:
    pairs: list[QAPair]
    discarded: int = 0


_QUESTION_MARK = re.compile(r"(?:^|\n)Question:", re.IGNORECASE)
_ANSWER_MARK = re.compile(r"\nAnswer:", re.IGNORECASE)
_OPTIONS_MARK = re.compile(r"\s*Options:\s*", re.IGNORECASE)


def parse_qa_response(raw: str, task: str, doc_id: str = "") -> ParsedResponse:
    """Scan alternating Question/Answer blocks out of a raw completion.

    The model often continues from the prompt's trailing ``Question:``
    sentinel, so text before the first explicit marker is treated as the
    opening question. Trailing or malformed blocks are dropped and counted.
    """
    if not raw.strip():
        raise ParseError("empty response")
    text = raw.strip()
    if not _QUESTION_MARK.match(text):
        text = "Question: " + text

    pairs: list[QAPair] = []
    discarded = 0
    chunks = _QUESTION_MARK.split(text)
    for chunk in chunks:
        if not chunk.strip():
            continue
        split = _ANSWER_MARK.split(chunk, maxsplit=1)
        if len(split) != 2:
            discarded += 1
            continue
        question_part, answer_part = split
        answer = answer_part.strip()
        question = question_part.strip()
        options = None
        label = None
        if task == TASK_NLI:
            opt_split = _OPTIONS_MARK.split(question_part, maxsplit=1)
            question = opt_split[0].strip()
            options = NLI_OPTION_STRINGS
            label = canonical_label(answer.splitlines()[0]) if answer else None
            if label is None:
                discarded += 1
                continue
            answer = NLI_OPTION_STRINGS[(LABEL_YES, LABEL_IMPOSSIBLE, LABEL_NO).index(label)]
        else:
            answer = answer.strip()
        if not question or not answer:
            discarded += 1
            continue
        pairs.append(
            QAPair(
                doc_id=doc_id,
                task=task,
                question=question,
                answer=answer,
                options=options,
                answer_label=label,
            )
        )
    if not pairs:
        raise ParseError(f"no question/answer blocks found (discarded {discarded})")
    if discarded:
        logger.warning("discarded %d malformed block(s) for doc %s", discarded, doc_id)
    return ParsedResponse(pairs=pairs, discarded=discarded)


def render_qa_pairs(pairs: list[QAPair]) -> str:
    """Canonical block rendering, the inverse of parse_qa_response."""
    blocks = []
    for pair in pairs:
        if pair.task == TASK_NLI:
            blocks.append(
                f"Question: {pair.question}\nOptions:\n"
                + "\n".join(f"- {o}" for o in pair.options or NLI_OPTION_STRINGS)
                + f"\nAnswer: {pair.answer}"
            )
        else:
            blocks.append(f"Question: {pair.question}\nAnswer: {pair.answer}")
    return "\n".join(blocks)


@dataclass(frozen=True)
class ChatRequest:
    model: str
    prompt: str
    temperature: float
    max_tokens: int

    def to_payload(self) -> dict:
        return {
            "model": self.model,
            "messages": [{"role": "user", "content": self.prompt}],
            "temperature": self.temperature,
            "max_tokens": self.max_tokens,
        }


@dataclass(frozen=True)
class ChatResponse:
    text: str
    finish_reason: str = ""
    usage: dict = field(default_factory=dict)


class ChatError(DataError):
    """Chat endpoint failed permanently or returned malformed output."""


_TRANSIENT_STATUSES = {429, 500, 502, 503, 504}


def _http_transport(url: str, headers: dict, payload: dict, timeout: float):
    import requests

    try:
        response = requests.post(url, headers=headers, json=payload, timeout=timeout)
    except requests.RequestException as exc:
        raise ConnectionError(str(exc)) from exc
    return response.status_code, response.json() if response.content else {}


class ChatClient:
    """Thread-safe chat-completion client with retry and bounded dispatch."""

    def __init__(
        self,
        endpoint: str | None = None,
        api_key: str | None = None,
        model: str = "gpt-4",
        temperature: float = 0.0,
        max_tokens: int = 2048,
        max_retries: int = 5,
        backoff: float = 0.5,
        max_concurrency: int = 4,
        timeout: float = 60.0,
        transport=None,
        sleep=time.sleep,
    ):
        self.endpoint = endpoint or os.environ.get(ENDPOINT_ENV, "")
        self.api_key = api_key if api_key is not None else os.environ.get(API_KEY_ENV, "")
        if not self.endpoint:
            raise UsageError(f"no chat endpoint configured (set {ENDPOINT_ENV})")
        self.model = model
        self.temperature = temperature
        self.max_tokens = max_tokens
        self.max_retries = max_retries
        self.backoff = backoff
        self.timeout = timeout
        self._transport = transport or _http_transport
        self._sleep = sleep
        self._gate = threading.Semaphore(max(1, max_concurrency))

    def complete(self, prompt: str) -> ChatResponse:
        request = ChatRequest(
            model=self.model,
            prompt=prompt,
            temperature=self.temperature,
            max_tokens=self.max_tokens,
        )
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"

        last_error = "no attempt made"
        for attempt in range(self.max_retries + 1):
            if attempt:
                self._sleep(self.backoff * (2 ** (attempt - 1)))
            try:
                with self._gate:
                    status, body = self._transport(
                        self.endpoint, headers, request.to_payload(), self.timeout
                    )
            except ConnectionError as exc:
                last_error = f"connection error: {exc}"
                continue
            if status in _TRANSIENT_STATUSES:
                last_error = f"transient HTTP {status}"
                continue
            if status != 200:
                raise ChatError(f"chat endpoint returned HTTP {status}: {body}")
            try:
                choice = body["choices"][0]
                text = choice["message"]["content"]
            except (KeyError, IndexError, TypeError) as exc:
                raise ChatError(f"malformed chat response: {body}") from exc
            return ChatResponse(
                text=text,
                finish_reason=choice.get("finish_reason", ""),
                usage=body.get("usage", {}),
            )
        raise ChatError(f"chat request failed after {self.max_retries + 1} attempts ({last_error})")


PROMPT_BUILDERS = {TASK_GENERATION: build_generation_prompt, TASK_NLI: build_nli_prompt}


def cache_path(cache_dir, doc_id: str, task: str) -> Path:
    return Path(cache_dir) / f"{doc_id}.{task}.json"


def generate_for_document(
    doc: RawDocument, task: str, client: ChatClient | None, cache_dir
) -> ParsedResponse:
    """Fetch-or-replay the QA pairs for one document.

    A cached (request, raw response, parsed pairs) file short-circuits the
    HTTP call entirely; fresh responses are written there before return.
    """
    if task not in PROMPT_BUILDERS:
        raise UsageError(f"unknown QA task {task!r}")
    path = cache_path(cache_dir, doc.id, task)
    if path.exists():
        cached = json.loads(path.read_text("utf-8"))
        pairs = [QAPair.from_record(rec) for rec in cached["pairs"]]
        return ParsedResponse(pairs=pairs, discarded=cached.get("discarded", 0))
    if client is None:
        raise UsageError(f"no cached response for ({doc.id}, {task}) and no client configured")

    prompt = PROMPT_BUILDERS[task](doc)
    response = client.complete(prompt)
    parsed = parse_qa_response(response.text, task, doc_id=doc.id)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {
        "request": {
            "model": client.model,
            "prompt": prompt,
            "temperature": client.temperature,
            "max_tokens": client.max_tokens,
        },
        "response": {
            "text": response.text,
            "finish_reason": response.finish_reason,
            "usage": response.usage,
        },
        "pairs": [pair.to_record() for pair in parsed.pairs],
        "discarded": parsed.discarded,
    }
    tmp = path.with_suffix(".tmp")
    tmp.write_text(json.dumps(payload, ensure_ascii=False, indent=2), "utf-8")
    tmp.replace(path)
    return parsed


def write_qa_jsonl(pairs: list[QAPair], path) -> None:
    lines = [
        json.dumps(pair.to_record(), sort_keys=True, ensure_ascii=False, separators=(",", ":"))
        for pair in pairs
    ]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), "utf-8")


def read_qa_jsonl(path) -> list[QAPair]:
    pairs = []
    for line in Path(path).read_text("utf-8").splitlines():
        if line.strip():
            pairs.append(QAPair.from_record(json.loads(line)))
    return pairs
