"""Deterministic text analysis: sentences, entities, prepositions, words.

Rule-based replacements for statistical taggers so that task generation
is reproducible bit-for-bit. All offsets are Unicode scalar offsets into
the document body, never bytes.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources

from .corpus import RawDocument

_MONTHS = (
    "January|February|March|April|May|June|July|August|September|October|November|December"
)
_DATE_PATTERNS = [
    re.compile(rf"\b(?:{_MONTHS}) \d{{1,2}}(?:, \d{{4}})?\b"),
    re.compile(rf"\b\d{{1,2}} (?:{_MONTHS}) \d{{4}}\b"),
    re.compile(r"\b[12]\d{3}\b"),
]
_NUMBER = re.compile(r"\d+(?:[.,]\d+)+|\d+")
_ACRONYM = re.compile(r"[A-Z]{2,6}")
_INITIAL = re.compile(r"[A-Z]\.")
_WORD = re.compile(r"[^\W_]+")
_TERMINAL = re.compile(r"[.?!]+")
_SPLIT_TRIGGER = "\"'“‘([0123456789"

_CONNECTORS = {
    "of", "the", "de", "del", "della", "di", "da", "du", "der", "den",
    "van", "von", "la", "le", "les", "los", "las", "dos", "bin", "al",
    "ter", "ten", "zu", "y", "e",
}

_LEAD_PUNCT = "([{<\"'“‘«"
_TRAIL_PUNCT = ")]}>\"'”’»,;:!?"


@lru_cache(maxsize=None)
def _packaged_lines(filename: str) -> tuple[str, ...]:
    text = resources.files("docstudy").joinpath("data", filename).read_text("utf-8")
    return tuple(line.strip() for line in text.splitlines() if line.strip())


def load_lexicon(path=None) -> frozenset[str]:
    """Preposition lexicon; single words plus multiword units like 'as well as'."""
    if path is None:
        entries = _packaged_lines("prepositions.txt")
    else:
        entries = tuple(
            line.strip() for line in open(path, encoding="utf-8") if line.strip()
        )
    return frozenset(entry.lower() for entry in entries)


def load_abbreviations(path=None) -> frozenset[str]:
    if path is None:
        entries = _packaged_lines("abbreviations.txt")
    else:
        entries = tuple(
            line.strip() for line in open(path, encoding="utf-8") if line.strip()
        )
    return frozenset(entries)


@dataclass(frozen=True)
class SentenceSpan:
    start: int
    end: int
    index: int


@dataclass(frozen=True)
class EntitySpan:
    start: int
    end: int
    surface: str
    kind: str  # name | date | number | acronym | other


@dataclass(frozen=True)
class Token:
    """One whitespace-delimited token with its punctuation-stripped core."""

    start: int
    end: int
    core_start: int
    core_end: int
    core: str


def sentence_tokens(text: str) -> list[Token]:
    tokens = []
    for match in re.finditer(r"\S+", text):
        raw = match.group()
        lead = 0
        while lead < len(raw) and raw[lead] in _LEAD_PUNCT:
            lead += 1
        trail = len(raw)
        while trail > lead and raw[trail - 1] in _TRAIL_PUNCT:
            trail -= 1
        core = raw[lead:trail]
        # keep a final period only for initials ("W.") and dotted
        # abbreviations ("U.S."), strip it from ordinary words
        while core.endswith(".") and not (_INITIAL.fullmatch(core) or "." in core[:-1]):
            core = core[:-1]
            trail -= 1
        tokens.append(
            Token(
                start=match.start(),
                end=match.end(),
                core_start=match.start() + lead,
                core_end=match.start() + trail,
                core=core,
            )
        )
    return tokens


def segment_sentences(body: str, abbreviations: frozenset[str] | None = None) -> list[SentenceSpan]:
    """Split on terminal punctuation followed by a new-sentence trigger.

    Protected: listed abbreviations, single-capital initials, and any
    candidate inside an open parenthesis. A body without terminal
    punctuation yields a single span.
    """
    if not body.strip():
        return []
    abbrevs = abbreviations if abbreviations is not None else load_abbreviations()
    abbrevs_lower = {a.lower() for a in abbrevs}

    boundaries = []
    depth = 0
    pos = 0
    for match in _TERMINAL.finditer(body):
        depth += body.count("(", pos, match.start()) - body.count(")", pos, match.start())
        pos = match.start()
        end = match.end()
        rest = body[end:]
        stripped = rest.lstrip()
        if not stripped or stripped == rest:
            continue  # end of text, or no whitespace after the punctuation
        nxt = stripped[0]
        if not (nxt.isupper() or nxt in _SPLIT_TRIGGER):
            continue
        if depth > 0:
            continue
        word_start = match.start()
        while word_start > 0 and not body[word_start - 1].isspace():
            word_start -= 1
        word = body[word_start:end]
        if word in abbrevs or word.lower() in abbrevs_lower:
            continue
        if _INITIAL.fullmatch(word):
            continue
        boundaries.append(end)

    spans = []
    cursor = 0
    for end in boundaries + [len(body)]:
        chunk = body[cursor:end]
        lead = len(chunk) - len(chunk.lstrip())
        trail = len(chunk) - len(chunk.rstrip())
        if chunk.strip():
            spans.append(
                SentenceSpan(start=cursor + lead, end=end - trail, index=len(spans))
            )
        cursor = end
    return spans


def _entity_candidates(text: str, offset: int, sentence_initial_token: int = 0):
    """Candidate (start, end, kind, rank) tuples for one sentence."""
    candidates = []
    for pattern in _DATE_PATTERNS:
        for match in pattern.finditer(text):
            candidates.append((offset + match.start(), offset + match.end(), "date", 0))

    tokens = sentence_tokens(text)

    def is_capword(tok: Token) -> bool:
        return bool(tok.core) and tok.core[0].isalpha() and tok.core[0].isupper() and not _INITIAL.fullmatch(tok.core)

    def is_initial(tok: Token) -> bool:
        return bool(_INITIAL.fullmatch(tok.core))

    def is_connector(tok: Token) -> bool:
        return tok.core.lower() in _CONNECTORS or is_initial(tok)

    n = len(tokens)
    # a run may only cross token joints with no stripped punctuation,
    # so "Baseball (MLB)" or "Anderson, George" never merge
    flows = [False] * n
    for j in range(1, n):
        flows[j] = (
            tokens[j - 1].core_end == tokens[j - 1].end
            and tokens[j].core_start == tokens[j].start
        )

    i = 0
    while i < n:
        tok = tokens[i]
        if is_capword(tok) or is_initial(tok):
            last = i
            j = i + 1
            while j < n and flows[j]:
                if is_capword(tokens[j]) or is_initial(tokens[j]):
                    last = j
                    j += 1
                elif is_connector(tokens[j]):
                    m = j
                    while m < n and flows[m] and is_connector(tokens[m]) and not is_capword(tokens[m]):
                        m += 1
                    if m < n and flows[m] and (is_capword(tokens[m]) or is_initial(tokens[m])):
                        last = m
                        j = m + 1
                    else:
                        break
                else:
                    break
            run = tokens[i : last + 1]
            has_word = any(
                len(t.core) >= 2 and not _INITIAL.fullmatch(t.core) for t in run
            )
            single = len(run) == 1
            forced_initial = i == sentence_initial_token and single
            if has_word and not forced_initial:
                start = run[0].core_start
                end = run[-1].core_end
                if single and _ACRONYM.fullmatch(run[0].core):
                    candidates.append((offset + start, offset + end, "acronym", 1))
                else:
                    candidates.append((offset + start, offset + end, "name", 2))
            i = j
        else:
            i += 1

    for tok in tokens:
        if _NUMBER.fullmatch(tok.core):
            candidates.append((offset + tok.core_start, offset + tok.core_end, "number", 3))
    return candidates


def extract_entities(
    body: str, abbreviations: frozenset[str] | None = None
) -> list[EntitySpan]:
    """Entities per fixed rules; overlaps resolved longest-match, then leftmost."""
    if not body.strip():
        return []
    candidates = []
    for span in segment_sentences(body, abbreviations=abbreviations):
        candidates.extend(_entity_candidates(body[span.start : span.end], span.start))

    candidates.sort(key=lambda c: (-(c[1] - c[0]), c[0], c[3]))
    chosen: list[tuple[int, int, str]] = []
    occupied: list[tuple[int, int]] = []
    for start, end, kind, _rank in candidates:
        if any(start < e and s < end for s, e in occupied):
            continue
        occupied.append((start, end))
        chosen.append((start, end, kind))
    chosen.sort()
    return [
        EntitySpan(start=s, end=e, surface=body[s:e], kind=k) for s, e, k in chosen
    ]


def find_prepositions(sentence: str, lexicon: frozenset[str] | None = None) -> list[int]:
    """Token positions of closed-class prepositions.

    Multiword units ("as well as") match as one unit whose recorded
    position is the final token; their member words are not re-matched.
    """
    lex = lexicon if lexicon is not None else load_lexicon()
    units = sorted(
        (entry.split() for entry in lex if " " in entry), key=len, reverse=True
    )
    singles = {entry for entry in lex if " " not in entry}

    tokens = sentence_tokens(sentence)
    forms = [tok.core.lower() for tok in tokens]
    positions = []
    i = 0
    while i < len(forms):
        matched = False
        for unit in units:
            k = len(unit)
            if forms[i : i + k] == unit:
                positions.append(i + k - 1)
                i += k
                matched = True
                break
        if matched:
            continue
        if forms[i] in singles:
            positions.append(i)
        i += 1
    return positions


def tokenize_words(text: str) -> list[str]:
    """Lowercase word tokens: letters and digits kept, punctuation dropped."""
    return [match.group().lower() for match in _WORD.finditer(text)]


@dataclass(frozen=True)
class AnalyzedDocument:
    doc: RawDocument
    sentences: list[SentenceSpan] = field(default_factory=list)
    entities: list[EntitySpan] = field(default_factory=list)
    prepositions: list[list[int]] = field(default_factory=list)

    def sentence_text(self, index: int) -> str:
        span = self.sentences[index]
        return self.doc.body[span.start : span.end]

    def entities_in_sentence(self, index: int) -> list[EntitySpan]:
        span = self.sentences[index]
        return [e for e in self.entities if span.start <= e.start and e.end <= span.end]

    def sentence_of_entity(self, entity: EntitySpan) -> int | None:
        for span in self.sentences:
            if span.start <= entity.start and entity.end <= span.end:
                return span.index
        return None


def analyze_document(
    doc: RawDocument,
    lexicon: frozenset[str] | None = None,
    abbreviations: frozenset[str] | None = None,
) -> AnalyzedDocument:
    sentences = segment_sentences(doc.body, abbreviations=abbreviations)
    entities = extract_entities(doc.body, abbreviations=abbreviations)
    prepositions = [
        find_prepositions(doc.body[span.start : span.end], lexicon=lexicon)
        for span in sentences
    ]
    return AnalyzedDocument(
        doc=doc, sentences=sentences, entities=entities, prepositions=prepositions
    )
