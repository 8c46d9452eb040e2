"""Descriptive statistics over corpora, QA files, and task suites."""

from __future__ import annotations

from .analysis import tokenize_words
from .corpus import Corpus
from .qagen import TASK_NLI, QAPair


def _mean(values) -> float:
    values = list(values)
    return round(sum(values) / len(values), 2) if values else 0.0


def corpus_stats(corpus: Corpus, qa_pairs: list[QAPair] | None = None) -> dict:
    """Counts, word-length means, and the NLI answer-label distribution.

    Lengths are whitespace-word counts, not model-tokenizer counts.
    """
    stats: dict = {
        "name": corpus.name,
        "docs": len(corpus),
        "doc_words_mean": _mean(len(tokenize_words(doc.body)) for doc in corpus),
    }
    if qa_pairs is not None:
        generation = [p for p in qa_pairs if p.task != TASK_NLI]
        nli = [p for p in qa_pairs if p.task == TASK_NLI]
        stats["qa_pairs"] = len(qa_pairs)
        stats["question_words_mean"] = _mean(
            len(tokenize_words(p.question)) for p in qa_pairs
        )
        stats["answer_words_mean"] = _mean(
            len(tokenize_words(p.answer)) for p in generation
        ) if generation else 0.0
        if nli:
            total = len(nli)
            dist = {}
            for label in ("Yes", "No", "Impossible"):
                hits = sum(1 for p in nli if p.answer_label == label)
                dist[label] = round(100.0 * hits / total, 2)
            stats["nli_pairs"] = total
            stats["nli_label_distribution"] = dist
    return stats


def suite_stats(suites) -> dict:
    """Per-kind example counts and percentages across generated suites."""
    counts: dict[str, int] = {}
    for suite in suites:
        for kind, value in suite.counts.items():
            counts[kind] = counts.get(kind, 0) + value
    total = sum(counts.values())
    percent = {
        kind: round(100.0 * value / total, 2) if total else 0.0
        for kind, value in counts.items()
    }
    return {"examples": total, "counts": counts, "percent": percent}
