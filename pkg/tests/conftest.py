import json
from pathlib import Path

import pytest

from docstudy.analysis import analyze_document
from docstudy.corpus import ingest_jsonl

DATA = Path(__file__).parent / "data"

ROBERT_BODY = (
    "Robert Alexander Anderson (born 1946) is an American portrait artist "
    "known for painting the official portraits of George W. Bush and Alan "
    "Greenspan as well as designing United States postage stamps."
)
ROBERT_TITLE = "Robert Anderson (artist)"

MORITZ_TITLE = "Helmut Moritz"
MORITZ_BODY = (
    "Helmut Moritz (1 November 1933 - 21 October 2022) was an Austrian "
    "physical geodesist. He was a member of the Austrian Academy of Sciences "
    "and of many other international academies and societies. He became "
    "internationally known with a fundamental work on Error propagation in "
    "Geodesy. From 1991 to 1995, he was president of the International Union "
    "of Geodesy and Geophysics (IUGG)."
)


@pytest.fixture(scope="session")
def robert_corpus():
    return ingest_jsonl(DATA / "robert_anderson.jsonl", name="robert", seed=0)


@pytest.fixture(scope="session")
def robert_adoc(robert_corpus):
    return analyze_document(robert_corpus.documents[0])


@pytest.fixture(scope="session")
def eval_fixture():
    return json.loads((DATA / "eval_fixture.json").read_text("utf-8"))


@pytest.fixture(scope="session")
def golden_plans():
    return json.loads((DATA / "stage_plans.json").read_text("utf-8"))
