from __future__ import annotations

from importlib import resources
from pathlib import Path

import pytest

from kgrag.ingest import load_corpus
from kgrag.pipeline import Pipeline, build_records
from kgrag.vocabulary import load_vocab

FIXTURE_CORPUS = Path(str(resources.files("kgrag").joinpath("data/fixture_corpus")))
EXPLANATION_QUESTION = "Why does high laser power lead to keyhole porosity in LPBF?"


@pytest.fixture(scope="session")
def vocab():
    return load_vocab()


@pytest.fixture(scope="session")
def fixture_records(vocab):
    return build_records(load_corpus(FIXTURE_CORPUS), vocab)


@pytest.fixture(scope="session")
def fixture_pipeline(fixture_records, vocab):
    return Pipeline.from_records(fixture_records, vocab)


# filled by test_acceptance.py, printed once at the end of the run
ACCEPTANCE_RESULTS: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_RESULTS, key=lambda s: int(s.split()[1].rstrip("."))):
            terminalreporter.write_line(line)
