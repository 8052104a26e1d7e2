from __future__ import annotations

from pathlib import Path

import pytest

from stackamr.amr import parse_penman
from stackamr.corpus import AlignedExample, make_tokens, parse_alignments

DATA = Path(__file__).parent / "data"

ADVOCATE_PENMAN = """
(r / recommend-01
    :ARG1 (a / advocate-01
        :ARG1 (i / it)
        :manner (v / vigorous)))
"""
ADVOCATE_WORDS = ["It", "should", "be", "vigorously", "advocated"]
ADVOCATE_ALIGNMENTS = "0-1|0.0.0 1-2|0 3-4|0.0.1 4-5|0.0"


def make_example(penman: str, words: list[str], alignments: str = "", id: str = "x") -> AlignedExample:
    graph = parse_penman(penman)
    als = parse_alignments(alignments, graph, len(words)) if alignments else ()
    return AlignedExample(make_tokens(words), graph, als, id)


@pytest.fixture
def advocate_graph():
    return parse_penman(ADVOCATE_PENMAN)


@pytest.fixture
def advocate_example():
    return make_example(ADVOCATE_PENMAN, ADVOCATE_WORDS, ADVOCATE_ALIGNMENTS, "advocated")


@pytest.fixture(scope="session")
def data_dir() -> Path:
    return DATA


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
