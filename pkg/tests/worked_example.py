"""The "It should be vigorously advocated" derivation with every
intermediate configuration (stack top first, buffer front first)."""
from __future__ import annotations

STEPS: list[tuple[str, list[str], list[str]]] = [
    ("SHIFT", ["it"], ["should", "be", "vigorously", "advocated", "R"]),
    ("CONFIRM(it)", ["it"], ["should", "be", "vigorously", "advocated", "R"]),
    ("SHIFT", ["should", "it"], ["be", "vigorously", "advocated", "R"]),
    ("CONFIRM(recommend-01)", ["recommend-01", "it"], ["be", "vigorously", "advocated", "R"]),
    ("SWAP", ["recommend-01"], ["it", "be", "vigorously", "advocated", "R"]),
    ("SHIFT", ["it", "recommend-01"], ["be", "vigorously", "advocated", "R"]),
    ("SHIFT", ["be", "it", "recommend-01"], ["vigorously", "advocated", "R"]),
    ("REDUCE", ["it", "recommend-01"], ["vigorously", "advocated", "R"]),
    ("SHIFT", ["vigorously", "it", "recommend-01"], ["advocated", "R"]),
    ("CONFIRM(vigorous)", ["vigorous", "it", "recommend-01"], ["advocated", "R"]),
    ("SWAP", ["vigorous", "recommend-01"], ["it", "advocated", "R"]),
    ("SWAP", ["vigorous"], ["recommend-01", "it", "advocated", "R"]),
    ("SHIFT", ["recommend-01", "vigorous"], ["it", "advocated", "R"]),
    ("SHIFT", ["it", "recommend-01", "vigorous"], ["advocated", "R"]),
    ("SHIFT", ["advocated", "it", "recommend-01", "vigorous"], ["R"]),
    ("CONFIRM(advocate-01)", ["advocate-01", "it", "recommend-01", "vigorous"], ["R"]),
    ("LA(ARG1)", ["advocate-01", "it", "recommend-01", "vigorous"], ["R"]),
    ("SWAP", ["advocate-01", "recommend-01", "vigorous"], ["it", "R"]),
    ("SHIFT", ["it", "advocate-01", "recommend-01", "vigorous"], ["R"]),
    ("REDUCE", ["advocate-01", "recommend-01", "vigorous"], ["R"]),
    ("RA(ARG1)", ["advocate-01", "recommend-01", "vigorous"], ["R"]),
    ("SWAP", ["advocate-01", "vigorous"], ["recommend-01", "R"]),
    ("SHIFT", ["recommend-01", "advocate-01", "vigorous"], ["R"]),
    ("SHIFT", ["R", "recommend-01", "advocate-01", "vigorous"], []),
    ("LA(root)", ["R", "recommend-01", "advocate-01", "vigorous"], []),
    ("REDUCE", ["recommend-01", "advocate-01", "vigorous"], []),
    ("REDUCE", ["advocate-01", "vigorous"], []),
    ("LA(manner)", ["advocate-01", "vigorous"], []),
    ("REDUCE", ["vigorous"], []),
    ("REDUCE", [], []),
]

INITIAL_BUFFER = ["it", "should", "be", "vigorously", "advocated", "R"]


def labels(state) -> tuple[list[str], list[str]]:
    return (
        [state.label(item).lower() if item.kind == "word" else state.label(item) for item in state.stack],
        [state.label(item).lower() if item.kind == "word" else state.label(item) for item in state.buffer],
    )
