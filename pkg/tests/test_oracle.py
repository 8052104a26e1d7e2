from __future__ import annotations

from dataclasses import replace
from itertools import combinations

from hypothesis import given, settings
from hypothesis import strategies as st

from stackamr.amr import iter_blocks, to_triples
from stackamr.corpus import read_corpus
from stackamr.oracle import (
    ActionInventory,
    NodeLexicon,
    build_inventories,
    derive_actions,
)
from stackamr.smatch import smatch_score
from stackamr.synthetic import generate
from stackamr.transitions import Action, apply, check, extract_graph, initial_state, parse_action

from .conftest import ADVOCATE_PENMAN, ADVOCATE_WORDS, make_example


def load_suite(data_dir):
    path = data_dir / "oracle_suite.amr"
    counts = {meta["id"]: int(meta["skipped"]) for meta, _, _, _ in iter_blocks(path.read_text())}
    return read_corpus(path), counts


def replay_checked(example, actions):
    state = initial_state(example.tokens)
    for action in actions:
        reason = check(state, action)
        assert reason is None, f"{example.id}: {action}: {reason}"
        state = apply(state, action)
    return state


def test_suite_size_and_coverage(data_dir):
    examples, _ = load_suite(data_dir)
    assert len(examples) >= 15
    kinds = {a.kind for ex in examples for a in derive_actions(ex).actions}
    assert {"MERGE", "ENTITY", "DEPENDENT", "SWAP", "CONFIRM"} <= kinds
    oov = next(ex for ex in examples if ex.id == "oov")
    assert derive_actions(oov).reachable


def test_suite_replays_and_counts(data_dir):
    examples, counts = load_suite(data_dir)
    for ex in examples:
        result = derive_actions(ex)
        state = replay_checked(ex, result.actions)
        assert result.skipped_triples == counts[ex.id], ex.id
        assert result.reachable == (counts[ex.id] == 0), ex.id
        if result.reachable:
            assert smatch_score(ex.graph, extract_graph(state).graph).f1 == 1.0, ex.id


def test_advocated_reachable(advocate_example):
    result = derive_actions(advocate_example)
    assert result.reachable and result.skipped_triples == 0
    state = replay_checked(advocate_example, result.actions)
    assert smatch_score(advocate_example.graph, extract_graph(state).graph).f1 == 1.0


def test_empty_alignments_skip_all_content():
    ex = make_example(ADVOCATE_PENMAN, ADVOCATE_WORDS)
    result = derive_actions(ex)
    assert not result.reachable
    assert result.skipped_triples == len(to_triples(ex.graph)) - 1


def test_polarity_becomes_dependent():
    ex = make_example("(l / legal :polarity -)", ["legal"], "0-1|0")
    result = derive_actions(ex)
    assert Action("DEPENDENT", label="polarity", node="-") in result.actions
    assert result.reachable


def test_swap_needed_for_reentrancy(data_dir):
    examples, _ = load_suite(data_dir)
    ex = next(e for e in examples if e.id == "control-reentrancy")
    assert any(a.kind == "SWAP" for a in derive_actions(ex).actions)


def test_derivation_is_pure(advocate_example):
    a, b = derive_actions(advocate_example), derive_actions(advocate_example)
    assert a.actions == b.actions and a.skipped_triples == b.skipped_triples


def coverage_examples(data_dir):
    examples, _ = load_suite(data_dir)
    return examples + generate(12, seed=3)


def test_monotone_coverage_exhaustive(data_dir):
    for ex in coverage_examples(data_dir):
        full = ex.alignments
        if len(full) > 6:
            continue
        skipped = {}
        for k in range(len(full) + 1):
            for subset in combinations(range(len(full)), k):
                sub = replace(ex, alignments=tuple(full[i] for i in subset))
                skipped[subset] = derive_actions(sub).skipped_triples
        for subset, value in skipped.items():
            for extra in set(range(len(full))) - set(subset):
                bigger = tuple(sorted(subset + (extra,)))
                assert skipped[bigger] <= value, (ex.id, subset, extra)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 49), st.data())
def test_monotone_coverage_property(index, data):
    ex = generate(50)[index]
    full = ex.alignments
    keep = data.draw(st.lists(st.booleans(), min_size=len(full), max_size=len(full)))
    extra = data.draw(st.integers(0, len(full) - 1))
    smaller = tuple(a for a, k in zip(full, keep) if k)
    bigger = tuple(a for n, (a, k) in enumerate(zip(full, keep)) if k or n == extra)
    s = derive_actions(replace(ex, alignments=smaller)).skipped_triples
    b = derive_actions(replace(ex, alignments=bigger)).skipped_triples
    assert b <= s


# -- inventories -------------------------------------------------------------------------


def test_inventories_of_advocated(advocate_example):
    inv = build_inventories([advocate_example])
    assert inv.lexicon.candidates("advocated") == ["advocate-01"]
    assert inv.lexicon.candidates("should") == ["recommend-01"]
    for text in ("LA(ARG1)", "RA(ARG1)", "LA(manner)", "LA(root)"):
        assert parse_action(text) in inv.action_inventory


def test_empty_corpus_inventories():
    inv = build_inventories([])
    assert len(inv.action_inventory) == 0 and len(inv.lexicon) == 0
    assert inv.entity_labels == set() and inv.dependent_pairs == set()


def test_lexicon_ranked_by_count():
    a = make_example("(r / run-01)", ["run"], "0-1|0", "a")
    b = make_example("(r / run-02)", ["run"], "0-1|0", "b")
    inv = build_inventories([a, a, b])
    assert inv.lexicon.ranked("run") == [("run-01", 2), ("run-02", 1)]
    assert inv.lexicon.candidates("RUN") == ["run-01", "run-02"]


def test_entity_and_dependent_inventories(data_dir):
    examples, _ = load_suite(data_dir)
    inv = build_inventories(examples)
    assert "city" in inv.entity_labels
    assert ("polarity", "-") in inv.dependent_pairs


def test_inventory_merge_is_order_independent(data_dir):
    examples, _ = load_suite(data_dir)
    a, b = build_inventories(examples), build_inventories(examples[::-1])
    assert a.action_inventory.actions == b.action_inventory.actions
    assert a.lexicon.to_tsv() == b.lexicon.to_tsv()


def test_lexicon_tsv_round_trip():
    lex = NodeLexicon()
    lex.add("Run", "run-01", 2)
    lex.add("run", "run-02")
    lex.add("new york", "city")
    assert NodeLexicon.from_tsv(lex.to_tsv()).counts == lex.counts
    assert "RUN" in lex and len(lex) == 2


def test_action_inventory_round_trip():
    inv = ActionInventory([Action("RA", "ARG0"), Action("SHIFT"), Action("CONFIRM", concept="x"), Action("LA", "ARG0")])
    assert [str(a) for a in inv.actions] == ["SHIFT", "CONFIRM", "LA(ARG0)", "RA(ARG0)"]
    again = ActionInventory.from_text(inv.to_text())
    assert again.actions == inv.actions
    assert Action("CONFIRM", concept="anything") in inv
