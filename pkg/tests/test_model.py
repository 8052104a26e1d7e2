from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stackamr import autodiff as ad
from stackamr.corpus import Token, make_tokens
from stackamr.model import ModelConfig, Sentence, StackLSTM, load_pretrained
from stackamr.trainer import build_model
from stackamr.transitions import Action, apply, initial_state, legal_actions, parse_action

from .conftest import ADVOCATE_ALIGNMENTS, ADVOCATE_PENMAN, ADVOCATE_WORDS, make_example
from .gradcases import TINY, full_model_case


@pytest.fixture(scope="module")
def model_and_oracle():
    ex = make_example(ADVOCATE_PENMAN, ADVOCATE_WORDS, ADVOCATE_ALIGNMENTS)
    run1 = make_example("(r / run-01)", ["run"], "0-1|0", "r1")
    run2 = make_example("(r / run-02)", ["run"], "0-1|0", "r2")
    return build_model([ex, run1, run2], ModelConfig(seed=4))


@pytest.fixture
def model(model_and_oracle):
    return model_and_oracle[0]


def test_embedding_dimension(model):
    for word in ADVOCATE_WORDS + ["unseen", ""]:
        assert model.embed_token(Token(0, word)).shape == (100,)


def test_zero_projection_gives_zero_embedding(model_and_oracle):
    model, _ = model_and_oracle
    saved = model.p["embed.V"].value.copy()
    model.p["embed.V"].value[...] = 0.0
    try:
        for word in ADVOCATE_WORDS:
            assert not model.embed_token(Token(0, word)).value.any()
    finally:
        model.p["embed.V"].value[...] = saved


def test_identical_tokens_identical_embeddings(model):
    a, b = model.embed_token(Token(0, "It")), model.embed_token(Token(3, "It"))
    assert np.array_equal(a.value, b.value)


def walk(model, words, actions):
    state = initial_state(make_tokens(words))
    sent = Sentence(model, state.tokens)
    yield state, sent
    for text in actions:
        action = parse_action(text)
        after = apply(state, action)
        sent.sync(state, action, after)
        state = after
        yield state, sent


PREFIX = ["SHIFT", "CONFIRM(it)", "SHIFT", "REDUCE", "SHIFT", "SWAP"]


def test_state_vector_nonnegative(model):
    for state, sent in walk(model, ADVOCATE_WORDS, PREFIX):
        s = sent.encode(state)
        assert s.shape == (100,) and (s.value >= 0).all()


def test_zero_state_weights_give_zero_state(model):
    W, d = model.p["state.W"], model.p["state.d"]
    saved = W.value.copy()
    W.value[...] = 0.0
    try:
        for state, sent in walk(model, ADVOCATE_WORDS, PREFIX):
            assert not sent.encode(state).value.any()
    finally:
        W.value[...] = saved


def test_sync_detects_desynchronization(model):
    state = initial_state(make_tokens(["a", "b"]))
    sent = Sentence(model, state.tokens)
    with pytest.raises(AssertionError, match="out of sync"):
        sent.sync(state, Action("SHIFT"), initial_state(make_tokens(["a", "b", "c"])))


# -- Stack-LSTM ------------------------------------------------------------------------


def make_stack(seed=0, dim=3, hid=4):
    pc = ad.ParameterCollection(seed)
    return StackLSTM(pc.add("W", (4 * hid, dim + hid)), pc.add("b", (4 * hid,)), pc.add("e", (hid,))), pc


vectors = st.lists(st.lists(st.floats(-2, 2), min_size=3, max_size=3), min_size=1, max_size=6)


@settings(max_examples=50, deadline=None)
@given(vectors, st.lists(st.floats(-2, 2), min_size=3, max_size=3))
def test_push_pop_is_identity(prefix, extra):
    stack, _ = make_stack()
    for v in prefix:
        stack.push(ad.constant(np.array(v)))
    before = stack.summary().value.copy()
    stack.push(ad.constant(np.array(extra)))
    stack.pop()
    assert np.array_equal(stack.summary().value, before)


def test_pop_then_push_matches_fresh_stack():
    rng = np.random.default_rng(1)
    a, b, c = (ad.constant(rng.normal(size=3)) for _ in range(3))
    s1, _ = make_stack()
    for x in (a, b):
        s1.push(x)
    s1.pop()
    s1.push(c)
    s2, _ = make_stack()
    for x in (a, c):
        s2.push(x)
    assert np.array_equal(s1.summary().value, s2.summary().value)


def test_empty_stack_summary_and_pop():
    stack, pc = make_stack()
    assert stack.summary() is pc["e"]
    with pytest.raises(AssertionError):
        stack.pop()


# -- softmax heads ----------------------------------------------------------------------


def test_uniform_action_distribution(model):
    state = initial_state(make_tokens(["a", "b"]))
    state = apply(apply(state, Action("SHIFT")), Action("SHIFT"))
    mask = model.legal_mask(state)
    g, q = model.p["action.g"], model.p["action.q"]
    saved = g.value.copy()
    g.value[...] = 0.0
    try:
        probs = model.action_distribution(ad.constant(np.ones(100)), mask)
    finally:
        g.value[...] = saved
    k = int(mask.sum())
    assert k > 1
    assert np.allclose(probs[mask], 1.0 / k) and not probs[~mask].any()
    assert not q.value.any()


def test_single_legal_action(model):
    state = initial_state(make_tokens(["a"]))
    mask = model.legal_mask(state)
    assert legal_actions(state) == {"SHIFT"} and mask.sum() == 1
    probs = model.action_distribution(ad.constant(np.ones(100)), mask)
    assert probs[mask][0] == 1.0


def test_empty_legal_set_rejected(model):
    with pytest.raises(ValueError):
        model.action_distribution(ad.constant(np.ones(100)), np.zeros(model.actions.size, dtype=bool))


def test_oov_node_copies_word(model):
    assert model.node_distribution(ad.constant(np.ones(100)), "zyzzyva") == [("zyzzyva", 1.0)]
    assert model.node_candidates("New York") == ["new_york"]


def test_single_candidate(model):
    assert model.node_distribution(ad.constant(np.ones(100)), "advocated") == [("advocate-01", 1.0)]


def test_two_candidates_uniform_at_zero(model):
    g = model.p["node.g"]
    saved = g.value.copy()
    g.value[...] = 0.0
    try:
        dist = dict(model.node_distribution(ad.constant(np.ones(100)), "run"))
    finally:
        g.value[...] = saved
    assert dist == {"run-01": 0.5, "run-02": 0.5}


@settings(max_examples=20, deadline=None)
@given(st.floats(-50, 50))
def test_argmax_invariant_to_constant_bias_shift(shift):
    model = build_model([make_example("(r / run-01)", ["run"], "0-1|0")], ModelConfig(**TINY, seed=2))[0]
    state = apply(initial_state(make_tokens(["run", "x"])), Action("SHIFT"))
    mask = model.legal_mask(state)
    s = ad.constant(np.linspace(0.1, 1.0, 2))
    before = int(np.argmax(model.action_distribution(s, mask)))
    model.p["action.q"].value += shift
    assert int(np.argmax(model.action_distribution(s, mask))) == before


def test_short_derivation_gradient_check():
    f, params = full_model_case(n_actions=4)
    assert ad.gradient_check(f, params) < 1e-4


def test_forget_gate_bias(model):
    b = model.p["stack.b"].value
    assert (b[100:200] == 1.0).all() and not b[:100].any() and not b[200:].any()


# -- configuration and pretrained vectors ------------------------------------------------


def test_config_round_trip():
    cfg = ModelConfig(use_chars=False, pretrained="x.txt", seed=9)
    assert ModelConfig.from_dict(cfg.to_dict()) == cfg
    with pytest.raises(ValueError):
        ModelConfig(hidden_dim=0)
    with pytest.raises(ValueError):
        ModelConfig(dropout=1.0)


def test_load_pretrained(tmp_path):
    path = tmp_path / "vec.txt"
    path.write_text("2 3\nit 0.1 0.2 0.3\nshould 1 2 3\n")
    words, table = load_pretrained(path)
    assert words == ["it", "should"] and table.shape == (2, 3) and table[1, 2] == 3.0
    path.write_text("3 3\nit 0.1 0.2 0.3\n")
    with pytest.raises(ValueError, match="promises"):
        load_pretrained(path)
    path.write_text("1 3\nit 0.1 0.2\n")
    with pytest.raises(ValueError, match="expected 3"):
        load_pretrained(path)


def test_pretrained_model_uses_table(tmp_path):
    path = tmp_path / "vec.txt"
    path.write_text("2 4\nit 0.1 0.2 0.3 0.4\nshould 1 2 3 4\n")
    ex = make_example("(i / it)", ["it"], "0-1|0")
    model, _ = build_model([ex], ModelConfig(**{**TINY, "word_dim": 3}, pretrained=str(path)))
    frozen = model.p["word.pretrained"]
    assert not frozen.trainable and frozen.shape == (2, 4)
    assert "word.table" not in {p.name for p in model.parameters()}
    assert model.embed_token(Token(0, "zzz")).shape == (3,)


def test_no_chars_variant():
    ex = make_example("(i / it)", ["it"], "0-1|0")
    model, _ = build_model([ex], ModelConfig(**TINY, use_chars=False))
    assert not any(p.name.startswith("char.") for p in model.parameters())
