from __future__ import annotations

import numpy as np
import pytest

from stackamr.amr import AmrGraph
from stackamr.corpus import make_tokens
from stackamr.model import ModelConfig
from stackamr.smatch import smatch_score
from stackamr.trainer import (
    CHECKPOINT_FILES,
    TrainingError,
    build_model,
    evaluate,
    load_model,
    parse_all,
    parse_greedy,
    save_model,
    train,
)

from .conftest import ADVOCATE_WORDS, make_example
from .gradcases import TINY

SMALL = dict(word_dim=16, hidden_dim=16, action_dim=8, label_dim=8, pos_dim=8, char_dim=8, char_hidden=8)


def test_advocated_overfits(advocate_example):
    model, run = train([advocate_example], None, ModelConfig(epochs=50, patience=50))
    graph = parse_greedy(model, advocate_example.tokens)
    assert smatch_score(advocate_example.graph, graph).f1 == 1.0
    assert run.best_score == 1.0 and run.best_epoch <= 50


def test_zero_learning_rate_leaves_parameters(advocate_example):
    model, _ = build_model([advocate_example], ModelConfig(**SMALL))
    before = [p.value.tobytes() for p in model.parameters()]
    train([advocate_example], None, ModelConfig(**SMALL, learning_rate=0.0, epochs=1), model=model)
    assert [p.value.tobytes() for p in model.parameters()] == before


def test_loss_decreases_over_seeds(advocate_example):
    # a dev sentence the model cannot get right keeps all five epochs running
    dev = [make_example("(z / horse)", ["zebra"], "0-1|0", "dev")]
    monotone = 0
    for seed in range(10):
        _, run = train([advocate_example], dev, ModelConfig(**SMALL, seed=seed, epochs=5))
        assert len(run.losses) == 5
        monotone += all(b < a for a, b in zip(run.losses, run.losses[1:]))
    assert monotone >= 9


def test_empty_sentence_does_not_crash(advocate_example):
    model, _ = build_model([advocate_example], ModelConfig(**SMALL))
    graph = parse_greedy(model, ())
    assert isinstance(graph, AmrGraph)


def test_greedy_parse_is_deterministic(advocate_example):
    model, _ = build_model([advocate_example], ModelConfig(**SMALL))
    toks = make_tokens(ADVOCATE_WORDS + ["extra", "words"])
    a, b = parse_greedy(model, toks), parse_greedy(model, toks)
    assert a == b


def test_parallel_parse_matches_serial(advocate_example):
    model, _ = build_model([advocate_example], ModelConfig(**SMALL))
    sentences = [make_tokens(ADVOCATE_WORDS[:k]) for k in range(1, 6)]
    assert parse_all(model, sentences, jobs=2) == parse_all(model, sentences)


def test_evaluate_bounds(advocate_example):
    model, _ = train([advocate_example], None, ModelConfig(epochs=50, patience=50))
    assert evaluate(model, [advocate_example]).f1 == 1.0


def test_checkpoint_round_trip(tmp_path, advocate_example):
    model, run = train([advocate_example], None, ModelConfig(**SMALL, epochs=3), out_dir=tmp_path / "ck")
    for name in CHECKPOINT_FILES + ("train_log.tsv", "learning_curve.png"):
        assert (tmp_path / "ck" / name).is_file()
    loaded = load_model(tmp_path / "ck")
    assert [p.value.tobytes() for p in loaded.parameters()] == [p.value.tobytes() for p in model.parameters()]
    assert evaluate(loaded, [advocate_example]).f1 == evaluate(model, [advocate_example]).f1
    save_model(loaded, tmp_path / "again")
    assert (tmp_path / "again" / "params.bin").read_bytes() == (tmp_path / "ck" / "params.bin").read_bytes()


def test_same_seed_same_bytes(tmp_path, advocate_example):
    for name in ("a", "b"):
        train([advocate_example], None, ModelConfig(**SMALL, epochs=2, seed=5), out_dir=tmp_path / name)
    for name in CHECKPOINT_FILES:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_load_rejects_mismatch(tmp_path, advocate_example):
    model, _ = build_model([advocate_example], ModelConfig(**TINY))
    save_model(model, tmp_path)
    (tmp_path / "config").write_text((tmp_path / "config").read_text().replace('"use_chars": true', '"use_chars": false'))
    with pytest.raises(ValueError, match="do not match"):
        load_model(tmp_path)
    (tmp_path / "vocab.json").unlink()
    with pytest.raises(FileNotFoundError, match="vocab.json"):
        load_model(tmp_path)


def test_non_finite_loss_aborts(advocate_example):
    model, _ = build_model([advocate_example], ModelConfig(**TINY))
    model.p["action.q"].value[0] = np.nan
    initial = [p.value.copy() for p in model.parameters()]
    with pytest.raises(TrainingError, match="non-finite"):
        train([advocate_example], None, ModelConfig(**TINY), model=model)
    # no epoch finished, so the values from before training are restored
    restored = [p.value for p in model.parameters()]
    assert all(np.array_equal(a, b, equal_nan=True) for a, b in zip(initial, restored))


def test_unreachable_examples_still_train(advocate_example):
    partial = make_example("(r / recommend-01 :ARG1 (i / it))", ["It", "should"], "1-2|0")
    model, run = train([advocate_example, partial], None, ModelConfig(**SMALL, epochs=2))
    assert len(run.losses) == 2 and all(np.isfinite(run.losses))


def test_early_stopping(advocate_example):
    dev = [make_example("(z / horse)", ["zebra"], "0-1|0", "dev")]
    _, run = train([advocate_example], dev, ModelConfig(**SMALL, epochs=30, patience=2))
    assert run.stopped_early and len(run.losses) < 30
