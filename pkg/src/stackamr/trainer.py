"""Teacher-forced training on oracle sequences, greedy decoding, checkpoints."""
from __future__ import annotations

import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import autodiff as ad
from .amr import AmrGraph
from .corpus import AlignedExample, Token
from .model import ModelConfig, Sentence, StackModel, Vocab, load_pretrained
from .oracle import ActionInventory, NodeLexicon, OracleResult, build_inventories, derive_actions
from .smatch import MatchResult, corpus_score
from .transitions import Action, apply, extract_graph, initial_state, is_legal, is_terminal

logger = logging.getLogger(__name__)

CHECKPOINT_FILES = ("config", "params.bin", "lexicon.tsv", "actions.txt", "vocab.json")
_ALWAYS = (Action("SHIFT"), Action("CONFIRM"), Action("REDUCE"))


class TrainingError(RuntimeError):
    pass


@dataclass
class TrainRun:
    config: ModelConfig
    losses: list[float] = field(default_factory=list)
    dev_scores: list[float] = field(default_factory=list)
    best_epoch: int = -1
    best_score: float = -1.0
    checkpoint: Path | None = None
    stopped_early: bool = False


def build_model(corpus: Sequence[AlignedExample], config: ModelConfig, oracle: list[OracleResult] | None = None) -> tuple[StackModel, list[OracleResult]]:
    """Derive oracle sequences and inventories from ``corpus`` and build a fresh model."""
    if oracle is None:
        oracle = [derive_actions(ex) for ex in corpus]
    inv = build_inventories(list(corpus), oracle)
    actions = ActionInventory(list(inv.action_inventory.actions) + list(_ALWAYS))
    vocab = Vocab.build(corpus, actions, inv.lexicon)
    pretrained = load_pretrained(config.pretrained) if config.pretrained else None
    return StackModel(config, actions, inv.lexicon, vocab, pretrained), oracle


def sentence_loss(
    model: StackModel, example: AlignedExample, actions: Sequence[Action], drop_rng: np.random.Generator | None = None
) -> ad.Tensor | None:
    """Summed action and node cross-entropy along the oracle path.

    Steps with a single legal choice contribute exactly zero and are
    skipped.  Returns None when no step has a choice.
    """
    state = initial_state(example.tokens)
    sent = Sentence(model, example.tokens, drop_rng)
    losses = []
    for action in actions:
        s = None
        mask = model.legal_mask(state)
        gold = model.actions.index.get(action.key())
        if gold is None or not mask[gold]:
            raise AssertionError(f"oracle action {action} not scorable")
        if mask.sum() > 1:
            s = sent.encode(state)
            losses.append(ad.softmax_cross_entropy(model.action_logits(s), gold, mask))
        if action.kind == "CONFIRM":
            candidates = model.node_candidates(state.stack[0].surface)
            if len(candidates) > 1 and action.concept in candidates:
                s = s if s is not None else sent.encode(state)
                losses.append(ad.softmax_cross_entropy(model.node_logits(s, candidates), candidates.index(action.concept)))
        after = apply(state, action)
        sent.sync(state, action, after)
        state = after
    return ad.total(losses) if losses else None


def _fallback(state) -> Action:
    for action in (Action("SHIFT"), Action("REDUCE"), Action("SWAP"), Action("LA", "root"), Action("RA", "root")):
        if is_legal(state, action):
            return action
    raise AssertionError("no legal action in a non-terminal state")  # pragma: no cover


def parse_greedy(model: StackModel, tokens: Sequence[Token]) -> AmrGraph:
    """Argmax decoding; ties go to the lowest inventory index."""
    state = initial_state(tokens)
    sent = Sentence(model, tokens)
    while not is_terminal(state):
        mask = model.legal_mask(state)
        s = None
        if not mask.any():
            action = _fallback(state)
        else:
            if mask.sum() == 1:
                index = int(np.flatnonzero(mask)[0])
            else:
                s = sent.encode(state)
                index = int(np.argmax(model.action_distribution(s, mask)))
            action = model.actions.actions[index]
            if action.kind == "CONFIRM":
                candidates = model.node_candidates(state.stack[0].surface)
                if len(candidates) > 1:
                    s = s if s is not None else sent.encode(state)
                    probs = [pr for _, pr in model.node_distribution(s, state.stack[0].surface)]
                    concept = candidates[int(np.argmax(probs))]
                else:
                    concept = candidates[0]
                action = Action("CONFIRM", concept=concept)
        after = apply(state, action)
        sent.sync(state, action, after)
        state = after
    root = state.root_node
    if root is None:
        if not state.created:
            return AmrGraph.empty()
        root = state.created[-1]
        logger.warning("no root arc built; rooting at the last created node %s", root)
    return extract_graph(state, root).graph


_WORKER_MODEL: StackModel | None = None


def _init_worker(model: StackModel) -> None:
    global _WORKER_MODEL
    _WORKER_MODEL = model


def _parse_in_worker(tokens: Sequence[Token]) -> AmrGraph:
    return parse_greedy(_WORKER_MODEL, tokens)


def parse_all(model: StackModel, sentences: Sequence[Sequence[Token]], jobs: int = 1) -> list[AmrGraph]:
    if jobs > 1 and len(sentences) > 1:
        with ProcessPoolExecutor(max_workers=jobs, initializer=_init_worker, initargs=(model,)) as pool:
            return list(pool.map(_parse_in_worker, sentences, chunksize=4))
    return [parse_greedy(model, toks) for toks in sentences]


def evaluate(model: StackModel, corpus: Sequence[AlignedExample], jobs: int = 1) -> MatchResult:
    preds = parse_all(model, [ex.tokens for ex in corpus], jobs)
    return corpus_score([ex.graph for ex in corpus], preds, jobs=jobs)


def train(
    corpus: Sequence[AlignedExample],
    dev: Sequence[AlignedExample] | None,
    config: ModelConfig,
    out_dir: str | Path | None = None,
    model: StackModel | None = None,
    oracle: list[OracleResult] | None = None,
    run_info: dict | None = None,
) -> tuple[StackModel, TrainRun]:
    """Single-sentence SGD on oracle sequences, keeping the best dev model.

    Without a dev set the training corpus doubles as the dev set.
    """
    if model is None:
        model, oracle = build_model(corpus, config, oracle)
    elif oracle is None:
        oracle = [derive_actions(ex) for ex in corpus]
    dev = list(dev) if dev else list(corpus)
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    run = TrainRun(config)
    rng = np.random.default_rng(config.seed)
    params = model.parameters()
    best_values = [p.value.copy() for p in params]
    stale = 0
    log_rows = []
    for epoch in range(config.epochs):
        started = time.perf_counter()
        lr = config.learning_rate * config.decay ** epoch
        order = rng.permutation(len(corpus))
        epoch_loss = 0.0
        for k in order:
            with ad.Tape() as tape:
                loss = sentence_loss(model, corpus[k], oracle[k].actions, rng if config.dropout > 0 else None)
                if loss is None:
                    continue
                value = float(loss.value)
                if not math.isfinite(value):
                    for p, v in zip(params, best_values):
                        p.value[...] = v
                    raise TrainingError(f"non-finite loss in epoch {epoch + 1}; best parameters restored")
                tape.backward(loss)
            ad.sgd_step(params, lr, config.clip_norm)
            epoch_loss += value
        score = evaluate(model, dev).f1
        run.losses.append(epoch_loss)
        run.dev_scores.append(score)
        elapsed = time.perf_counter() - started
        logger.info("epoch %d loss %.4f dev F1 %.4f (%.1fs)", epoch + 1, epoch_loss, score, elapsed)
        log_rows.append((epoch + 1, lr, epoch_loss, score))
        if score > run.best_score:
            run.best_score, run.best_epoch = score, epoch + 1
            best_values = [p.value.copy() for p in params]
            stale = 0
            if out is not None:
                save_model(model, out, run_info)
                run.checkpoint = out
        else:
            stale += 1
            if stale >= config.patience:
                run.stopped_early = True
                break
        if score >= 1.0:
            break  # nothing left to improve on dev
    for p, v in zip(params, best_values):
        p.value[...] = v
    if out is not None:
        _write_log(out, log_rows)
    return model, run


def _write_log(out: Path, rows: list[tuple[int, float, float, float]]) -> None:
    from .plots import learning_curve

    lines = ["epoch\tlearning_rate\tloss\tdev_f1"]
    lines += [f"{e}\t{lr:.6f}\t{loss:.6f}\t{f1:.6f}" for e, lr, loss, f1 in rows]
    (out / "train_log.tsv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    learning_curve(rows, out / "learning_curve.png")


# ---------------------------------------------------------------------------
# checkpoints


def save_model(model: StackModel, out_dir: str | Path, run_info: dict | None = None) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    header = {"config": model.config.to_dict(), "run": run_info or {}}
    (out / "config").write_text(json.dumps(header, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    ad.save_params(out / "params.bin", model.parameters(), header)
    (out / "lexicon.tsv").write_text(model.lexicon.to_tsv(), encoding="utf-8")
    (out / "actions.txt").write_text(model.actions.to_text(), encoding="utf-8")
    (out / "vocab.json").write_text(model.vocab.to_json() + "\n", encoding="utf-8")
    if model.pretrained_index is not None:
        words = sorted(model.pretrained_index, key=model.pretrained_index.get)
        (out / "pretrained_words.txt").write_text("".join(f"{w}\n" for w in words), encoding="utf-8")


def load_model(model_dir: str | Path) -> StackModel:
    src = Path(model_dir)
    missing = [name for name in CHECKPOINT_FILES if not (src / name).is_file()]
    if missing:
        raise FileNotFoundError(f"{src}: missing checkpoint file(s) {', '.join(missing)}")
    header = json.loads((src / "config").read_text(encoding="utf-8"))
    config = ModelConfig.from_dict(header["config"])
    _, values = ad.load_params(src / "params.bin")
    pretrained = None
    if "word.pretrained" in values:
        words = (src / "pretrained_words.txt").read_text(encoding="utf-8").splitlines()
        pretrained = (words, values["word.pretrained"][0])
    model = StackModel(
        config,
        ActionInventory.from_text((src / "actions.txt").read_text(encoding="utf-8")),
        NodeLexicon.from_tsv((src / "lexicon.tsv").read_text(encoding="utf-8")),
        Vocab.from_json((src / "vocab.json").read_text(encoding="utf-8")),
        pretrained,
    )
    names = {p.name for p in model.parameters()}
    if names != set(values):
        raise ValueError(f"{src}: parameter names do not match the configured model")
    for p in model.parameters():
        arr, _ = values[p.name]
        if arr.shape != p.shape:
            raise ValueError(f"{src}: parameter {p.name} has shape {arr.shape}, expected {p.shape}")
        p.value[...] = arr
    return model
