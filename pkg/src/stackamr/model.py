"""Stack-LSTM scoring model: token embedder, state encoder, action and node heads."""
from __future__ import annotations

import json
from collections import Counter
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Parameter, ParameterCollection, Tensor
from .corpus import ROOT, AlignedExample, Token
from .oracle import ActionInventory, NodeLexicon
from .transitions import Action, ParserState, StackItem, check, legal_actions

UNK = "<unk>"
NO_ARC, LEFT_ARC, RIGHT_ARC = 0, 1, 2


@dataclass
class ModelConfig:
    word_dim: int = 100
    hidden_dim: int = 100
    action_dim: int = 20
    label_dim: int = 20
    pos_dim: int = 20
    char_dim: int = 25
    char_hidden: int = 50
    use_chars: bool = True
    use_pos: bool = False
    use_dep: bool = False
    pretrained: str | None = None
    seed: int = 1
    learning_rate: float = 0.1
    decay: float = 0.95
    clip_norm: float = 5.0
    epochs: int = 30
    patience: int = 5
    dropout: float = 0.0

    def __post_init__(self):
        for name in ("word_dim", "hidden_dim", "action_dim", "label_dim", "pos_dim", "char_dim", "char_hidden"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must be in [0, 1)")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ModelConfig":
        return cls(**data)


@dataclass
class Vocab:
    """Symbol tables; index 0 of every open table is the unknown symbol."""

    words: list[str] = field(default_factory=lambda: [UNK])
    chars: list[str] = field(default_factory=lambda: [UNK])
    pos: list[str] = field(default_factory=lambda: [UNK])
    deprels: list[str] = field(default_factory=lambda: [UNK])
    labels: list[str] = field(default_factory=lambda: [UNK])
    concepts: list[str] = field(default_factory=lambda: [UNK])

    def __post_init__(self):
        self._index = {name: {s: n for n, s in enumerate(getattr(self, name))} for name in self._tables()}

    @staticmethod
    def _tables() -> tuple[str, ...]:
        return ("words", "chars", "pos", "deprels", "labels", "concepts")

    def lookup(self, table: str, symbol: str | None) -> int:
        return self._index[table].get(symbol, 0) if symbol is not None else 0

    @classmethod
    def build(cls, corpus: Sequence[AlignedExample], actions: ActionInventory, lexicon: NodeLexicon) -> "Vocab":
        words, chars, pos, deprels = Counter(), Counter(), Counter(), Counter()
        for ex in corpus:
            for tok in ex.tokens:
                words[tok.surface.lower()] += 1
                chars.update(tok.surface)
                if tok.pos:
                    pos[tok.pos] += 1
                if tok.deprel:
                    deprels[tok.deprel] += 1
        labels = sorted({a.label for a in actions.actions if a.label})
        return cls(
            words=[UNK] + sorted(words),
            chars=[UNK] + sorted(chars),
            pos=[UNK] + sorted(pos),
            deprels=[UNK] + sorted(deprels),
            labels=[UNK] + labels,
            concepts=[UNK] + lexicon.concepts(),
        )

    def to_json(self) -> str:
        return json.dumps({name: getattr(self, name) for name in self._tables()}, indent=1, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "Vocab":
        return cls(**json.loads(text))


def load_pretrained(path: str | Path) -> tuple[list[str], np.ndarray]:
    """Read ``<count> <dim>`` then ``word v1 .. vdim`` lines."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines:
        raise ValueError(f"{path}: empty embedding file")
    try:
        count, dim = (int(x) for x in lines[0].split())
    except ValueError:
        raise ValueError(f"{path}: first line must be '<count> <dim>'") from None
    words, rows = [], []
    for number, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.rstrip().split(" ")
        if len(parts) != dim + 1:
            raise ValueError(f"{path}:{number}: expected {dim} values, got {len(parts) - 1}")
        words.append(parts[0])
        rows.append([float(v) for v in parts[1:]])
    if len(words) != count:
        raise ValueError(f"{path}: header promises {count} vectors, found {len(words)}")
    return words, np.array(rows, dtype=np.float64).reshape(count, dim)


class StackLSTM:
    """LSTM whose pop moves a pointer back to the previous element."""

    def __init__(self, W: Parameter, b: Parameter, empty: Parameter):
        self.W, self.b, self.empty = W, b, empty
        hid = empty.shape[0]
        zero = ad.constant(np.zeros(hid))
        self.states: list[tuple[Tensor, Tensor]] = [(zero, zero)]
        self.pointers: list[int] = [0]

    @property
    def depth(self) -> int:
        return len(self.pointers) - 1

    def push(self, x: Tensor) -> None:
        h, c = self.states[self.pointers[-1]]
        self.states.append(ad.lstm_step(self.W, self.b, x, h, c))
        self.pointers.append(len(self.states) - 1)

    def pop(self) -> None:
        if self.depth == 0:
            raise AssertionError("pop from an empty Stack-LSTM")
        self.pointers.pop()

    def summary(self) -> Tensor:
        top = self.pointers[-1]
        return self.empty if top == 0 else self.states[top][0]


class Sentence:
    """Per-sentence model state mirroring a :class:`ParserState`."""

    def __init__(self, model: "StackModel", tokens: Sequence[Token], drop_rng: np.random.Generator | None = None):
        self.model = model
        self.tokens = tuple(tokens)
        p = model.p
        self.inputs = [model.embed_token(t, drop_rng) for t in self.tokens]
        self.stack_emb: list[Tensor] = []
        self.buffer_emb: list[Tensor] = list(self.inputs) + [p["root"]]
        self.stack = StackLSTM(p["stack.W"], p["stack.b"], p["stack.empty"])
        self.buffer = StackLSTM(p["buffer.W"], p["buffer.b"], p["buffer.empty"])
        self.history = StackLSTM(p["history.W"], p["history.b"], p["history.empty"])
        for x in reversed(self.buffer_emb):
            self.buffer.push(x)

    # -- stack/buffer mirroring -------------------------------------------

    def _push_stack(self, x: Tensor) -> None:
        self.stack_emb.insert(0, x)
        self.stack.push(x)

    def _pop_stack(self) -> Tensor:
        self.stack.pop()
        return self.stack_emb.pop(0)

    def _push_buffer(self, x: Tensor) -> None:
        self.buffer_emb.insert(0, x)
        self.buffer.push(x)

    def _pop_buffer(self) -> Tensor:
        self.buffer.pop()
        return self.buffer_emb.pop(0)

    def sync(self, before: ParserState, action: Action, after: ParserState) -> None:
        m = self.model
        kind = action.kind
        if kind == "SHIFT":
            self._push_stack(self._pop_buffer())
        elif kind == "REDUCE":
            self._pop_stack()
        elif kind == "CONFIRM":
            x = self._pop_stack()
            self._push_stack(m.compose("confirm", x, m.concept_embedding(action.concept)))
        elif kind == "MERGE":
            top = self._pop_stack()
            second = self._pop_stack()
            self._push_stack(m.compose("merge", top, second))
        elif kind in ("ENTITY", "DEPENDENT"):
            x = self._pop_stack()
            self._push_stack(m.compose("update", x, m.action_embedding(action)))
        elif kind in ("LA", "RA"):
            top = self._pop_stack()
            second = self._pop_stack()
            rel = m.label_embedding(action.label)
            if kind == "LA":
                self._push_stack(second)
                self._push_stack(m.compose("arc", top, second, rel))
            else:
                self._push_stack(m.compose("arc", second, top, rel))
                self._push_stack(top)
        elif kind == "SWAP":
            top = self._pop_stack()
            second = self._pop_stack()
            self._push_stack(top)
            self._push_buffer(second)
        else:  # pragma: no cover - Action validates kinds
            raise AssertionError(kind)
        self.history.push(m.action_embedding(action))
        if self.stack.depth != len(after.stack) or self.buffer.depth != len(after.buffer):
            raise AssertionError(
                f"Stack-LSTM out of sync after {action}: "
                f"{self.stack.depth}/{len(after.stack)} stack, {self.buffer.depth}/{len(after.buffer)} buffer"
            )

    # -- scoring -------------------------------------------------------------

    def dep_feature(self, state: ParserState) -> int:
        if len(state.stack) < 2:
            return NO_ARC
        top, second = state.stack[0], state.stack[1]
        if _heads(self.tokens, top, second):
            return LEFT_ARC
        if _heads(self.tokens, second, top):
            return RIGHT_ARC
        return NO_ARC

    def encode(self, state: ParserState) -> Tensor:
        m = self.model
        parts = [self.stack.summary(), self.buffer.summary(), self.history.summary()]
        if m.config.use_dep:
            parts.append(ad.pick_row(m.p["dep_pair"], self.dep_feature(state)))
        return ad.relu(ad.affine(m.p["state.W"], ad.concat(parts), m.p["state.d"]))


def _heads(tokens: Sequence[Token], head: StackItem, dep: StackItem) -> bool:
    """Does a token of ``head`` govern a token of ``dep`` in the annotation?"""
    if head.kind == "root":
        return any(tokens[i].head == ROOT for i in dep.span if i < len(tokens))
    if dep.kind == "root":
        return False
    span = set(head.span)
    return any(tokens[i].head in span for i in dep.span)


class StackModel:
    def __init__(
        self,
        config: ModelConfig,
        actions: ActionInventory,
        lexicon: NodeLexicon,
        vocab: Vocab,
        pretrained: tuple[list[str], np.ndarray] | None = None,
    ):
        self.config = config
        self.actions = actions
        self.lexicon = lexicon
        self.vocab = vocab
        cfg = config
        pc = ParameterCollection(cfg.seed)
        self.p = pc
        H, D = cfg.hidden_dim, cfg.word_dim

        # token embedder
        parts = 0
        if cfg.use_chars:
            pc.add("char.table", (len(vocab.chars), cfg.char_dim))
            _add_lstm(pc, "char.fwd", cfg.char_dim, cfg.char_hidden)
            _add_lstm(pc, "char.bwd", cfg.char_dim, cfg.char_hidden)
            parts += 2 * cfg.char_hidden
        if pretrained is not None:
            words, table = pretrained
            self.pretrained_index = {w: n for n, w in enumerate(words)}
            pc.add("word.pretrained", table.shape, trainable=False, value=table)
            pc.add("word.pretrained_unk", (table.shape[1],))
            parts += table.shape[1]
        else:
            self.pretrained_index = None
            pc.add("word.table", (len(vocab.words), D))
            parts += D
        if cfg.use_pos:
            pc.add("pos.table", (len(vocab.pos), cfg.pos_dim))
            parts += cfg.pos_dim
        if cfg.use_dep:
            pc.add("deprel.table", (len(vocab.deprels), cfg.label_dim))
            parts += cfg.label_dim
        pc.add("embed.V", (D, parts))
        pc.add("embed.b", (D,), init="zeros")
        pc.add("root", (D,))

        # Stack-LSTMs
        _add_lstm(pc, "stack", D, H)
        pc.add("stack.empty", (H,))
        _add_lstm(pc, "buffer", D, H)
        pc.add("buffer.empty", (H,))
        _add_lstm(pc, "history", cfg.action_dim, H)
        pc.add("history.empty", (H,))

        # symbol embeddings and compositions
        pc.add("action.table", (actions.size, cfg.action_dim))
        pc.add("label.table", (len(vocab.labels), cfg.label_dim))
        pc.add("concept.table", (len(vocab.concepts), cfg.label_dim))
        for name, width in (
            ("confirm", D + cfg.label_dim),
            ("merge", 2 * D),
            ("update", D + cfg.action_dim),
            ("arc", 2 * D + cfg.label_dim),
        ):
            pc.add(f"{name}.U", (D, width))
            pc.add(f"{name}.b", (D,), init="zeros")

        # state vector and heads
        state_in = 3 * H
        if cfg.use_dep:
            pc.add("dep_pair", (3, cfg.label_dim))
            state_in += cfg.label_dim
        pc.add("state.W", (H, state_in))
        pc.add("state.d", (H,), init="zeros")
        pc.add("action_bridge.W", (H, H))
        pc.add("action_bridge.b", (H,), init="zeros")
        pc.add("node_bridge.W", (H, H))
        pc.add("node_bridge.b", (H,), init="zeros")
        pc.add("action.g", (actions.size, H))
        pc.add("action.q", (actions.size,), init="zeros")
        pc.add("node.g", (len(vocab.concepts), H))
        pc.add("node.q", (len(vocab.concepts),), init="zeros")

    # -- embeddings ------------------------------------------------------------

    def parameters(self) -> list[Parameter]:
        return list(self.p)

    def embed_token(self, token: Token, drop_rng: np.random.Generator | None = None) -> Tensor:
        cfg, p, v = self.config, self.p, self.vocab
        parts = []
        if cfg.use_chars:
            parts.append(self._char_repr(token.surface))
        word = token.surface.lower()
        if self.pretrained_index is not None:
            row = self.pretrained_index.get(word)
            if row is None:
                parts.append(p["word.pretrained_unk"])
            else:
                parts.append(ad.pick_row(p["word.pretrained"], row))
        else:
            parts.append(ad.pick_row(p["word.table"], v.lookup("words", word)))
        if cfg.use_pos:
            parts.append(ad.pick_row(p["pos.table"], v.lookup("pos", token.pos)))
        if cfg.use_dep:
            parts.append(ad.pick_row(p["deprel.table"], v.lookup("deprels", token.deprel)))
        x = ad.concat(parts) if len(parts) > 1 else parts[0]
        if drop_rng is not None and cfg.dropout > 0:
            keep = (drop_rng.random(x.shape) >= cfg.dropout) / (1.0 - cfg.dropout)
            x = ad.mul(x, ad.constant(keep))
        return ad.relu(ad.affine(p["embed.V"], x, p["embed.b"]))

    def _char_repr(self, surface: str) -> Tensor:
        p = self.p
        ids = [self.vocab.lookup("chars", ch) for ch in surface] or [0]
        zero = ad.constant(np.zeros(self.config.char_hidden))
        out = []
        for direction, order in (("fwd", ids), ("bwd", ids[::-1])):
            h, c = zero, zero
            for i in order:
                h, c = ad.lstm_step(
                    p[f"char.{direction}.W"], p[f"char.{direction}.b"], ad.pick_row(p["char.table"], i), h, c
                )
            out.append(h)
        return ad.concat(out)

    def concept_embedding(self, concept: str | None) -> Tensor:
        return ad.pick_row(self.p["concept.table"], self.vocab.lookup("concepts", concept))

    def label_embedding(self, label: str | None) -> Tensor:
        return ad.pick_row(self.p["label.table"], self.vocab.lookup("labels", label))

    def action_embedding(self, action: Action) -> Tensor:
        index = self.actions.index.get(action.key())
        if index is None:
            # fallback actions outside the inventory share the first row
            index = 0
        return ad.pick_row(self.p["action.table"], index)

    def compose(self, name: str, *parts: Tensor) -> Tensor:
        return ad.tanh(ad.affine(self.p[f"{name}.U"], ad.concat(list(parts)), self.p[f"{name}.b"]))

    # -- heads -----------------------------------------------------------------

    def legal_mask(self, state: ParserState) -> np.ndarray:
        kinds = legal_actions(state)
        mask = np.zeros(self.actions.size, dtype=bool)
        for n, action in enumerate(self.actions.actions):
            if action.kind not in kinds:
                continue
            if action.kind in ("LA", "RA", "DEPENDENT", "ENTITY"):
                mask[n] = check(state, action) is None
            else:
                mask[n] = True
        return mask

    def action_logits(self, s: Tensor) -> Tensor:
        p = self.p
        bridge = ad.tanh(ad.affine(p["action_bridge.W"], s, p["action_bridge.b"]))
        return ad.affine(p["action.g"], bridge, p["action.q"])

    def action_distribution(self, s: Tensor, mask: np.ndarray) -> np.ndarray:
        if not np.any(mask):
            raise ValueError("no legal action to score")
        return ad.softmax(self.action_logits(s).value, mask)

    def node_candidates(self, surface: str) -> list[str]:
        """Lexicon concepts for a stack item's surface; an unseen word is
        its own concept (lowercased, multiword joined by ``_``)."""
        cands = self.lexicon.candidates(surface)
        if not cands:
            return ["_".join(surface.lower().split())]
        return cands

    def node_logits(self, s: Tensor, candidates: list[str]) -> Tensor:
        p = self.p
        idx = [self.vocab.lookup("concepts", c) for c in candidates]
        bridge = ad.tanh(ad.affine(p["node_bridge.W"], s, p["node_bridge.b"]))
        return ad.add(ad.affine(ad.pick_row(p["node.g"], idx), bridge), ad.pick_row(p["node.q"], idx))

    def node_distribution(self, s: Tensor, surface: str) -> list[tuple[str, float]]:
        candidates = self.node_candidates(surface)
        if len(candidates) == 1:
            return [(candidates[0], 1.0)]
        probs = ad.softmax(self.node_logits(s, candidates).value)
        return list(zip(candidates, probs.tolist()))


def _add_lstm(pc: ParameterCollection, name: str, input_dim: int, hidden: int) -> None:
    pc.add(f"{name}.W", (4 * hidden, input_dim + hidden))
    b = np.zeros(4 * hidden)
    b[hidden:2 * hidden] = 1.0  # forget gate
    pc.add(f"{name}.b", (4 * hidden,), value=b)
