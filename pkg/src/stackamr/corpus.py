"""Aligned training examples: sentences, gold graphs, alignments, POS/dep."""
from __future__ import annotations

import logging
import re
from dataclasses import dataclass, replace
from pathlib import Path

from .amr import AmrGraph, PenmanError, iter_blocks, parse_penman, serialize_penman

logger = logging.getLogger(__name__)

ROOT = "ROOT"
_SENSE_RE = re.compile(r"-\d+$")


class CorpusError(ValueError):
    pass


@dataclass(frozen=True)
class Token:
    index: int
    surface: str
    pos: str | None = None
    head: int | str | None = None  # token index, ROOT, or None
    deprel: str | None = None

    def __post_init__(self):
        if self.head is not None and self.head != ROOT:
            if not isinstance(self.head, int) or self.head < 0:
                raise ValueError(f"bad head {self.head!r} for token {self.index}")
            if self.head == self.index:
                raise ValueError(f"token {self.index} is its own head")


@dataclass(frozen=True)
class Alignment:
    start: int
    end: int
    node_path: str
    node: str  # resolved variable

    @property
    def span(self) -> tuple[int, int]:
        return self.start, self.end


@dataclass(frozen=True)
class AlignedExample:
    tokens: tuple[Token, ...]
    graph: AmrGraph
    alignments: tuple[Alignment, ...] = ()
    id: str = ""

    @property
    def words(self) -> list[str]:
        return [t.surface for t in self.tokens]


def make_tokens(words: list[str]) -> tuple[Token, ...]:
    return tuple(Token(i, w) for i, w in enumerate(words))


def _clean_alignments(alignments: list[Alignment], where: str) -> tuple[Alignment, ...]:
    """Keep the first alignment per node; drop spans that overlap a
    different node's span."""
    kept: list[Alignment] = []
    for al in alignments:
        if any(k.node == al.node for k in kept):
            if not any(k.node == al.node and k.span == al.span for k in kept):
                logger.warning("%s: node %s aligned twice; keeping the first", where, al.node)
            continue
        clash = next(
            (k for k in kept if k.span != al.span and k.start < al.end and al.start < k.end), None
        )
        if clash is not None:
            logger.warning("%s: span %d-%d overlaps %d-%d; dropped", where, al.start, al.end, clash.start, clash.end)
            continue
        kept.append(al)
    return tuple(kept)


def parse_alignments(text: str, graph: AmrGraph, n_tokens: int, where: str = "") -> tuple[Alignment, ...]:
    """Parse JAMR-style ``start-end|path[+path...]`` items."""
    out = []
    for item in text.split():
        m = re.fullmatch(r"(\d+)-(\d+)\|([0-9.+]+)", item)
        if m is None:
            raise CorpusError(f"{where}: malformed alignment item {item!r}")
        start, end = int(m.group(1)), int(m.group(2))
        if not 0 <= start < end <= n_tokens:
            raise CorpusError(f"{where}: alignment span {start}-{end} outside {n_tokens} tokens")
        for path in m.group(3).split("+"):
            if path not in graph.paths:
                raise CorpusError(f"{where}: alignment path {path!r} does not resolve")
            var = graph.paths[path]
            if var is None:
                continue  # addresses a constant
            out.append(Alignment(start, end, path, var))
    return _clean_alignments(out, where)


def read_corpus(path: str | Path) -> list[AlignedExample]:
    """Read ``# ::snt`` / ``# ::tok`` / ``# ::alignments`` + PENMAN blocks."""
    text = Path(path).read_text(encoding="utf-8")
    examples = []
    for number, (meta, _, body, line) in enumerate(iter_blocks(text), start=1):
        where = f"{path}: block {number} (line {line})"
        try:
            graph = parse_penman(body)
        except PenmanError as exc:
            raise CorpusError(f"{where}: {exc}") from None
        words = (meta.get("tok") or meta.get("snt") or "").split()
        alignments: tuple[Alignment, ...] = ()
        if meta.get("alignments"):
            alignments = parse_alignments(meta["alignments"], graph, len(words), where)
        examples.append(AlignedExample(make_tokens(words), graph, alignments, meta.get("id", str(number))))
    return examples


def write_corpus(path: str | Path, examples: list[AlignedExample]) -> None:
    chunks = []
    for ex in examples:
        head = f"# ::id {ex.id}\n# ::snt {' '.join(ex.words)}\n"
        body = serialize_penman(ex.graph)
        if ex.alignments:
            # serialization may reorder relations, so paths are recomputed
            path_of: dict[str, str] = {}
            for node_path, var in parse_penman(body).paths.items():
                if var is not None:
                    path_of.setdefault(var, node_path)
            items = " ".join(f"{a.start}-{a.end}|{path_of[a.node]}" for a in ex.alignments if a.node in path_of)
            head += f"# ::alignments {items}\n"
        chunks.append(head + body)
    Path(path).write_text("\n\n".join(chunks) + "\n", encoding="utf-8")


def read_conll_annotations(path: str | Path, examples: list[AlignedExample]) -> list[AlignedExample]:
    """Attach POS tags and dependency heads/labels from a 5-column TSV
    (``index surface pos head deprel``; 0-based heads, ``ROOT``/``-1`` for the root)."""
    sentences: list[list[list[str]]] = [[]]
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            if sentences[-1]:
                sentences.append([])
            continue
        sentences[-1].append(line.rstrip("\n").split("\t"))
    if not sentences[-1]:
        sentences.pop()
    if len(sentences) != len(examples):
        raise CorpusError(f"{path}: {len(sentences)} annotated sentences for {len(examples)} examples")
    out = []
    for k, (rows, ex) in enumerate(zip(sentences, examples), start=1):
        if len(rows) != len(ex.tokens):
            raise CorpusError(f"{path}: token count mismatch at sentence {k}")
        tokens = []
        for row, tok in zip(rows, ex.tokens):
            if len(row) != 5:
                raise CorpusError(f"{path}: sentence {k}: expected 5 columns, got {len(row)}")
            _, _, pos, head, deprel = row
            if head in ("ROOT", "-1"):
                head_val: int | str = ROOT
            elif head.isdigit():
                head_val = int(head)
                if head_val >= len(ex.tokens):
                    raise CorpusError(f"{path}: sentence {k}: head {head_val} out of range")
            else:
                raise CorpusError(f"{path}: sentence {k}: non-numeric head {head!r}")
            try:
                tokens.append(replace(tok, pos=pos, head=head_val, deprel=deprel))
            except ValueError as exc:
                raise CorpusError(f"{path}: sentence {k}: {exc}") from None
        out.append(replace(ex, tokens=tuple(tokens)))
    return out


def _strip_sense(concept: str) -> str:
    return _SENSE_RE.sub("", concept)


def _common_prefix(a: str, b: str) -> int:
    n = 0
    for x, y in zip(a, b):
        if x != y:
            break
        n += 1
    return n


def fallback_align(example: AlignedExample) -> AlignedExample:
    """Exact-match aligner used when no JAMR alignments are available.

    A token aligns to the first unaligned node whose concept equals its
    lowercased surface, equals it once a ``-NN`` sense suffix is stripped, or
    shares a prefix of at least four characters with the stripped concept.
    """
    graph = example.graph
    path_of: dict[str, str] = {}
    for path, var in graph.paths.items():
        if var is not None and var not in path_of:
            path_of[var] = path
    aligned_nodes = {a.node for a in example.alignments}
    covered = {i for a in example.alignments for i in range(a.start, a.end)}
    new = list(example.alignments)
    for tok in example.tokens:
        if tok.index in covered:
            continue
        word = tok.surface.lower()
        for var, concept in graph.nodes.items():
            if var in aligned_nodes:
                continue
            stem = _strip_sense(concept)
            if word == concept or word == stem or _common_prefix(word, stem) >= 4:
                path = path_of.get(var, "")
                new.append(Alignment(tok.index, tok.index + 1, path, var))
                aligned_nodes.add(var)
                break
    return replace(example, alignments=tuple(new))
