"""AMR graphs: data model, PENMAN reading/writing and triple extraction."""
from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, NamedTuple

logger = logging.getLogger(__name__)

_TOKEN_RE = re.compile(
    r'(?P<ws>\s+)|(?P<lp>\()|(?P<rp>\))|(?P<slash>/)'
    r'|(?P<label>:[^\s()/"]*)|(?P<quoted>"(?:[^"\\]|\\.)*")|(?P<symbol>[^\s()/"]+)'
)
# bare symbols shaped like this must resolve to a declared variable
_VARLIKE_RE = re.compile(r"^[a-z]\d*$")
_NUMBER_RE = re.compile(r"^[+-]?\d+(\.\d+)?$")
_UNSAFE_RE = re.compile(r'[\s()/:"]')


class PenmanError(ValueError):
    """Malformed PENMAN input; carries the 1-based line and column."""

    def __init__(self, message: str, line: int = 0, column: int = 0):
        self.line = line
        self.column = column
        where = f" at line {line}, column {column}" if line else ""
        super().__init__(f"{message}{where}")


class Triple(NamedTuple):
    kind: str  # instance | attribute | relation
    relation: str
    arg1: str
    arg2: str


@dataclass(frozen=True)
class AmrGraph:
    """Rooted, labeled, possibly reentrant directed graph.

    ``nodes`` maps variable -> concept.  ``attributes`` holds
    ``(var, label, constant)`` and ``edges`` holds ``(head, label, tail)``;
    constants keep their surface quoting.  The empty graph has no nodes and
    ``root=None``.
    """

    nodes: dict[str, str]
    attributes: tuple[tuple[str, str, str], ...] = ()
    edges: tuple[tuple[str, str, str], ...] = ()
    root: str | None = None
    # JAMR dot-path -> variable (None when the path addresses a constant)
    paths: dict[str, str | None] = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "attributes", tuple(tuple(a) for a in self.attributes))
        object.__setattr__(self, "edges", tuple(tuple(e) for e in self.edges))
        if self.root is None:
            if self.nodes:
                raise ValueError("non-empty graph needs a root")
        elif self.root not in self.nodes:
            raise ValueError(f"root {self.root!r} is not a node")
        for head, label, tail in self.edges:
            if head not in self.nodes or tail not in self.nodes:
                raise ValueError(f"edge {head} :{label} {tail} has an unknown endpoint")
        for var, label, _ in self.attributes:
            if var not in self.nodes:
                raise ValueError(f"attribute :{label} on unknown variable {var!r}")

    @classmethod
    def empty(cls) -> "AmrGraph":
        return cls(nodes={})

    def is_empty(self) -> bool:
        return not self.nodes

    def children(self, var: str) -> list[tuple[str, str]]:
        return [(label, tail) for head, label, tail in self.edges if head == var]

    def reachable(self) -> set[str]:
        if self.root is None:
            return set()
        seen = {self.root}
        todo = [self.root]
        out: dict[str, list[str]] = {}
        for head, _, tail in self.edges:
            out.setdefault(head, []).append(tail)
        while todo:
            for tail in out.get(todo.pop(), ()):
                if tail not in seen:
                    seen.add(tail)
                    todo.append(tail)
        return seen

    def restrict(self, keep: set[str]) -> "AmrGraph":
        """Subgraph induced by ``keep`` (must contain the root)."""
        return AmrGraph(
            nodes={v: c for v, c in self.nodes.items() if v in keep},
            attributes=[a for a in self.attributes if a[0] in keep],
            edges=[e for e in self.edges if e[0] in keep and e[2] in keep],
            root=self.root,
        )


def is_constant(value: str) -> bool:
    return value in ("-", "+") or value.startswith('"') or bool(_NUMBER_RE.match(value))


def unquote(value: str) -> str:
    if len(value) >= 2 and value[0] == value[-1] == '"':
        return value[1:-1].replace('\\"', '"')
    return value


def quote(value: str) -> str:
    return '"' + value.replace('"', '\\"') + '"'


def fresh_var(concept: str, taken: set[str] | dict) -> str:
    """First concept letter plus a disambiguating integer when needed."""
    first = concept[:1].lower()
    if not ("a" <= first <= "z"):
        first = "x"
    if first not in taken:
        return first
    k = 2
    while f"{first}{k}" in taken:
        k += 1
    return f"{first}{k}"


# ---------------------------------------------------------------------------
# PENMAN reading


class _Tok(NamedTuple):
    kind: str
    text: str
    line: int
    col: int


def _tokenize(text: str) -> list[_Tok]:
    toks = []
    line, line_start = 1, 0
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:  # unterminated quote
            raise PenmanError("unterminated string", line, pos - line_start + 1)
        kind = m.lastgroup
        if kind != "ws":
            toks.append(_Tok(kind, m.group(), line, pos - line_start + 1))
        else:
            for i, ch in enumerate(m.group()):
                if ch == "\n":
                    line += 1
                    line_start = pos + i + 1
        pos = m.end()
    return toks


class _Parser:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.i = 0
        self.nodes: dict[str, str] = {}
        # (head, label, kind, value, token, path) in text order
        self.relations: list[tuple[str, str, str, str, _Tok, str]] = []
        self.paths: dict[str, str | None] = {}

    def _peek(self) -> _Tok | None:
        return self.toks[self.i] if self.i < len(self.toks) else None

    def _next(self, expected: str | None = None) -> _Tok:
        tok = self._peek()
        if tok is None:
            last = self.toks[-1] if self.toks else _Tok("", "", 1, 1)
            raise PenmanError("unexpected end of input (unbalanced parentheses?)", last.line, last.col)
        if expected is not None and tok.kind != expected:
            raise PenmanError(f"expected {expected}, found {tok.text!r}", tok.line, tok.col)
        self.i += 1
        return tok

    def parse(self) -> AmrGraph:
        if not self.toks:
            raise PenmanError("empty input", 1, 1)
        root = self._node("0")
        extra = self._peek()
        if extra is not None:
            raise PenmanError(f"trailing input {extra.text!r}", extra.line, extra.col)
        edges, attributes = [], []
        for head, label, kind, value, tok, path in self.relations:
            if kind == "node":
                edges.append((head, label, value))
            elif kind == "symbol" and value in self.nodes:
                edges.append((head, label, value))
                self.paths[path] = value
            elif kind == "symbol" and _VARLIKE_RE.match(value):
                raise PenmanError(f"reference to undeclared variable {value!r}", tok.line, tok.col)
            else:
                attributes.append((head, label, value))
                self.paths[path] = None
        return AmrGraph(self.nodes, attributes, edges, root, paths=self.paths)

    def _node(self, path: str) -> str:
        self._next("lp")
        var_tok = self._next("symbol")
        var = var_tok.text
        self._next("slash")
        concept_tok = self._next()
        if concept_tok.kind not in ("symbol", "quoted"):
            raise PenmanError(f"expected concept, found {concept_tok.text!r}", concept_tok.line, concept_tok.col)
        if var in self.nodes and self.nodes[var] != concept_tok.text:
            raise PenmanError(
                f"variable {var!r} redefined with concept {concept_tok.text!r}", var_tok.line, var_tok.col
            )
        self.nodes[var] = concept_tok.text
        self.paths[path] = var
        child = 0
        while True:
            tok = self._next()
            if tok.kind == "rp":
                return var
            if tok.kind != "label" or len(tok.text) < 2:
                raise PenmanError(f"expected relation or ')', found {tok.text!r}", tok.line, tok.col)
            label = tok.text[1:]
            value = self._peek()
            if value is None or value.kind not in ("lp", "quoted", "symbol"):
                where = value or tok
                raise PenmanError(f"missing value for :{label}", where.line, where.col)
            child_path = f"{path}.{child}"
            child += 1
            if value.kind == "lp":
                # reserve the slot so text order is kept for nested nodes
                slot = len(self.relations)
                self.relations.append(None)  # type: ignore[arg-type]
                tail = self._node(child_path)
                self.relations[slot] = (var, label, "node", tail, value, child_path)
            else:
                self.i += 1
                self.relations.append((var, label, value.kind, value.text, value, child_path))


def parse_penman(text: str) -> AmrGraph:
    """Parse one PENMAN expression into an :class:`AmrGraph`."""
    return _Parser(text).parse()


# ---------------------------------------------------------------------------
# PENMAN writing


def _format_constant(value: str) -> str:
    if value.startswith('"') or not _UNSAFE_RE.search(value):
        return value
    return quote(value)


def _format_concept(concept: str) -> str:
    return concept if not _UNSAFE_RE.search(concept) else quote(concept)


def serialize_penman(graph: AmrGraph, indent: int = 4) -> str:
    """Render ``graph`` as PENMAN text.

    Each variable's concept is printed at its first mention in a depth-first
    walk from the root; later mentions are bare variables.  Nodes that cannot
    be reached from the root have no place in the tree and are dropped.
    """
    if graph.is_empty():
        return "()"
    out_edges: dict[str, list[tuple[str, str]]] = {}
    for head, label, tail in graph.edges:
        out_edges.setdefault(head, []).append((label, tail))
    out_attrs: dict[str, list[tuple[str, str]]] = {}
    for var, label, value in graph.attributes:
        out_attrs.setdefault(var, []).append((label, value))
    seen: set[str] = set()

    def render(var: str, depth: int) -> str:
        seen.add(var)
        parts = [f"({var} / {_format_concept(graph.nodes[var])}"]
        pad = "\n" + " " * (indent * (depth + 1))
        for label, tail in out_edges.get(var, ()):
            if tail in seen:
                parts.append(f"{pad}:{label} {tail}")
            else:
                parts.append(f"{pad}:{label} {render(tail, depth + 1)}")
        for label, value in out_attrs.get(var, ()):
            parts.append(f"{pad}:{label} {_format_constant(value)}")
        return "".join(parts) + ")"

    text = render(graph.root, 0)
    dropped = set(graph.nodes) - seen
    if dropped:
        logger.warning("serialize_penman: dropped %d unreachable node(s)", len(dropped))
    return text


# ---------------------------------------------------------------------------
# triples


def to_triples(graph: AmrGraph) -> set[Triple]:
    """Smatch triples: instances, attributes, relations and the TOP attribute."""
    if graph.is_empty():
        return set()
    triples = {Triple("instance", "instance", v, c) for v, c in graph.nodes.items()}
    triples.update(Triple("attribute", label, v, unquote(value)) for v, label, value in graph.attributes)
    triples.update(Triple("relation", label, h, t) for h, label, t in graph.edges)
    triples.add(Triple("attribute", "TOP", graph.root, graph.nodes[graph.root]))
    return triples


def isomorphic(a: AmrGraph, b: AmrGraph) -> bool:
    """Exact graph identity up to variable renaming (backtracking search)."""
    if len(a.nodes) != len(b.nodes) or len(a.edges) != len(b.edges):
        return False
    if sorted(a.nodes.values()) != sorted(b.nodes.values()):
        return False
    ta, tb = to_triples(a), to_triples(b)
    if len(ta) != len(tb):
        return False
    if a.is_empty():
        return True
    avars = sorted(a.nodes, key=lambda v: (v != a.root, v))
    by_concept: dict[str, list[str]] = {}
    for v, c in b.nodes.items():
        by_concept.setdefault(c, []).append(v)

    def rename(triples, mapping):
        return {Triple(t.kind, t.relation, mapping[t.arg1], mapping.get(t.arg2, t.arg2) if t.kind == "relation" else t.arg2) for t in triples}

    def extend(i: int, mapping: dict[str, str], used: set[str]) -> bool:
        if i == len(avars):
            return rename(ta, mapping) == tb
        v = avars[i]
        for w in by_concept[a.nodes[v]]:
            if w in used:
                continue
            mapping[v] = w
            used.add(w)
            if extend(i + 1, mapping, used):
                return True
            used.discard(w)
            del mapping[v]
        return False

    return extend(0, {}, set())


# ---------------------------------------------------------------------------
# files


def iter_blocks(text: str) -> Iterator[tuple[dict[str, str], list[str], str, int]]:
    """Yield ``(metadata, comment_lines, graph_text, first_line)`` per block.

    Blocks are separated by blank lines; ``# ::key value`` comments become
    metadata entries.
    """
    lines = text.splitlines()
    block: list[tuple[int, str]] = []
    for lineno, line in enumerate(lines + [""], start=1):
        if line.strip():
            block.append((lineno, line))
            continue
        if not block:
            continue
        meta: dict[str, str] = {}
        comments = []
        body = []
        for _, ln in block:
            if ln.lstrip().startswith("#") and not body:
                comments.append(ln)
                for m in re.finditer(r"::(\S+)(?:[ \t]+((?:(?!\s::\S).)*))?", ln):
                    meta.setdefault(m.group(1), (m.group(2) or "").strip())
            else:
                body.append(ln)
        first = block[0][0]
        block = []
        if body:
            yield meta, comments, "\n".join(body), first


def read_amr_file(path: str | Path) -> list[tuple[dict[str, str], AmrGraph]]:
    text = Path(path).read_text(encoding="utf-8")
    out = []
    for meta, _, body, first in iter_blocks(text):
        try:
            out.append((meta, parse_penman(body)))
        except PenmanError as exc:
            raise PenmanError(f"{path}: graph starting at line {first}: {exc}") from None
    return out


def write_amr_file(path: str | Path, graphs: list[AmrGraph], metas: list[dict[str, str]] | None = None) -> None:
    chunks = []
    for k, graph in enumerate(graphs):
        head = ""
        if metas is not None:
            head = "".join(f"# ::{key} {value}\n" for key, value in metas[k].items())
        chunks.append(head + serialize_penman(graph))
    Path(path).write_text("\n\n".join(chunks) + "\n", encoding="utf-8")
