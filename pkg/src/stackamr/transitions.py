"""Shift-reduce transition system that builds AMR graphs.

Nine actions operate on a stack (top first) and a buffer (front first) that
ends with the ROOT symbol:

    SHIFT           move the buffer front onto the stack
    CONFIRM(c)      turn the top word into a node with concept c
    REDUCE          pop the top
    MERGE           fuse the top two words into one multiword item
    ENTITY(l)       turn the top word(s) into a named entity of type l
    DEPENDENT(r,d)  hang a new child d under the top node via relation r
    LA(r)           arc top --r--> second (both stay on the stack)
    RA(r)           arc second --r--> top (both stay on the stack)
    SWAP            move the second item back to the buffer front

Arcs never pop, so a node can collect several heads (reentrancy).  The
root arc is ``LA(root)`` with ROOT on top, or ``RA(root)`` with ROOT second.
"""
from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field, replace
from typing import Iterable, NamedTuple, Sequence

from .amr import AmrGraph, fresh_var, is_constant, quote
from .corpus import Token

logger = logging.getLogger(__name__)

KINDS = ("SHIFT", "CONFIRM", "REDUCE", "MERGE", "ENTITY", "DEPENDENT", "LA", "RA", "SWAP")
ROOT_LABEL = "root"
# DEPENDENT with one of these labels always creates an attribute
ATTRIBUTE_LABELS = frozenset({"polarity", "mode", "polite"})
STEP_FACTOR = 20


class TransitionError(ValueError):
    pass


@dataclass(frozen=True)
class Action:
    kind: str
    label: str | None = None
    node: str | None = None  # DEPENDENT target concept/constant
    concept: str | None = None  # CONFIRM prediction

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown action kind {self.kind!r}")
        if self.kind in ("ENTITY", "LA", "RA") and not self.label:
            raise ValueError(f"{self.kind} needs a label")
        if self.kind == "DEPENDENT" and not (self.label and self.node):
            raise ValueError("DEPENDENT needs a label and a node")

    def __str__(self) -> str:
        if self.kind == "CONFIRM":
            return f"CONFIRM({self.concept})" if self.concept else "CONFIRM"
        if self.kind == "DEPENDENT":
            return f"DEPENDENT({self.label},{self.node})"
        if self.label is not None:
            return f"{self.kind}({self.label})"
        return self.kind

    def key(self) -> "Action":
        """The action without its CONFIRM concept (what the action head predicts)."""
        return Action("CONFIRM") if self.kind == "CONFIRM" else self


_ACTION_RE = re.compile(r"^([A-Z]+)(?:\((.*)\))?$", re.S)


def parse_action(text: str) -> Action:
    m = _ACTION_RE.match(text.strip())
    if m is None:
        raise ValueError(f"cannot parse action {text!r}")
    kind, arg = m.group(1), m.group(2)
    if kind == "CONFIRM":
        return Action(kind, concept=arg or None)
    if kind == "DEPENDENT":
        if arg is None or "," not in arg:
            raise ValueError(f"cannot parse action {text!r}")
        label, node = arg.split(",", 1)
        return Action(kind, label=label, node=node)
    if kind in ("ENTITY", "LA", "RA"):
        return Action(kind, label=arg)
    if arg is not None:
        raise ValueError(f"{kind} takes no argument: {text!r}")
    return Action(kind)


def is_dependent_attribute(label: str, value: str) -> bool:
    return label in ATTRIBUTE_LABELS or is_constant(value)


@dataclass(frozen=True)
class StackItem:
    kind: str  # word | node | root
    span: tuple[int, ...]
    surface: str
    node_id: str | None = None
    entity_label: str | None = None

    def __post_init__(self):
        if (self.kind == "node") != (self.node_id is not None):
            raise ValueError("node items, and only node items, carry a node_id")

    @property
    def key(self) -> int:
        return self.span[0]


class Extraction(NamedTuple):
    graph: AmrGraph
    dropped: int


@dataclass(frozen=True)
class ParserState:
    tokens: tuple[Token, ...]
    stack: tuple[StackItem, ...] = ()
    buffer: tuple[StackItem, ...] = ()
    history: tuple[Action, ...] = ()
    nodes: dict[str, str] = field(default_factory=dict)
    attributes: tuple[tuple[str, str, str], ...] = ()
    edges: tuple[tuple[str, str, str], ...] = ()
    arcs_built: frozenset = frozenset()
    root_node: str | None = None
    dependents: frozenset = frozenset()
    created: tuple[str, ...] = ()  # node-producing stack items, in creation order
    last_swap: tuple[int, int] | None = None
    step_cap: int = 0

    @property
    def n(self) -> int:
        return len(self.tokens)

    @property
    def remaining(self) -> int:
        return self.step_cap - len(self.history)

    def closing(self) -> bool:
        """Near the step cap only SHIFT/REDUCE stay legal, which always
        finish in exactly 2*|buffer| + |stack| further steps."""
        return self.remaining <= 2 * len(self.buffer) + len(self.stack) + 1

    def label(self, item: StackItem) -> str:
        if item.kind == "node":
            return self.nodes[item.node_id]
        if item.kind == "root":
            return "R"
        return item.surface


def initial_state(tokens: Sequence[Token]) -> ParserState:
    tokens = tuple(tokens)
    n = len(tokens)
    buffer = tuple(StackItem("word", (t.index,), t.surface) for t in tokens)
    buffer += (StackItem("root", (n,), "R"),)
    return ParserState(tokens=tokens, buffer=buffer, step_cap=STEP_FACTOR * (n + 1))


def _root_reducible(state: ParserState) -> bool:
    if state.root_node is not None or state.closing():
        return True
    return len(state.stack) == 1 and not state.buffer


def legal_actions(state: ParserState) -> set[str]:
    """Action kinds with at least one legal parametrization."""
    kinds = set()
    stack, buffer = state.stack, state.buffer
    if buffer:
        kinds.add("SHIFT")
    if stack and (stack[0].kind != "root" or _root_reducible(state)):
        kinds.add("REDUCE")
    if state.closing():
        return kinds
    top = stack[0] if stack else None
    second = stack[1] if len(stack) > 1 else None
    if top is not None and top.kind == "word":
        kinds.update(("CONFIRM", "ENTITY"))
        if second is not None and second.kind == "word":
            kinds.add("MERGE")
    if top is not None and top.kind == "node":
        kinds.add("DEPENDENT")
    if second is not None:
        pair = {top.kind, second.kind}
        if pair == {"node"}:
            kinds.update(("LA", "RA"))
        elif pair == {"node", "root"} and state.root_node is None:
            kinds.add("LA" if top.kind == "root" else "RA")
        if state.last_swap != (second.key, top.key) and second.kind != "root":
            kinds.add("SWAP")
    return kinds


def check(state: ParserState, action: Action) -> str | None:
    """Return why ``action`` is illegal in ``state``, or None if legal."""
    if action.kind not in legal_actions(state):
        return f"{action.kind} not permitted here"
    if action.kind == "CONFIRM" and not action.concept:
        return "CONFIRM needs a concept"
    if action.kind in ("LA", "RA"):
        top, second = state.stack[0], state.stack[1]
        head, tail = (top, second) if action.kind == "LA" else (second, top)
        involves_root = "root" in (top.kind, second.kind)
        if involves_root != (action.label == ROOT_LABEL):
            return "the root label is reserved for arcs from ROOT"
        arc = ("ROOT" if head.kind == "root" else head.node_id, action.label, tail.node_id)
        if arc in state.arcs_built:
            return "duplicate arc"
    if action.kind == "DEPENDENT":
        if (state.stack[0].node_id, action.label, action.node) in state.dependents:
            return "duplicate dependent"
        if action.label == ROOT_LABEL:
            return "the root label is reserved for arcs from ROOT"
    if action.kind == "ENTITY" and action.label == ROOT_LABEL:
        return "bad entity label"
    return None


def is_legal(state: ParserState, action: Action) -> bool:
    return check(state, action) is None


def _new_node(nodes: dict[str, str], concept: str) -> str:
    var = fresh_var(concept, nodes)
    nodes[var] = concept
    return var


def apply(state: ParserState, action: Action) -> ParserState:
    """Return the successor state; raises TransitionError on illegal actions."""
    reason = check(state, action)
    if reason is not None:
        raise TransitionError(f"illegal {action}: {reason}")
    stack, buffer = state.stack, state.buffer
    history = state.history + (action,)
    kind = action.kind
    if kind == "SHIFT":
        return replace(state, stack=(buffer[0],) + stack, buffer=buffer[1:], history=history)
    if kind == "REDUCE":
        return replace(state, stack=stack[1:], history=history)
    if kind == "SWAP":
        top, second = stack[0], stack[1]
        return replace(
            state,
            stack=(top,) + stack[2:],
            buffer=(second,) + buffer,
            history=history,
            last_swap=(top.key, second.key),
        )
    if kind == "MERGE":
        top, second = stack[0], stack[1]
        span = tuple(sorted(top.span + second.span))
        surface = " ".join(state.tokens[i].surface for i in span)
        merged = StackItem("word", span, surface)
        return replace(state, stack=(merged,) + stack[2:], history=history)

    nodes = dict(state.nodes)
    top = stack[0]
    if kind == "CONFIRM":
        var = _new_node(nodes, action.concept)
        item = StackItem("node", top.span, top.surface, var)
        return replace(
            state, stack=(item,) + stack[1:], history=history, nodes=nodes, created=state.created + (var,)
        )
    if kind == "ENTITY":
        var = _new_node(nodes, action.label)
        name = _new_node(nodes, "name")
        ops = tuple((name, f"op{k}", quote(state.tokens[i].surface)) for k, i in enumerate(top.span, start=1))
        item = StackItem("node", top.span, top.surface, var, entity_label=action.label)
        return replace(
            state,
            stack=(item,) + stack[1:],
            history=history,
            nodes=nodes,
            edges=state.edges + ((var, "name", name),),
            attributes=state.attributes + ops,
            created=state.created + (var,),
        )
    if kind == "DEPENDENT":
        dependents = state.dependents | {(top.node_id, action.label, action.node)}
        if is_dependent_attribute(action.label, action.node):
            return replace(
                state,
                history=history,
                dependents=dependents,
                attributes=state.attributes + ((top.node_id, action.label, action.node),),
            )
        var = _new_node(nodes, action.node)
        return replace(
            state,
            history=history,
            nodes=nodes,
            dependents=dependents,
            edges=state.edges + ((top.node_id, action.label, var),),
        )
    # LA / RA
    second = stack[1]
    head, tail = (top, second) if kind == "LA" else (second, top)
    if head.kind == "root":
        arc = ("ROOT", ROOT_LABEL, tail.node_id)
        return replace(state, history=history, arcs_built=state.arcs_built | {arc}, root_node=tail.node_id)
    arc = (head.node_id, action.label, tail.node_id)
    return replace(state, history=history, arcs_built=state.arcs_built | {arc}, edges=state.edges + (arc,))


def is_terminal(state: ParserState) -> bool:
    return not state.stack and not state.buffer


def extract_graph(state: ParserState, root: str | None = None) -> Extraction:
    """Graph rooted at the node attached to ROOT (or ``root`` if given).

    Nodes unreachable from the root are dropped and counted.
    """
    root = root if root is not None else state.root_node
    if root is None:
        raise TransitionError("no root designated")
    full = AmrGraph(dict(state.nodes), state.attributes, state.edges, root)
    keep = full.reachable()
    dropped = len(full.nodes) - len(keep)
    if dropped:
        logger.warning("extract_graph: dropped %d unreachable node(s)", dropped)
    return Extraction(full.restrict(keep), dropped)


def replay(tokens: Sequence[Token], actions: Iterable[Action]) -> ParserState:
    state = initial_state(tokens)
    for action in actions:
        state = apply(state, action)
    return state


def format_actions(actions: Iterable[Action]) -> str:
    return "\n".join(str(a) for a in actions)


def check_invariants(state: ParserState) -> None:
    """Assert the structural invariants of a parser state."""
    n = state.n
    roots_in_buffer = [k for k, it in enumerate(state.buffer) if it.kind == "root"]
    roots_on_stack = [it for it in state.stack if it.kind == "root"]
    assert len(roots_in_buffer) + len(roots_on_stack) <= 1, "ROOT duplicated"
    if roots_in_buffer:
        assert roots_in_buffer == [len(state.buffer) - 1], "ROOT not at the buffer end"
    for item in state.stack + state.buffer:
        if item.kind == "node":
            assert item.node_id in state.nodes, f"dangling node id {item.node_id}"
        else:
            assert item.node_id is None
        assert all(0 <= i <= n for i in item.span)
    spans = [i for item in state.stack + state.buffer for i in item.span]
    assert len(spans) == len(set(spans)), "token covered twice"
    edge_set = set(state.edges)
    for arc in state.arcs_built:
        if arc[0] == "ROOT":
            assert arc[2] == state.root_node
        else:
            assert arc in edge_set, "arc missing from graph"
    for head, _, tail in state.edges:
        assert head in state.nodes and tail in state.nodes
    assert len(state.history) <= state.step_cap, "step cap exceeded"
