"""Static oracle: gold graph + alignments -> training action sequence."""
from __future__ import annotations

import logging
import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable

from .amr import AmrGraph, Triple, to_triples, unquote
from .corpus import AlignedExample
from .transitions import (
    ROOT_LABEL,
    Action,
    ParserState,
    TransitionError,
    apply,
    extract_graph,
    initial_state,
    is_dependent_attribute,
    is_legal,
    is_terminal,
)

logger = logging.getLogger(__name__)

_OP_RE = re.compile(r"^op\d+$")
ROOT_UNIT = "<ROOT>"


@dataclass
class OracleResult:
    actions: list[Action]
    reachable: bool
    skipped_triples: int
    graph: AmrGraph = field(default_factory=AmrGraph.empty, repr=False)


class _GoldView:
    """Which gold nodes can be built, and how."""

    def __init__(self, example: AlignedExample):
        g = example.graph
        self.graph = g
        out_edges: dict[str, list[tuple[str, str, str]]] = {}
        in_degree: Counter = Counter()
        for e in g.edges:
            out_edges.setdefault(e[0], []).append(e)
            in_degree[e[2]] += 1
        attrs: dict[str, list[tuple[str, str, str]]] = {}
        for a in g.attributes:
            attrs.setdefault(a[0], []).append(a)

        # named-entity idiom: X :name (N / name :op1 .. :opK)
        self.entity_name: dict[str, str] = {}
        name_owner: dict[str, str] = {}
        for head, label, tail in g.edges:
            if (
                label == "name"
                and g.nodes[tail] == "name"
                and tail not in out_edges
                and in_degree[tail] == 1
                and all(_OP_RE.match(a[1]) for a in attrs.get(tail, ()))
                and head not in self.entity_name
            ):
                self.entity_name[head] = tail
                name_owner[tail] = head

        # one unit per span: the node closest to the root; leftmost span wins a unit
        by_span: dict[tuple[int, int], list] = {}
        for al in sorted(example.alignments, key=lambda a: (a.start, a.end)):
            unit = name_owner.get(al.node, al.node)
            by_span.setdefault(al.span, []).append((al.node_path.count("."), unit))
        self.unit_span: dict[str, tuple[int, ...]] = {}
        for (start, end), cands in sorted(by_span.items()):
            for _, unit in sorted(cands, key=lambda c: c[0]):
                if unit not in self.unit_span:
                    self.unit_span[unit] = tuple(range(start, end))
                    break
        self.span_unit = {span: unit for unit, span in self.unit_span.items()}
        self.token_unit = {i: unit for unit, span in self.unit_span.items() for i in span}

        units = set(self.unit_span)
        self.arcs: list[tuple[str, str, str]] = [
            e for e in g.edges if e[0] in units and e[2] in units and not (e[2] in name_owner and e[1] == "name")
        ]
        if g.root in units:
            self.arcs.append((ROOT_UNIT, ROOT_LABEL, g.root))

        # DEPENDENT targets: attributes, and unaligned leaf children
        self.deps: dict[str, list[tuple[str, str, str | None]]] = {}
        for unit in units:
            todo = []
            for _, label, value in attrs.get(unit, ()):
                todo.append((label, value, None))
            for _, label, tail in out_edges.get(unit, ()):
                if tail in units or tail in name_owner:
                    continue
                if tail in out_edges or tail in attrs:
                    continue
                todo.append((label, g.nodes[tail], tail))
            self.deps[unit] = todo

    def action_for(self, unit: str) -> Action:
        if unit in self.entity_name:
            return Action("ENTITY", label=self.graph.nodes[unit])
        return Action("CONFIRM", concept=self.graph.nodes[unit])


class _Run:
    def __init__(self, example: AlignedExample):
        self.gold = _GoldView(example)
        self.state: ParserState = initial_state(example.tokens)
        self.actions: list[Action] = []
        self.built: dict[str, str] = {}  # gold var -> built var
        self.unit_of_var: dict[str, str] = {}
        self.pending_arcs = set(self.gold.arcs)
        self.pending_deps = {u: list(d) for u, d in self.gold.deps.items()}
        self.leaves_done: set[str] = set()

    # -- helpers -----------------------------------------------------------

    def unit(self, item) -> str | None:
        if item.kind == "root":
            return ROOT_UNIT
        if item.kind == "node":
            return self.unit_of_var.get(item.node_id)
        return self.gold.token_unit.get(item.span[0])

    def present_units(self) -> dict[str, int]:
        """unit -> position (stack depth >= 0; buffer items negative)."""
        where = {}
        for depth, item in enumerate(self.state.stack):
            u = self.unit(item)
            if u is not None:
                where.setdefault(u, depth)
        for k, item in enumerate(self.state.buffer):
            u = self.unit(item)
            if u is not None:
                where.setdefault(u, -1 - k)
        return where

    def needs(self, unit: str, where: dict[str, int]) -> list[int]:
        out = []
        for head, _, tail in self.pending_arcs:
            other = tail if head == unit else head if tail == unit else None
            if other is not None and other != unit and other in where:
                out.append(where[other])
        return out

    def do(self, action: Action) -> None:
        before = self.state
        self.state = apply(self.state, action)
        self.actions.append(action)
        if action.kind in ("CONFIRM", "ENTITY"):
            unit = self.unit(before.stack[0])
            var = self.state.created[-1]
            self.built[unit] = var
            self.unit_of_var[var] = unit
            if action.kind == "ENTITY":
                name_var = self.state.edges[-1][2]
                self.built[self.gold.entity_name[unit]] = name_var

    # -- the rules ---------------------------------------------------------

    def step(self) -> None:
        st = self.state
        stack = st.stack
        top = stack[0] if stack else None
        second = stack[1] if len(stack) > 1 else None
        if top is None:
            self.do(Action("SHIFT"))
            return
        top_unit = self.unit(top)

        if top.kind == "word" and top_unit is not None:
            span = self.gold.unit_span[top_unit]
            if second is not None and second.kind == "word" and self.unit(second) == top_unit:
                if self._try(Action("MERGE")):
                    return
            if top.span != span:
                front = st.buffer[0] if st.buffer else None
                if front is not None and front.kind == "word" and self.unit(front) == top_unit:
                    if self._try(Action("SHIFT")):
                        return
            elif top_unit not in self.built:
                if self._try(self.gold.action_for(top_unit)):
                    return

        if top.kind == "node" and top_unit is not None:
            deps = self.pending_deps.get(top_unit, [])
            while deps:
                label, value, leaf = deps.pop(0)
                if leaf is not None and leaf in self.leaves_done:
                    continue
                if is_dependent_attribute(label, value) != (leaf is None):
                    continue  # cannot be expressed; counted as skipped later
                if self._try(Action("DEPENDENT", label=label, node=value)):
                    if leaf is not None:
                        new_var = self.state.edges[-1][2]
                        self.built[leaf] = new_var
                        self.leaves_done.add(leaf)
                    return

        if second is not None and top_unit is not None and top.kind != "word" and second.kind != "word":
            second_unit = self.unit(second)
            for arc in sorted(self.pending_arcs):
                head, label, tail = arc
                if (head, tail) == (top_unit, second_unit):
                    kind = "LA"
                elif (head, tail) == (second_unit, top_unit):
                    kind = "RA"
                else:
                    continue
                self.pending_arcs.discard(arc)
                if self._try(Action(kind, label=label)):
                    return

        where = self.present_units()
        top_needs = self.needs(top_unit, where) if top_unit is not None and top.kind != "word" else []
        # a word that reaches this point can only be discarded
        done = not top_needs
        if done and self._try(Action("REDUCE")):
            return
        if any(d >= 2 for d in top_needs) or (top.kind == "root" and not top_needs):
            if self._try(Action("SWAP")):
                return
        if st.buffer and self._try(Action("SHIFT")):
            return
        # nothing applies: give up on the top item
        if not self._try(Action("REDUCE")):
            raise TransitionError("oracle stuck")  # pragma: no cover - REDUCE is always available

    def _try(self, action: Action) -> bool:
        if not is_legal(self.state, action):
            return False
        self.do(action)
        return True

    def run(self) -> OracleResult:
        while not is_terminal(self.state):
            self.step()
        try:
            graph = extract_graph(self.state).graph
        except TransitionError:
            graph = AmrGraph.empty()
        skipped = count_skipped(self.gold.graph, graph, self.built)
        return OracleResult(self.actions, skipped == 0, skipped, graph)


def count_skipped(gold: AmrGraph, built: AmrGraph, mapping: dict[str, str]) -> int:
    """Gold triples missing from ``built`` under ``mapping``.

    The TOP triple only counts when something was built but rooted
    elsewhere; an empty output misses every content triple instead.
    """
    have = to_triples(built)
    missing = 0
    for t in to_triples(gold):
        if t.relation == "TOP":
            if not built.is_empty() and built.root != mapping.get(gold.root):
                missing += 1
            continue
        a1 = mapping.get(t.arg1)
        if t.kind == "relation":
            a2 = mapping.get(t.arg2)
            ok = a1 is not None and a2 is not None and Triple(t.kind, t.relation, a1, a2) in have
        else:
            ok = a1 is not None and Triple(t.kind, t.relation, a1, t.arg2) in have
        missing += not ok
    return missing


def derive_actions(example: AlignedExample) -> OracleResult:
    """Action sequence that rebuilds the gold graph as far as alignments allow."""
    return _Run(example).run()


# ---------------------------------------------------------------------------
# inventories


class NodeLexicon:
    """Lowercased word (multiword: space-joined) -> concept counts."""

    def __init__(self, counts: dict[str, Counter] | None = None):
        self.counts: dict[str, Counter] = {k: Counter(v) for k, v in (counts or {}).items()}

    def add(self, word: str, concept: str, n: int = 1) -> None:
        self.counts.setdefault(word.lower(), Counter())[concept] += n

    def candidates(self, word: str) -> list[str]:
        return [c for c, _ in self.ranked(word)]

    def ranked(self, word: str) -> list[tuple[str, int]]:
        counts = self.counts.get(word.lower())
        if not counts:
            return []
        return sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))

    def __contains__(self, word: str) -> bool:
        return word.lower() in self.counts

    def __len__(self) -> int:
        return len(self.counts)

    def concepts(self) -> list[str]:
        return sorted({c for counts in self.counts.values() for c in counts})

    def to_tsv(self) -> str:
        lines = []
        for word in sorted(self.counts):
            for concept, n in self.ranked(word):
                lines.append(f"{word}\t{concept}\t{n}")
        return "\n".join(lines) + ("\n" if lines else "")

    @classmethod
    def from_tsv(cls, text: str) -> "NodeLexicon":
        lex = cls()
        for line in text.splitlines():
            if line.strip():
                word, concept, n = line.split("\t")
                lex.add(word, concept, int(n))
        return lex


_BASE_ORDER = {k: n for n, k in enumerate(("SHIFT", "CONFIRM", "REDUCE", "MERGE", "SWAP", "ENTITY", "DEPENDENT", "LA", "RA"))}


class ActionInventory:
    """Ordered set of instantiated actions (CONFIRM without its concept)."""

    def __init__(self, actions: Iterable[Action] = ()):
        unique = {a.key() for a in actions}
        self.actions: list[Action] = sorted(
            unique, key=lambda a: (_BASE_ORDER[a.kind], a.label or "", a.node or "")
        )
        self.index = {a: n for n, a in enumerate(self.actions)}

    @property
    def size(self) -> int:
        return len(self.actions)

    def __len__(self) -> int:
        return len(self.actions)

    def __contains__(self, action: Action) -> bool:
        return action.key() in self.index

    def to_text(self) -> str:
        return "".join(f"{a}\n" for a in self.actions)

    @classmethod
    def from_text(cls, text: str) -> "ActionInventory":
        from .transitions import parse_action

        return cls(parse_action(line) for line in text.splitlines() if line.strip())


@dataclass
class InventorySet:
    action_inventory: ActionInventory
    lexicon: NodeLexicon
    entity_labels: set[str]
    dependent_pairs: set[tuple[str, str]]


def confirm_pairs(example: AlignedExample, actions: list[Action]) -> list[tuple[str, str]]:
    """(surface, concept) for every CONFIRM in a replay of ``actions``."""
    state = initial_state(example.tokens)
    pairs = []
    for action in actions:
        if action.kind == "CONFIRM":
            pairs.append((state.stack[0].surface.lower(), action.concept))
        state = apply(state, action)
    return pairs


def build_inventories(
    corpus: list[AlignedExample], results: list[OracleResult] | None = None
) -> InventorySet:
    """Collect actions, word->concept lexicon, entity labels and DEPENDENT
    pairs from the oracle derivations of ``corpus``."""
    if results is None:
        results = [derive_actions(ex) for ex in corpus]
    seen: set[Action] = set()
    lexicon = NodeLexicon()
    entities: set[str] = set()
    dependents: set[tuple[str, str]] = set()
    for ex, res in zip(corpus, results):
        for action in res.actions:
            seen.add(action.key())
            if action.kind in ("LA", "RA"):
                # both directions for every arc label
                seen.add(Action("LA", label=action.label))
                seen.add(Action("RA", label=action.label))
            elif action.kind == "ENTITY":
                entities.add(action.label)
            elif action.kind == "DEPENDENT":
                dependents.add((action.label, action.node))
        for word, concept in confirm_pairs(ex, res.actions):
            lexicon.add(word, concept)
    return InventorySet(ActionInventory(seen), lexicon, entities, dependents)
