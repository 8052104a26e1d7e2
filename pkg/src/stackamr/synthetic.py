"""Deterministic toy corpus of aligned sentence/graph pairs.

Sentences come from a handful of templates that exercise every transition:
named entities (single and multiword), negation through DEPENDENT, a control
verb whose subject is reentrant, modifiers, and a sense ambiguity resolved
by context ("plays football" vs "plays the piano").
"""
from __future__ import annotations

import random
from dataclasses import dataclass, field

from .amr import fresh_var, parse_penman, quote
from .corpus import AlignedExample, make_tokens, parse_alignments

PEOPLE = ["John", "Mary", "Anna", "Peter", "Lucy", "Tom"]
CITIES = [["New", "York"], ["Los", "Angeles"], ["Paris"], ["San", "Francisco"], ["Rome"]]
OBJECTS = [("the", "book"), ("an", "apple"), ("the", "car"), ("a", "letter"), ("the", "house")]
ANIMALS = ["dog", "cat", "bird", "horse"]
ADJECTIVES = ["big", "small", "old", "happy"]
ACTIONS = [("sleep", "sleep-01"), ("run", "run-02"), ("eat", "eat-01"), ("swim", "swim-01")]


@dataclass
class _Node:
    var: str
    concept: str
    relations: list = field(default_factory=list)  # (label, _Node | str)


class _Builder:
    def __init__(self, rng: random.Random):
        self.rng = rng
        self.taken: dict[str, str] = {}
        self.words: list[str] = []
        self.aligned: list[tuple[int, int, str]] = []  # span -> variable

    def node(self, concept: str) -> _Node:
        var = fresh_var(concept, self.taken)
        self.taken[var] = concept
        return _Node(var, concept)

    def say(self, *words: str, node: _Node | None = None) -> None:
        start = len(self.words)
        self.words.extend(words)
        if node is not None:
            self.aligned.append((start, len(self.words), node.var))

    def person(self) -> _Node:
        return self.named("person", [self.rng.choice(PEOPLE)])

    def named(self, kind: str, words: list[str]) -> _Node:
        owner = self.node(kind)
        name = self.node("name")
        name.relations = [(f"op{k}", quote(w)) for k, w in enumerate(words, start=1)]
        owner.relations.append(("name", name))
        self.say(*words, node=name)
        return owner


def _render(node: _Node, seen: set[str], depth: int = 1) -> str:
    if node.var in seen:
        return node.var
    seen.add(node.var)
    pad = "\n" + "    " * depth
    parts = [f"({node.var} / {node.concept}"]
    for label, value in node.relations:
        rendered = value if isinstance(value, str) else _render(value, seen, depth + 1)
        parts.append(f"{pad}:{label} {rendered}")
    return "".join(parts) + ")"


def _sentence(rng: random.Random, k: int) -> tuple[list[str], _Node, list]:
    b = _Builder(rng)
    template = k % 6
    if template == 0:  # PERSON wants the OBJ
        subj = b.person()
        root = b.node("want-01")
        b.say("wants", node=root)
        det, noun = rng.choice(OBJECTS)
        obj = b.node(noun)
        b.say(det)
        b.say(noun, node=obj)
        root.relations = [("ARG0", subj), ("ARG1", obj)]
    elif template == 1:  # PERSON does not like the OBJ
        subj = b.person()
        root = b.node("like-01")
        b.say("does", "not")
        b.say("like", node=root)
        det, noun = rng.choice(OBJECTS)
        obj = b.node(noun)
        b.say(det)
        b.say(noun, node=obj)
        root.relations = [("polarity", "-"), ("ARG0", subj), ("ARG1", obj)]
    elif template == 2:  # PERSON wants to ACT
        subj = b.person()
        root = b.node("want-01")
        b.say("wants", node=root)
        word, concept = rng.choice(ACTIONS)
        act = b.node(concept)
        b.say("to")
        b.say(word, node=act)
        act.relations = [("ARG0", subj)]
        root.relations = [("ARG0", subj), ("ARG1", act)]
    elif template == 3:  # PERSON lives in CITY
        subj = b.person()
        root = b.node("live-01")
        b.say("lives", node=root)
        b.say("in")
        city = b.named("city", CITIES[(k // 6) % len(CITIES)])  # cycle so multiword names always occur
        root.relations = [("ARG0", subj), ("location", city)]
    elif template == 4:  # the ADJ ANIMAL sleeps
        b.say("the")
        adj_word = rng.choice(ADJECTIVES)
        adj = b.node(adj_word)
        b.say(adj_word, node=adj)
        animal_word = rng.choice(ANIMALS)
        animal = b.node(animal_word)
        b.say(animal_word, node=animal)
        root = b.node("sleep-01")
        b.say("sleeps", node=root)
        animal.relations = [("mod", adj)]
        root.relations = [("ARG0", animal)]
    else:  # PERSON plays football / the piano
        subj = b.person()
        if rng.random() < 0.5:
            root = b.node("play-01")
            b.say("plays", node=root)
            game = b.node("football")
            b.say("football", node=game)
            root.relations = [("ARG0", subj), ("ARG1", game)]
        else:
            root = b.node("play-11")
            b.say("plays", node=root)
            b.say("the")
            piano = b.node("piano")
            b.say("piano", node=piano)
            root.relations = [("ARG0", subj), ("ARG2", piano)]
    b.say(".")
    return b.words, root, b.aligned


def generate(n: int = 50, seed: int = 7) -> list[AlignedExample]:
    """``n`` aligned examples cycling through the templates."""
    rng = random.Random(seed)
    examples = []
    for k in range(n):
        words, root, aligned = _sentence(rng, k)
        graph = parse_penman(_render(root, set()))
        path_of = {}
        for path, var in graph.paths.items():
            if var is not None and var not in path_of:
                path_of[var] = path
        items = " ".join(f"{s}-{e}|{path_of[v]}" for s, e, v in aligned)
        alignments = parse_alignments(items, graph, len(words), f"synthetic {k + 1}")
        examples.append(AlignedExample(make_tokens(words), graph, alignments, f"synthetic-{k + 1}"))
    return examples
