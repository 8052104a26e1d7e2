"""Random small AMR graphs for Smatch property tests."""
from __future__ import annotations

import random

from stackamr.amr import AmrGraph

CONCEPTS = ["a", "b", "c"]
LABELS = ["ARG0", "ARG1", "mod"]
CONSTANTS = ["-", "1", '"x"']


def random_graph(rng: random.Random, max_vars: int = 6, prefix: str = "v") -> AmrGraph:
    """Connected graph over a small concept alphabet, so that many
    mappings tie and the search has real work to do."""
    n = rng.randint(1, max_vars)
    names = [f"{prefix}{k}" for k in range(n)]
    rng.shuffle(names)
    nodes = {v: rng.choice(CONCEPTS) for v in names}
    edges = set()
    for k in range(1, n):
        edges.add((names[rng.randrange(k)], rng.choice(LABELS), names[k]))
    for _ in range(rng.randint(0, n)):
        edges.add((rng.choice(names), rng.choice(LABELS), rng.choice(names)))
    attributes = {(rng.choice(names), "polarity", rng.choice(CONSTANTS)) for _ in range(rng.randint(0, 2))}
    return AmrGraph(nodes, tuple(sorted(attributes)), tuple(sorted(edges)), names[0])


def rename(graph: AmrGraph, mapping: dict[str, str]) -> AmrGraph:
    return AmrGraph(
        {mapping[v]: c for v, c in graph.nodes.items()},
        tuple((mapping[v], r, c) for v, r, c in graph.attributes),
        tuple((mapping[h], r, mapping[t]) for h, r, t in graph.edges),
        mapping[graph.root],
    )
