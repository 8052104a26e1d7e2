"""Smatch: triple-overlap F1 maximized over variable mappings."""
from __future__ import annotations

import logging
import random
import zlib
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

from .amr import AmrGraph, Triple, to_triples

logger = logging.getLogger(__name__)

BRUTE_FORCE_CAP = 8


@dataclass
class MatchResult:
    mapping: dict[str, str | None]
    matched: int
    gold_total: int
    pred_total: int
    precision: float = field(init=False)
    recall: float = field(init=False)
    f1: float = field(init=False)

    def __post_init__(self):
        self.precision, self.recall, self.f1 = prf(self.matched, self.pred_total, self.gold_total)


def prf(matched: int, pred_total: int, gold_total: int) -> tuple[float, float, float]:
    p = matched / pred_total if pred_total else 0.0
    r = matched / gold_total if gold_total else 0.0
    f = 2 * p * r / (p + r) if p + r else 0.0
    return p, r, f


class _Weights:
    """Match potentials between gold and predicted variables.

    ``single[i][j]`` counts instance/attribute triples (and self-loops) that
    match when gold ``i`` maps to pred ``j``; ``pair[(i, j)][(k, l)]`` counts
    relation triples matching when additionally ``k`` maps to ``l``.  Pair
    entries are stored in both directions.
    """

    def __init__(self, gold: set[Triple], pred: set[Triple]):
        self.gold_vars = sorted({t.arg1 for t in gold if t.kind == "instance"})
        self.pred_vars = sorted({t.arg1 for t in pred if t.kind == "instance"})
        self.single: dict[str, dict[str, int]] = defaultdict(lambda: defaultdict(int))
        self.pair: dict[tuple[str, str], dict[tuple[str, str], int]] = defaultdict(lambda: defaultdict(int))

        pred_by_key: dict[tuple[str, str, str], list[Triple]] = defaultdict(list)
        for t in pred:
            key = (t.kind, t.relation, t.arg2 if t.kind != "relation" else "")
            pred_by_key[key].append(t)
        for g in gold:
            if g.kind != "relation":
                for p in pred_by_key.get((g.kind, g.relation, g.arg2), ()):
                    self.single[g.arg1][p.arg1] += 1
                continue
            for p in pred_by_key.get(("relation", g.relation, ""), ()):
                i, k, j, l = g.arg1, g.arg2, p.arg1, p.arg2
                if i == k:
                    if j == l:
                        self.single[i][j] += 1
                    continue
                if j == l:
                    continue
                self.pair[(i, j)][(k, l)] += 1
                self.pair[(k, l)][(i, j)] += 1

    def score(self, mapping: dict[str, str | None]) -> int:
        total = 0
        twice = 0
        for i, j in mapping.items():
            if j is None:
                continue
            total += self.single[i].get(j, 0)
            for (k, l), n in self.pair.get((i, j), {}).items():
                if mapping.get(k) == l:
                    twice += n
        return total + twice // 2

    def local(self, mapping: dict[str, str | None], movers: tuple[str, ...]) -> int:
        """Score contribution involving any variable in ``movers``."""
        total = 0
        for x in movers:
            j = mapping.get(x)
            if j is None:
                continue
            total += self.single[x].get(j, 0)
            for (k, l), n in self.pair.get((x, j), {}).items():
                if mapping.get(k) == l and (k not in movers or k > x):
                    total += n
        return total


def _hill_climb(w: _Weights, mapping: dict[str, str | None]) -> tuple[dict[str, str | None], int]:
    gold_vars = w.gold_vars
    while True:
        used = {j for j in mapping.values() if j is not None}
        free = [j for j in w.pred_vars if j not in used]
        best_gain, best_move = 0, None
        for i in gold_vars:
            old = mapping[i]
            before = w.local(mapping, (i,))
            for j in free:
                mapping[i] = j
                gain = w.local(mapping, (i,)) - before
                mapping[i] = old
                if gain > best_gain:
                    best_gain, best_move = gain, ((i, j),)
        for a, i in enumerate(gold_vars):
            for k in gold_vars[a + 1:]:
                mi, mk = mapping[i], mapping[k]
                if mi == mk:
                    continue
                before = w.local(mapping, (i, k))
                mapping[i], mapping[k] = mk, mi
                gain = w.local(mapping, (i, k)) - before
                mapping[i], mapping[k] = mi, mk
                if gain > best_gain:
                    best_gain, best_move = gain, ((i, mk), (k, mi))
        if best_move is None:
            return mapping, w.score(mapping)
        for i, j in best_move:
            mapping[i] = j


def _concept_seed(w: _Weights, gold: set[Triple], pred: set[Triple]) -> dict[str, str | None]:
    pred_concepts: dict[str, list[str]] = defaultdict(list)
    for t in sorted(pred):
        if t.kind == "instance":
            pred_concepts[t.arg2].append(t.arg1)
    gold_concept = {t.arg1: t.arg2 for t in gold if t.kind == "instance"}
    mapping: dict[str, str | None] = {}
    used: set[str] = set()
    for i in w.gold_vars:
        choice = next((j for j in pred_concepts.get(gold_concept[i], ()) if j not in used), None)
        mapping[i] = choice
        if choice is not None:
            used.add(choice)
    for i in w.gold_vars:
        if mapping[i] is None:
            options = [(-n, j) for j, n in w.single[i].items() if j not in used and n > 0]
            if options:
                mapping[i] = min(options)[1]
                used.add(mapping[i])
    return mapping


def _pair_seed(gold: set[Triple], pred: set[Triple]) -> int:
    text = "\n".join(sorted(map(repr, gold))) + "\0" + "\n".join(sorted(map(repr, pred)))
    return zlib.crc32(text.encode("utf-8"))


def smatch_score(gold: AmrGraph, pred: AmrGraph, restarts: int = 4, seed: int | None = None) -> MatchResult:
    """Hill-climbing Smatch.  Restart 0 starts from a concept-match seed,
    the rest from random injections drawn from a per-pair seeded RNG."""
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    tg, tp = to_triples(gold), to_triples(pred)
    if not tg or not tp:
        return MatchResult({}, 0, len(tg), len(tp))
    w = _Weights(tg, tp)
    rng = random.Random(_pair_seed(tg, tp) if seed is None else seed)
    best_map: dict[str, str | None] = {}
    best = -1
    for r in range(restarts):
        if r == 0:
            start = _concept_seed(w, tg, tp)
        else:
            # random injection; which gold variables stay unmapped is random too
            slots: list[str | None] = list(w.pred_vars) + [None] * max(0, len(w.gold_vars) - len(w.pred_vars))
            rng.shuffle(slots)
            start = dict(zip(w.gold_vars, slots))
        mapping, score = _hill_climb(w, start)
        key = sorted((k, v or "") for k, v in mapping.items())
        if score > best or (score == best and key < sorted((k, v or "") for k, v in best_map.items())):
            best, best_map = score, dict(mapping)
    return MatchResult(best_map, best, len(tg), len(tp))


def brute_force_score(gold: AmrGraph, pred: AmrGraph) -> MatchResult:
    """Globally optimal matching by exhaustive search over injections.

    Scores each complete mapping by renaming the gold triples and
    intersecting with the predicted set; shares no code with the
    hill-climber so it can serve as its oracle.
    """
    tg, tp = to_triples(gold), to_triples(pred)
    if not tg or not tp:
        return MatchResult({}, 0, len(tg), len(tp))
    gold_vars = sorted(t.arg1 for t in tg if t.kind == "instance")
    pred_vars = sorted(t.arg1 for t in tp if t.kind == "instance")
    if min(len(gold_vars), len(pred_vars)) > BRUTE_FORCE_CAP:
        raise ValueError(f"brute force refused: min variable count exceeds {BRUTE_FORCE_CAP}")
    position = {v: n for n, v in enumerate(gold_vars)}
    # a triple is decided once every gold variable it mentions is assigned
    decided_at: list[list[Triple]] = [[] for _ in gold_vars]
    for t in tg:
        last = position[t.arg1]
        if t.kind == "relation":
            last = max(last, position[t.arg2])
        decided_at[last].append(t)
    undecided_after = [0] * (len(gold_vars) + 1)
    for n in range(len(gold_vars) - 1, -1, -1):
        undecided_after[n] = undecided_after[n + 1] + len(decided_at[n])
    spare_nones = max(0, len(gold_vars) - len(pred_vars))
    mapping: dict[str, str | None] = {}
    best: list = [-1, {}]

    def hits(n: int) -> int:
        count = 0
        for t in decided_at[n]:
            a1 = mapping[t.arg1]
            if a1 is None:
                continue
            if t.kind == "relation":
                a2 = mapping[t.arg2]
                if a2 is None:
                    continue
                count += Triple(t.kind, t.relation, a1, a2) in tp
            else:
                count += Triple(t.kind, t.relation, a1, t.arg2) in tp
        return count

    def dfs(n: int, used: frozenset, nones: int, score: int) -> None:
        if score + undecided_after[n] <= best[0]:
            return
        if n == len(gold_vars):
            best[0], best[1] = score, dict(mapping)
            return
        var = gold_vars[n]
        free = [j for j in pred_vars if j not in used]
        for j in free:
            mapping[var] = j
            dfs(n + 1, used | {j}, nones, score + hits(n))
        if nones < spare_nones or not free:
            mapping[var] = None
            dfs(n + 1, used, nones + 1, score + hits(n))
        del mapping[var]

    dfs(0, frozenset(), 0, 0)
    return MatchResult(best[1], best[0], len(tg), len(tp))


def _score_pair(args):
    gold, pred, restarts = args
    result = smatch_score(gold, pred, restarts)
    return result.matched, result.gold_total, result.pred_total


def corpus_score(
    golds: Sequence[AmrGraph],
    preds: Sequence[AmrGraph | None],
    restarts: int = 4,
    jobs: int = 1,
) -> MatchResult:
    """Micro-averaged Smatch over aligned gold/predicted lists.

    A ``None`` prediction counts as the empty graph.
    """
    if len(golds) != len(preds):
        raise ValueError(f"length mismatch: {len(golds)} gold vs {len(preds)} predicted graphs")
    if not golds:
        logger.warning("corpus_score on an empty corpus; defined as 0.0")
        return MatchResult({}, 0, 0, 0)
    work = [(g, p if p is not None else AmrGraph.empty(), restarts) for g, p in zip(golds, preds)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            counts = list(pool.map(_score_pair, work, chunksize=8))
    else:
        counts = [_score_pair(item) for item in work]
    matched = sum(c[0] for c in counts)
    return MatchResult({}, matched, sum(c[1] for c in counts), sum(c[2] for c in counts))
