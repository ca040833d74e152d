"""Brute-force reference implementations used to cross-check the fast paths."""

import itertools
from functools import lru_cache

import networkx as nx
import numpy as np

from genrl._core.abstract_graph import AbstractGraph, GraphInstance
from genrl._core.spec_lang import (
    Achieve,
    Choice,
    Ensuring,
    Seq,
    Spec,
    Trajectory,
    eval_predicate,
)


def eval_spec_slow(spec: Spec, trajectory: Trajectory) -> bool:
    """Recursive evaluation with explicit enumeration of sequence splits."""
    states = trajectory.states

    @lru_cache(maxsize=None)
    def sat(node_id: int, a: int, b: int) -> bool:
        node = nodes[node_id]
        match node:
            case Achieve(pred=p):
                return any(eval_predicate(p, states[k]) for k in range(a, b + 1))
            case Ensuring(spec=inner, pred=p):
                return sat(id(inner), a, b) and all(
                    eval_predicate(p, states[k]) for k in range(a, b + 1)
                )
            case Seq(first=x, second=y):
                return any(sat(id(x), a, k) and sat(id(y), k + 1, b) for k in range(a, b))
            case Choice(left=x, right=y):
                return sat(id(x), a, b) or sat(id(y), a, b)
        raise AssertionError(node)

    nodes = {}

    def index(node):
        nodes[id(node)] = node
        for child in ("spec", "first", "second", "left", "right"):
            if hasattr(node, child):
                index(getattr(node, child))

    index(spec)
    return sat(id(spec), 0, len(states) - 1)


def root_paths(graph: AbstractGraph, target: int) -> list[list[int]]:
    g = graph.to_networkx()
    if target == graph.initial:
        return [[graph.initial]]
    return [list(p) for p in nx.all_simple_paths(g, graph.initial, target)]


def reach_slow(graph: AbstractGraph, probs: dict, i: int) -> tuple[dict, dict]:
    """Max path-product and its argmax predecessors, by enumerating every path."""
    prob, best_in = {}, {}
    for u in range(graph.n_vertices):
        if u == graph.initial:
            prob[u], best_in[u] = 1.0, frozenset()
            continue
        scored = []
        for path in root_paths(graph, u):
            value = 1.0
            for w, v in itertools.pairwise(path):
                value = value * probs.get(((w, v), i), 0.0)
            scored.append((value, path[-2]))
        best = max(v for v, _ in scored)
        prob[u] = best
        best_in[u] = frozenset(w for v, w in scored if v == best)
    return prob, best_in


def graph_satisfaction_slow(inst: GraphInstance, trajectory: Trajectory) -> bool:
    """Enumerate every path to a final vertex and every visiting index sequence."""
    g = inst.structure
    states = trajectory.states
    size = len(states)
    if not inst.region_mask(g.initial, states[:1])[0]:
        return False

    def safe(mask: np.ndarray, lo: int, hi: int) -> bool:
        return bool(np.all(mask[lo : hi + 1]))

    for f in g.finals:
        tail = inst.final_safe_mask(f, states)
        for path in root_paths(g, f):
            edges = list(itertools.pairwise(path))
            for ks in itertools.product(range(size), repeat=len(edges)):
                seq = [0, *ks]
                if edges and not all(
                    (seq[j + 1] >= seq[j]) if j == 0 else (seq[j + 1] > seq[j])
                    for j in range(len(edges))
                ):
                    continue
                ok = True
                for j, (u, v) in enumerate(edges):
                    lo, hi = seq[j], seq[j + 1]
                    if not inst.region_mask(v, states[hi : hi + 1])[0]:
                        ok = False
                        break
                    if not safe(inst.edge_safe_mask((u, v), states), lo, hi):
                        ok = False
                        break
                if ok and safe(tail, seq[-1], size - 1):
                    return True
    return False
