"""
Abstract graphs: DAGs of subgoal regions compiled from specifications.

Vertex 0 is always the initial vertex; its region is the support of the task
instance's initial distribution and is stored as `None`.
"""

import logging
from dataclasses import dataclass, field

import networkx as nx
import numpy as np
from pydantic import model_validator

from genrl._core import bases
from genrl._core.envs import InitDistribution
from genrl._core.spec_lang import (
    Achieve,
    AtomicPredicate,
    Choice,
    Ensuring,
    Seq,
    Spec,
    Trajectory,
    predicate_mask,
)
from genrl._core.tasks import InductiveTask
from genrl.errors import InvalidInputError

log = logging.getLogger(__name__)

Edge = tuple[int, int]
Safety = tuple[AtomicPredicate, ...]


class AbstractGraph(bases.Model):
    n_vertices: int
    edges: tuple[Edge, ...]
    finals: tuple[int, ...]
    regions: tuple[AtomicPredicate | None, ...]
    edge_safety: tuple[Safety, ...]
    final_safety: tuple[Safety, ...]
    initial: int = 0

    @model_validator(mode="after")
    def _check(self) -> "AbstractGraph":
        n = self.n_vertices
        if self.initial != 0 or n < 1:
            raise InvalidInputError("Graph needs at least one vertex, with vertex 0 initial.")
        if len(self.regions) != n or len(self.final_safety) != n:
            raise InvalidInputError("Graph regions and final safety must cover every vertex.")
        if len(self.edge_safety) != len(self.edges):
            raise InvalidInputError("Graph needs one safety set per edge.")
        if any(r is None for v, r in enumerate(self.regions) if v != self.initial):
            raise InvalidInputError("Only the initial vertex may have the init region.")
        if not self.finals or any(not 0 <= f < n for f in self.finals):
            raise InvalidInputError("Graph finals must be existing vertices.")
        g = self.to_networkx()
        if not nx.is_directed_acyclic_graph(g):
            raise InvalidInputError("Graph must be acyclic.")
        if g.in_degree(self.initial) != 0:
            raise InvalidInputError("The initial vertex must have no incoming edges.")
        if len(nx.descendants(g, self.initial)) != n - 1:
            raise InvalidInputError("Every vertex must be reachable from the initial vertex.")
        return self

    def to_networkx(self) -> nx.DiGraph:
        g = nx.DiGraph()
        g.add_nodes_from(range(self.n_vertices))
        g.add_edges_from(self.edges)
        return g

    def topological_order(self) -> list[int]:
        return list(nx.lexicographical_topological_sort(self.to_networkx()))

    def out_edges(self, u: int) -> list[Edge]:
        return sorted(e for e in self.edges if e[0] == u)

    def in_edges(self, u: int) -> list[Edge]:
        return sorted(e for e in self.edges if e[1] == u)

    def edge_index(self, e: Edge) -> int:
        return self.edges.index(e)

    def branching_vertices(self) -> list[int]:
        return [u for u in range(self.n_vertices) if len(self.out_edges(u)) > 1]

    def is_final(self, u: int) -> bool:
        return u in self.finals

    def paths(self) -> list[list[int]]:
        """Every vertex path from the initial vertex to a final vertex."""
        g = self.to_networkx()
        out = [[self.initial]] if self.is_final(self.initial) else []
        for f in sorted(self.finals):
            if f != self.initial:
                out.extend(nx.all_simple_paths(g, self.initial, f))
        return sorted(out)


def edge_label(e: Edge) -> str:
    return f"{e[0]}->{e[1]}"


def _union(a: Safety, b: Safety) -> Safety:
    return a + tuple(p for p in b if p not in a)


@dataclass
class _Draft:
    n: int
    edges: list[Edge]
    edge_safety: list[Safety]
    finals: list[int]
    regions: list[AtomicPredicate | None]
    final_safety: dict[int, Safety] = field(default_factory=dict)


def _compile(spec: Spec) -> _Draft:
    match spec:
        case Achieve(pred=p):
            return _Draft(
                n=2, edges=[(0, 1)], edge_safety=[()], finals=[1], regions=[None, p],
                final_safety={1: ()},
            )
        case Ensuring(spec=inner, pred=p):
            d = _compile(inner)
            d.edge_safety = [_union(s, (p,)) for s in d.edge_safety]
            d.final_safety = {f: _union(d.final_safety[f], (p,)) for f in d.finals}
            return d
        case Seq(first=a, second=b):
            d1, d2 = _compile(a), _compile(b)
            n1 = d1.n

            def m(v: int) -> int:
                return n1 + v - 1

            edges, safety = list(d1.edges), list(d1.edge_safety)
            for (u, w), s in zip(d2.edges, d2.edge_safety, strict=True):
                if u == 0:
                    for f in d1.finals:
                        edges.append((f, m(w)))
                        safety.append(_union(s, d1.final_safety[f]))
                else:
                    edges.append((m(u), m(w)))
                    safety.append(s)
            return _Draft(
                n=n1 + d2.n - 1,
                edges=edges,
                edge_safety=safety,
                finals=[m(f) for f in d2.finals],
                regions=d1.regions + d2.regions[1:],
                final_safety={m(f): s for f, s in d2.final_safety.items()},
            )
        case Choice(left=a, right=b):
            d1, d2 = _compile(a), _compile(b)
            n1 = d1.n

            def m(v: int) -> int:
                return 0 if v == 0 else n1 + v - 1

            return _Draft(
                n=n1 + d2.n - 1,
                edges=d1.edges + [(m(u), m(w)) for u, w in d2.edges],
                edge_safety=d1.edge_safety + d2.edge_safety,
                finals=d1.finals + [m(f) for f in d2.finals],
                regions=d1.regions + d2.regions[1:],
                final_safety={**d1.final_safety, **{m(f): s for f, s in d2.final_safety.items()}},
            )
    raise InvalidInputError(f"Not a formula: {spec!r}")


def compile_spec(spec: Spec) -> AbstractGraph:
    """
    Compile a formula into an abstract graph.

    - `achieve b`: an edge from the initial vertex to a final vertex with region `b`.
    - `phi ensuring b`: `b` joins the safety set of every edge and final vertex.
    - `phi1; phi2`: each final of `phi1` takes over the out-edges of `phi2`'s initial
      vertex, which disappears; its final safety joins those edges' safety.
    - `phi1 or phi2`: the two initial vertices merge.
    """
    d = _compile(spec)
    order = sorted(range(len(d.edges)), key=lambda k: d.edges[k])
    graph = AbstractGraph(
        n_vertices=d.n,
        edges=tuple(d.edges[k] for k in order),
        edge_safety=tuple(d.edge_safety[k] for k in order),
        finals=tuple(sorted(d.finals)),
        regions=tuple(d.regions),
        final_safety=tuple(d.final_safety.get(v, ()) for v in range(d.n)),
    )
    log.debug(
        "Compiled graph with %s vertices and %s edges.", graph.n_vertices, len(graph.edges)
    )
    return graph


@dataclass(frozen=True, eq=False)
class GraphInstance:
    """
    The predicates of an abstract graph for one task instance.

    :param init: Initial distribution standing in for the initial vertex's region;
        `None` accepts any first state.
    """

    structure: AbstractGraph
    index: int
    regions: tuple[AtomicPredicate | None, ...]
    edge_safety: tuple[Safety, ...]
    final_safety: tuple[Safety, ...]
    init: InitDistribution | None = None

    @classmethod
    def of(cls, graph: AbstractGraph, init: InitDistribution | None = None):
        return cls(
            structure=graph,
            index=0,
            regions=graph.regions,
            edge_safety=graph.edge_safety,
            final_safety=graph.final_safety,
            init=init,
        )

    def region_mask(self, v: int, states: np.ndarray) -> np.ndarray:
        region = self.regions[v]
        if region is None:
            if self.init is None:
                return np.ones(states.shape[:-1], dtype=bool)
            flat = states.reshape(-1, states.shape[-1])
            hits = np.array([self.init.contains(s) for s in flat], dtype=bool)
            return hits.reshape(states.shape[:-1])
        return predicate_mask(region, states)

    def edge_safe_mask(self, e: Edge, states: np.ndarray) -> np.ndarray:
        return _safe_mask(self.edge_safety[self.structure.edge_index(e)], states)

    def final_safe_mask(self, v: int, states: np.ndarray) -> np.ndarray:
        return _safe_mask(self.final_safety[v], states)


def _safe_mask(safety: Safety, states: np.ndarray) -> np.ndarray:
    ok = np.ones(states.shape[:-1], dtype=bool)
    for p in safety:
        ok &= predicate_mask(p, states)
    return ok


def instantiate_graph(graph: AbstractGraph, task: InductiveTask, i: int) -> GraphInstance:
    """Predicates of `graph` moved to instance `i` of `task`; the DAG is shared."""
    i = task.check_index(i)

    def at(safety: Safety) -> Safety:
        return tuple(task.predicate_at(p, i) for p in safety)

    return GraphInstance(
        structure=graph,
        index=i,
        regions=tuple(None if r is None else task.predicate_at(r, i) for r in graph.regions),
        edge_safety=tuple(at(s) for s in graph.edge_safety),
        final_safety=tuple(at(s) for s in graph.final_safety),
        init=task.init_at(i),
    )


def _first_false_from(ok: np.ndarray) -> np.ndarray:
    """`out[a]` is the first index >= a where `ok` is False (len(ok) when none)."""
    size = len(ok)
    out = np.full(size + 1, size)
    for a in range(size - 1, -1, -1):
        out[a] = out[a + 1] if ok[a] else a
    return out


def check_graph_satisfaction(inst: GraphInstance, trajectory: Trajectory) -> bool:
    """
    Whether some path to a final vertex and indices `0 = k_0 <= k_1 < ... < k_l <= t`
    visit each vertex's region in order, stay safe along each edge between the
    visits, and stay safe for the final vertex from `k_l` to the end.
    """
    g = inst.structure
    states = trajectory.states
    size = states.shape[0]
    at = np.zeros((g.n_vertices, size), dtype=bool)
    at[g.initial, 0] = bool(inst.region_mask(g.initial, states[:1])[0])
    for u in g.topological_order():
        if not at[u].any():
            continue
        for e in g.out_edges(u):
            w = e[1]
            in_region = inst.region_mask(w, states)
            limit = _first_false_from(inst.edge_safe_mask(e, states))
            strict = 0 if u == g.initial else 1
            for k in np.flatnonzero(at[u]):
                lo, hi = k + strict, limit[k]
                if lo < hi:
                    at[w, lo:hi] |= in_region[lo:hi]
    for f in g.finals:
        tail_ok = _first_false_from(inst.final_safe_mask(f, states))
        if any(tail_ok[k] == size for k in np.flatnonzero(at[f])):
            return True
    return False


def to_dot(graph: AbstractGraph) -> str:
    """Graphviz DOT text: vertices labelled by region, edges by safety set."""
    lines = ["digraph abstract_graph {"]
    for v in range(graph.n_vertices):
        region = graph.regions[v]
        label = "init" if region is None else (region.name or region.describe())
        shape = "doublecircle" if graph.is_final(v) else "circle"
        lines.append(f'  {v} [label="{label}", shape={shape}];')
    for e, safety in zip(graph.edges, graph.edge_safety, strict=True):
        label = ", ".join(p.name or p.describe() for p in safety)
        lines.append(f'  {e[0]} -> {e[1]} [label="{label}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"
