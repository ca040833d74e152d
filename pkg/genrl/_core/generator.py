"""
Learning policy generators.

The abstract graph of the task is traversed in topological order. At each vertex the
best-path success probabilities and the distributions they induce are computed per
training instance; each out-edge then gets a base policy and a kappa-polynomial (or,
for the baselines, one shared policy). Guards at branching vertices are learned last,
from the instances whose best paths run through each out-edge.
"""

import logging
import time
from collections import defaultdict, deque
from collections.abc import Callable, Mapping, Sequence
from dataclasses import dataclass, field, replace

import numpy as np

from genrl._core import bases
from genrl._core.abstract_graph import (
    AbstractGraph,
    Edge,
    GraphInstance,
    compile_spec,
    edge_label,
    instantiate_graph,
)
from genrl._core.decision_tree import DecisionTree, TreeLeaf, fit_tree, to_expression
from genrl._core.envs import EmpiricalInit, Environment, InitDistribution, sample_states
from genrl._core.policy import (
    EdgePolicy,
    FeatureMode,
    KappaTemplate,
    PolicyGenerator,
    PolicyParams,
    PolicyShape,
    execute_edge_policy,
    initial_params,
    instance_features,
)
from genrl._core.tasks import InductiveTask
from genrl._core.trainer import (
    STREAM_ESTIMATE,
    STREAM_INIT,
    EdgeInstance,
    RewardSpec,
    TelemetryRow,
    edge_success,
    learn_base_policy,
    learn_kappa,
    learn_shared_policy,
)
from genrl._utils.config import ArsConfig, ExperimentConfig
from genrl._utils.utils import rng_for
from genrl.errors import EmptyDistributionError, InvalidInputError, UnguardableVertexError

log = logging.getLogger(__name__)

STREAM_INDUCE = 7

EdgeProbs = Mapping[tuple[Edge, int], float]


@dataclass(frozen=True)
class ReachTables:
    """
    :param prob: `(vertex, instance)` to the best success probability of reaching it.
    :param best_in: `(vertex, instance)` to the predecessors attaining that probability.
    """

    prob: dict[tuple[int, int], float]
    best_in: dict[tuple[int, int], frozenset[int]]


def _reach_at(
    graph: AbstractGraph, u: int, i: int, edge_probs: EdgeProbs, prob: Mapping
) -> tuple[float, frozenset[int]]:
    if u == graph.initial:
        return 1.0, frozenset()
    scores = {}
    for w, _ in graph.in_edges(u):
        p = edge_probs.get(((w, u), i), 0.0)
        if not 0.0 <= p <= 1.0:
            raise InvalidInputError(f"Edge probability {p} for {edge_label((w, u))} is not in [0, 1].")
        scores[w] = prob[(w, i)] * p
    best = max(scores.values())
    return best, frozenset(w for w, s in scores.items() if s == best)


def compute_reach_tables(
    graph: AbstractGraph, edge_probs: EdgeProbs, train: Sequence[int]
) -> ReachTables:
    """
    `P(u, i) = max P(w, i) * p(w -> u, i)` over in-edges, in topological order.

    Every argmax predecessor is kept. Missing edge probabilities count as 0.
    """
    prob, best_in = {}, {}
    for u in graph.topological_order():
        for i in train:
            prob[(u, i)], best_in[(u, i)] = _reach_at(graph, u, i, edge_probs, prob)
    return ReachTables(prob=prob, best_in=best_in)


def induce_distribution(
    u: int,
    inst: GraphInstance,
    best_in: frozenset[int],
    policies: Mapping[Edge, PolicyParams],
    sources: Mapping[int, InitDistribution],
    env: Environment,
    shape: PolicyShape,
    n_particles: int,
    max_steps: int,
    rng: np.random.Generator,
) -> InitDistribution:
    """
    Particles at which edge-policy rollouts from each best predecessor first enter the
    region of `u` without leaving the edge's safety set.

    The predecessors contribute in turn so that each is equally represented.

    :param policies: Parameters of each in-edge of `u` for this instance.
    :param sources: Distribution already induced at each predecessor.
    """
    graph = inst.structure
    if u == graph.initial:
        return inst.init
    index = inst.index if shape.include_task_index else None
    pools = []
    for w in sorted(best_in):
        e = (w, u)
        starts = sample_states(env, sources[w], rng, n_particles)
        rollout = execute_edge_policy(
            policies[e],
            shape,
            env,
            starts,
            inst.regions[u],
            inst.edge_safety[graph.edge_index(e)],
            max_steps,
            index,
        )
        pools.append(rollout.final_states[rollout.entered & rollout.safe])
    particles = [pool[k] for k in range(n_particles) for pool in pools if k < len(pool)]
    if not particles:
        e = (min(best_in), u) if best_in else (graph.initial, u)
        err = EmptyDistributionError(
            f"No rollout along {edge_label(e)} entered vertex {u} for instance {inst.index}.",
            edge=e,
            instance_index=inst.index,
        )
        log.error(err, exc_info=True)
        raise err
    return EmpiricalInit(particles=np.stack(particles[:n_particles]))


def build_decision_sets(
    graph: AbstractGraph, tables: ReachTables, train: Sequence[int]
) -> dict[Edge, set[int]]:
    """
    Instances whose best path runs through each edge.

    Walks backwards from the final vertices. An instance starts at the finals attaining
    its best final probability (none when that is 0) and moves from `u` to every `v` in
    its best-in set of `u`, joining the decision set of `v -> u`. A vertex is visited
    once all of its successors have been.
    """
    sets: dict[Edge, set[int]] = {e: set() for e in graph.edges}
    on_path: dict[int, set[int]] = defaultdict(set)
    for i in train:
        best = max(tables.prob[(f, i)] for f in graph.finals)
        if best > 0:
            for f in graph.finals:
                if tables.prob[(f, i)] == best:
                    on_path[f].add(i)
    g = graph.to_networkx()
    pending = {v: g.out_degree(v) for v in g.nodes}
    queue = deque(sorted(v for v, n in pending.items() if n == 0))
    while queue:
        u = queue.popleft()
        for v in sorted(g.predecessors(u)):
            for i in sorted(on_path[u]):
                if v in tables.best_in[(u, i)]:
                    sets[(v, u)].add(i)
                    on_path[v].add(i)
            pending[v] -= 1
            if pending[v] == 0:
                queue.append(v)
    return sets


def learn_guards(
    graph: AbstractGraph,
    decision_sets: Mapping[Edge, set[int]],
    features: Mapping[int, np.ndarray],
    vertices: Sequence[int] | None = None,
) -> dict[int, DecisionTree]:
    """
    One decision tree per branching vertex, mapping instance features to an out-edge.

    An instance found in several out-edges' decision sets is assigned to the first edge
    in vertex order.

    :param vertices: Branching vertices to guard; all of them by default.
    :raises UnguardableVertexError: When no instance runs through any out-edge.
    """
    guards = {}
    for u in graph.branching_vertices() if vertices is None else vertices:
        seen, x, y = set(), [], []
        for e in graph.out_edges(u):
            for i in sorted(decision_sets.get(e, ())):
                if i not in seen:
                    seen.add(i)
                    x.append(np.asarray(features[i], dtype=np.float64))
                    y.append(e)
        if not y:
            err = UnguardableVertexError(f"No instance routes through vertex {u}.", vertex=u)
            log.error(err, exc_info=True)
            raise err
        guards[u] = fit_tree(np.stack(x), y)
        log.info("Guard at vertex %s: %s", u, to_expression(guards[u]))
    return guards


class EdgeReport(bases.Model):
    edge: str
    base_score: float | None = None
    base_success: float | None = None
    flagged: bool = False
    kappa_score: float | None = None
    train: list[int] = []
    dropped: list[int] = []
    success: dict[int, float] = {}


@dataclass(frozen=True, eq=False)
class TrainingResult:
    generator: PolicyGenerator
    graph: AbstractGraph
    tables: ReachTables
    decision_sets: dict[Edge, set[int]]
    edge_reports: dict[Edge, EdgeReport]
    telemetry: dict[str, list[TelemetryRow]] = field(default_factory=dict)
    timings: dict[str, float] = field(default_factory=dict)
    unreached: dict[int, list[int]] = field(default_factory=dict)


@dataclass
class _EdgeOutcome:
    policy: EdgePolicy
    report: EdgeReport
    telemetry: dict[str, list[TelemetryRow]]


EdgeLearner = Callable[[Edge, dict[int, EdgeInstance]], _EdgeOutcome]


class _Timer:
    def __init__(self):
        self.totals: dict[str, float] = defaultdict(float)

    def add(self, phase: str, start: float) -> None:
        self.totals[phase] += time.perf_counter() - start


def _edge_instances(
    task: InductiveTask,
    insts: Mapping[int, GraphInstance],
    dists: Mapping[tuple[int, int], InitDistribution],
    e: Edge,
    train: Sequence[int],
    penalty: float,
) -> dict[int, EdgeInstance]:
    u, w = e
    out = {}
    for i in train:
        if (u, i) not in dists:
            continue
        inst = insts[i]
        out[i] = EdgeInstance(
            index=i,
            env=task.env_at(i),
            init=dists[(u, i)],
            reward=RewardSpec(
                goal=inst.regions[w],
                safety=inst.edge_safety[inst.structure.edge_index(e)],
                safety_penalty=penalty,
            ),
        )
    return out


def _check_train(task: InductiveTask, train: Sequence[int]) -> list[int]:
    train = sorted({task.check_index(i) for i in train})
    if 0 not in train:
        raise InvalidInputError("Training instances must include instance 0.")
    return train


def _train_graph(
    task: InductiveTask,
    train: Sequence[int],
    cfg: ExperimentConfig,
    shape: PolicyShape,
    learn_edge: EdgeLearner,
    ars: ArsConfig,
) -> TrainingResult:
    timer = _Timer()
    graph = compile_spec(task.base.spec)
    insts = {i: instantiate_graph(graph, task, i) for i in train}
    edge_probs: dict[tuple[Edge, int], float] = {}
    prob: dict[tuple[int, int], float] = {}
    best_in: dict[tuple[int, int], frozenset[int]] = {}
    dists: dict[tuple[int, int], InitDistribution] = {}
    policies: dict[Edge, EdgePolicy] = {}
    reports: dict[Edge, EdgeReport] = {}
    telemetry: dict[str, list[TelemetryRow]] = {}
    unreached: dict[int, list[int]] = defaultdict(list)

    for u in graph.topological_order():
        start = time.perf_counter()
        for i in train:
            prob[(u, i)], best_in[(u, i)] = _reach_at(graph, u, i, edge_probs, prob)
            if prob[(u, i)] == 0.0:
                unreached[u].append(i)
                continue
            params = {(w, u): policies[(w, u)].params_for(i) for w in best_in[(u, i)]}
            try:
                dists[(u, i)] = induce_distribution(
                    u,
                    insts[i],
                    best_in[(u, i)],
                    params,
                    {w: dists[(w, i)] for w in best_in[(u, i)]},
                    task.env_at(i),
                    shape,
                    cfg.n_particles,
                    ars.train_steps,
                    rng_for(ars.seed, STREAM_INDUCE, u, i),
                )
            except EmptyDistributionError:
                log.warning("Instance %s cannot be continued past vertex %s.", i, u)
                unreached[u].append(i)
        timer.add("induction", start)

        for e in graph.out_edges(u):
            edge_insts = _edge_instances(task, insts, dists, e, train, ars.safety_penalty)
            log.info(
                "Training edge %s on instances %s.", edge_label(e), sorted(edge_insts)
            )
            start = time.perf_counter()
            outcome = learn_edge(e, edge_insts)
            timer.add("training", start)
            policies[e] = outcome.policy
            start = time.perf_counter()
            for i, inst in edge_insts.items():
                p, _ = edge_success(
                    outcome.policy.params_for(i),
                    shape,
                    inst,
                    rng_for(ars.seed, STREAM_ESTIMATE, *e, i),
                    ars.eval_rollouts_train,
                    ars.train_steps,
                )
                edge_probs[(e, i)] = p
            timer.add("estimation", start)
            reports[e] = outcome.report.model_copy(
                update={"success": {i: edge_probs[(e, i)] for i in sorted(edge_insts)}}
            )
            for phase, rows in outcome.telemetry.items():
                telemetry[f"{e[0]}_{e[1]}_{phase}"] = rows

    tables = ReachTables(prob=prob, best_in=best_in)
    start = time.perf_counter()
    decision_sets = build_decision_sets(graph, tables, train)
    mode = FeatureMode(cfg.feature_mode)
    features = {i: instance_features(task, i, mode) for i in train}
    guards = {}
    for u in graph.branching_vertices():
        try:
            guards.update(learn_guards(graph, decision_sets, features, vertices=[u]))
        except UnguardableVertexError:
            fallback = graph.out_edges(u)[0]
            log.warning(
                "Vertex %s has no routed instance; guard always takes %s.",
                u,
                edge_label(fallback),
            )
            guards[u] = TreeLeaf(label=fallback)
    timer.add("guards", start)

    generator = PolicyGenerator(
        graph=graph, edges=policies, guards=guards, shape=shape, feature_mode=mode
    )
    return TrainingResult(
        generator=generator,
        graph=graph,
        tables=tables,
        decision_sets=decision_sets,
        edge_reports=reports,
        telemetry=telemetry,
        timings=dict(timer.totals),
        unreached=dict(unreached),
    )


def _ars_for(cfg: ExperimentConfig, seed: int) -> ArsConfig:
    return replace(cfg.ars, seed=seed)


def _untrained(shape: PolicyShape, ars: ArsConfig, e: Edge) -> PolicyParams:
    return initial_params(shape, rng_for(ars.seed, *e, STREAM_INIT))


def run_genrl(
    task: InductiveTask,
    degree: int,
    train: Sequence[int],
    cfg: ExperimentConfig,
    seed: int = 0,
) -> TrainingResult:
    """
    Learn a policy generator for `task` from the instances in `train`.

    Each edge gets a base policy learned on instance 0 and a kappa-polynomial of
    `degree` learned over every training instance that reaches the edge's source.
    When instance 0 does not reach the source, the base policy is learned on the lowest
    instance that does, and kappa is fit at the true indices of the instances that do.
    """
    train = _check_train(task, train)
    ars = _ars_for(cfg, seed)
    template = KappaTemplate(cfg.template)
    shape = PolicyShape.for_env(task.base.env, hidden_dims=cfg.hidden_dims)

    def learn_edge(e: Edge, instances: dict[int, EdgeInstance]) -> _EdgeOutcome:
        if not instances:
            log.warning("No training instance reaches edge %s.", edge_label(e))
            return _EdgeOutcome(
                policy=EdgePolicy(base=_untrained(shape, ars, e)),
                report=EdgeReport(edge=edge_label(e), flagged=True),
                telemetry={},
            )
        base = learn_base_policy(instances[min(instances)], shape, ars, key=e)
        kappa = learn_kappa(base.params, instances, degree, template, shape, ars, key=e)
        return _EdgeOutcome(
            policy=EdgePolicy(base=base.params, kappa=kappa.kappa),
            report=EdgeReport(
                edge=edge_label(e),
                base_score=base.score,
                base_success=base.success,
                flagged=base.flagged,
                kappa_score=kappa.score,
                train=kappa.train,
                dropped=kappa.dropped,
            ),
            telemetry={"base": base.result.telemetry, "kappa": kappa.result.telemetry},
        )

    return _train_graph(task, train, cfg, shape, learn_edge, ars)


def train_baseline(
    mode: str,
    task: InductiveTask,
    train: Sequence[int],
    cfg: ExperimentConfig,
    seed: int = 0,
) -> TrainingResult:
    """
    The same pipeline with one shared parameter vector per edge and no kappa.

    `base3` policies read the task index as an extra input.
    """
    if mode not in ("base1", "base2", "base3"):
        raise InvalidInputError(f"Unknown baseline mode '{mode}'.")
    train = _check_train(task, train)
    ars = _ars_for(cfg, seed)
    shape = PolicyShape.for_env(
        task.base.env, hidden_dims=cfg.hidden_dims, include_task_index=mode == "base3"
    )

    def learn_edge(e: Edge, instances: dict[int, EdgeInstance]) -> _EdgeOutcome:
        if not instances:
            log.warning("No training instance reaches edge %s.", edge_label(e))
            return _EdgeOutcome(
                policy=EdgePolicy(base=_untrained(shape, ars, e)),
                report=EdgeReport(edge=edge_label(e), flagged=True),
                telemetry={},
            )
        params, result = learn_shared_policy(mode, instances, shape, ars, key=e)
        return _EdgeOutcome(
            policy=EdgePolicy(base=params),
            report=EdgeReport(
                edge=edge_label(e), base_score=result.best_score, train=sorted(instances)
            ),
            telemetry={mode: result.telemetry},
        )

    return _train_graph(task, train, cfg, shape, learn_edge, ars)


def guard_expressions(gen: PolicyGenerator) -> dict[int, str]:
    names = ("i",) if gen.feature_mode == FeatureMode.INDEX else ()
    return {
        u: to_expression(tree, feature_names=names, integer_features=bool(names))
        for u, tree in sorted(gen.guards.items())
    }
