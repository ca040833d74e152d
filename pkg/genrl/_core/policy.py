"""
Feed-forward policies over flat parameter vectors, kappa-polynomials and policy
generators.

Flat parameter layout, layer by layer from the input: the weight matrix of shape
`(out, in)` in row-major order, then the bias of length `out`.
"""

import logging
from dataclasses import dataclass
from enum import Enum

import numpy as np

from genrl._core import bases
from genrl._core.abstract_graph import AbstractGraph, Edge, GraphInstance
from genrl._core.decision_tree import DecisionTree, predict
from genrl._core.envs import Environment, observe, sample_states, step_batch
from genrl._core.spec_lang import AtomicPredicate, Trajectory, predicate_mask
from genrl._core.tasks import InductiveTask, RLTask
from genrl._utils import validators as gv
from genrl.errors import ConsistencyError, InvalidInputError, NumericOverflowError

log = logging.getLogger(__name__)


class KappaTemplate(str, Enum):
    POLYNOMIAL = "polynomial"
    CONSTANT = "constant"


class FeatureMode(str, Enum):
    INDEX = "index"
    ENV = "env"


class PolicyShape(bases.Model):
    """
    Two ReLU hidden layers and a tanh output scaled to `[action_low, action_high]`.

    With `include_task_index`, the task index is appended to the observation.
    """

    input_dim: int
    output_dim: int
    hidden_dims: tuple[int, int] = (32, 32)
    include_task_index: bool = False
    action_low: tuple[float, ...] = ()
    action_high: tuple[float, ...] = ()

    def model_post_init(self, __context) -> None:
        if min(self.input_dim, self.output_dim, *self.hidden_dims) < 1:
            raise InvalidInputError("Policy layer widths must be >= 1.")
        if not self.action_low:
            object.__setattr__(self, "action_low", (-1.0,) * self.output_dim)
            object.__setattr__(self, "action_high", (1.0,) * self.output_dim)
        if len(self.action_low) != self.output_dim or len(self.action_high) != self.output_dim:
            raise InvalidInputError("Action bounds must match the output dimension.")

    @classmethod
    def for_env(
        cls, env: Environment, hidden_dims=(32, 32), include_task_index: bool = False
    ) -> "PolicyShape":
        lo, hi = env.action_bounds
        return cls(
            input_dim=env.obs_dim,
            output_dim=env.action_dim,
            hidden_dims=tuple(hidden_dims),
            include_task_index=include_task_index,
            action_low=tuple(map(float, lo)),
            action_high=tuple(map(float, hi)),
        )

    @property
    def layer_sizes(self) -> list[tuple[int, int]]:
        """`(in, out)` per layer."""
        first = self.input_dim + (1 if self.include_task_index else 0)
        dims = [first, *self.hidden_dims, self.output_dim]
        return list(zip(dims[:-1], dims[1:], strict=True))

    @property
    def n_params(self) -> int:
        return sum((n_in + 1) * n_out for n_in, n_out in self.layer_sizes)


def _frozen(arr, key: str) -> np.ndarray:
    out = np.array(arr, dtype=np.float64)
    if not np.all(np.isfinite(out)):
        raise InvalidInputError(f"{key}: contains non-finite values.")
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class PolicyParams:
    flat: np.ndarray

    def __post_init__(self):
        flat = _frozen(self.flat, "policy params")
        if flat.ndim != 1:
            raise InvalidInputError("Policy params must be a flat vector.")
        object.__setattr__(self, "flat", flat)

    def __len__(self) -> int:
        return self.flat.shape[0]

    def __eq__(self, other) -> bool:
        return isinstance(other, PolicyParams) and np.array_equal(self.flat, other.flat)

    def __hash__(self) -> int:
        return hash(self.flat.tobytes())


@dataclass(frozen=True, eq=False)
class KappaPolynomial:
    """
    Coefficients `kappa_0 ... kappa_m` as rows of `coefficients`.

    Polynomial template: `theta' = kappa_m * theta**m + ... + kappa_1 * theta + kappa_0`
    elementwise. Constant template: `theta' = theta + kappa_0`.
    """

    coefficients: np.ndarray
    template: KappaTemplate = KappaTemplate.POLYNOMIAL

    def __post_init__(self):
        c = _frozen(self.coefficients, "kappa coefficients")
        if c.ndim != 2 or c.shape[0] < 1:
            raise InvalidInputError("Kappa coefficients must have shape (m + 1, P).")
        if self.template == KappaTemplate.CONSTANT and c.shape[0] != 1:
            raise InvalidInputError("The constant template has a single coefficient.")
        object.__setattr__(self, "coefficients", c)
        object.__setattr__(self, "template", KappaTemplate(self.template))

    @property
    def degree(self) -> int:
        return self.coefficients.shape[0] - 1

    @property
    def n_params(self) -> int:
        return self.coefficients.shape[1]

    @property
    def flat(self) -> np.ndarray:
        return self.coefficients.reshape(-1)

    def with_flat(self, flat: np.ndarray) -> "KappaPolynomial":
        return KappaPolynomial(
            coefficients=np.asarray(flat).reshape(self.coefficients.shape),
            template=self.template,
        )

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, KappaPolynomial)
            and self.template == other.template
            and np.array_equal(self.coefficients, other.coefficients)
        )

    def __hash__(self) -> int:
        return hash((self.template, self.coefficients.tobytes()))


def unflatten(shape: PolicyShape, params: PolicyParams) -> list[tuple[np.ndarray, np.ndarray]]:
    if len(params) != shape.n_params:
        raise InvalidInputError(
            f"Expected {shape.n_params} policy params, got {len(params)}."
        )
    layers, pos = [], 0
    for n_in, n_out in shape.layer_sizes:
        w = params.flat[pos : pos + n_in * n_out].reshape(n_out, n_in)
        pos += n_in * n_out
        b = params.flat[pos : pos + n_out]
        pos += n_out
        layers.append((w, b))
    return layers


def flatten(layers: list[tuple[np.ndarray, np.ndarray]]) -> PolicyParams:
    parts = []
    for w, b in layers:
        parts.extend([np.asarray(w, dtype=np.float64).reshape(-1), np.asarray(b, dtype=np.float64)])
    return PolicyParams(flat=np.concatenate(parts))


def policy_act(params: PolicyParams, shape: PolicyShape, obs, i: int | None = None):
    """
    Forward pass for one observation `(input_dim,)` or a batch `(N, input_dim)`.

    :param i: Task index, required exactly when the shape includes it.
    """
    x = np.asarray(obs, dtype=np.float64)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    if x.shape[1] != shape.input_dim:
        raise InvalidInputError(
            f"Expected observations of dimension {shape.input_dim}, got {x.shape[1]}."
        )
    if shape.include_task_index != (i is not None):
        raise InvalidInputError("The task index must be given iff the policy reads it.")
    if i is not None:
        x = np.concatenate([x, np.full((x.shape[0], 1), float(i))], axis=1)
    layers = unflatten(shape, params)
    h = x
    for w, b in layers[:-1]:
        h = np.maximum(h @ w.T + b, 0.0)
    w, b = layers[-1]
    out = np.tanh(h @ w.T + b)
    lo, hi = np.asarray(shape.action_low), np.asarray(shape.action_high)
    action = (lo + hi) / 2 + out * (hi - lo) / 2
    return action[0] if single else action


def initial_params(shape: PolicyShape, rng: np.random.Generator) -> PolicyParams:
    """Weights drawn with standard deviation `1 / sqrt(fan_in)`, zero biases."""
    layers = []
    for n_in, n_out in shape.layer_sizes:
        w = rng.standard_normal((n_out, n_in)) / np.sqrt(n_in)
        layers.append((w, np.zeros(n_out)))
    return flatten(layers)


def init_kappa(
    n_params: int,
    degree: int,
    template: KappaTemplate,
    rng: np.random.Generator,
    scale: float = 0.01,
) -> KappaPolynomial:
    """
    Normal noise of standard deviation `scale`, plus one on `kappa_1` so that the
    polynomial template starts near the identity map.
    """
    template = KappaTemplate(template)
    rows = 1 if template == KappaTemplate.CONSTANT else degree + 1
    coeffs = rng.standard_normal((rows, n_params)) * scale
    if template == KappaTemplate.POLYNOMIAL and degree >= 1:
        coeffs[1] += 1.0
    return KappaPolynomial(coefficients=coeffs, template=template)


def identity_kappa(n_params: int, degree: int = 1) -> KappaPolynomial:
    coeffs = np.zeros((max(degree, 1) + 1, n_params))
    coeffs[1] = 1.0
    return KappaPolynomial(coefficients=coeffs)


def unroll_kappa(kappa: KappaPolynomial, base: PolicyParams, i: int) -> PolicyParams:
    """
    Apply the kappa map `i` times to `base`.

    :raises NumericOverflowError: When an application yields a non-finite parameter; the
        error names the instance index reached.
    """
    i = gv.validate_int(i, key="instance index", minimum=0)
    if kappa.n_params != len(base):
        raise InvalidInputError(
            f"Kappa has {kappa.n_params} coefficients per row, params have {len(base)}."
        )
    theta = base.flat.copy()
    coeffs = kappa.coefficients
    with np.errstate(over="ignore", invalid="ignore"):
        for step in range(1, i + 1):
            if kappa.template == KappaTemplate.CONSTANT:
                theta = theta + coeffs[0]
            else:
                acc = coeffs[-1].copy()
                for row in coeffs[-2::-1]:
                    acc = acc * theta + row
                theta = acc
            if not np.all(np.isfinite(theta)):
                err = NumericOverflowError(
                    f"Unrolling kappa overflowed at instance {step}.", instance_index=step
                )
                log.error(err, exc_info=True)
                raise err
    return PolicyParams(flat=theta)


@dataclass(frozen=True)
class EdgePolicy:
    """Base parameters and, for generators, the kappa relating adjacent instances."""

    base: PolicyParams
    kappa: KappaPolynomial | None = None

    def params_for(self, i: int) -> PolicyParams:
        if self.kappa is None:
            return self.base
        return unroll_kappa(self.kappa, self.base, i)


@dataclass(frozen=True)
class PolicyGenerator:
    graph: AbstractGraph
    edges: dict[Edge, EdgePolicy]
    guards: dict[int, DecisionTree]
    shape: PolicyShape
    feature_mode: FeatureMode = FeatureMode.INDEX

    def __post_init__(self):
        missing = [e for e in self.graph.edges if e not in self.edges]
        if missing:
            raise InvalidInputError(f"Edges without a policy: {missing}.")
        unguarded = [u for u in self.graph.branching_vertices() if u not in self.guards]
        if unguarded:
            raise InvalidInputError(f"Branching vertices without a guard: {unguarded}.")


@dataclass(frozen=True)
class PathPolicy:
    path: tuple[Edge, ...]
    params: tuple[PolicyParams, ...]
    shape: PolicyShape
    index: int

    def vertices(self) -> list[int]:
        if not self.path:
            return []
        return [self.path[0][0], *(e[1] for e in self.path)]


def instance_features(task: InductiveTask, i: int, mode: FeatureMode) -> np.ndarray:
    """
    Guard inputs for instance `i`: the index itself, or the mean of the instance's
    initial distribution followed by its environment parameters.
    """
    if FeatureMode(mode) == FeatureMode.INDEX:
        return np.array([float(i)])
    return np.concatenate([task.init_at(i).mean(), np.asarray(task.env_at(i).env_params)])


def choose_path(
    graph: AbstractGraph, guards: dict[int, DecisionTree], features: np.ndarray
) -> list[Edge]:
    path, u = [], graph.initial
    while not graph.is_final(u):
        out = graph.out_edges(u)
        if len(out) == 1:
            e = out[0]
        else:
            guard = guards.get(u)
            if guard is None:
                err = ConsistencyError(f"Vertex {u} branches but has no guard.")
                log.error(err, exc_info=True)
                raise err
            e = tuple(predict(guard, features))
            if e not in out:
                err = ConsistencyError(f"Guard at vertex {u} chose {e}, not an out-edge.")
                log.error(err, exc_info=True)
                raise err
        path.append(e)
        u = e[1]
    return path


def generate_policy(gen: PolicyGenerator, task: InductiveTask, i: int) -> PathPolicy:
    """The path chosen by the guards for instance `i`, with each edge's params unrolled."""
    i = gv.validate_int(i, key="instance index", minimum=0)
    path = choose_path(gen.graph, gen.guards, instance_features(task, i, gen.feature_mode))
    return PathPolicy(
        path=tuple(path),
        params=tuple(gen.edges[e].params_for(i) for e in path),
        shape=gen.shape,
        index=i,
    )


@dataclass(frozen=True, eq=False)
class EdgeRollout:
    """
    Batched single-edge rollouts.

    :param final_states: State at termination, `(N, n)`.
    :param entered: Whether the target region was entered.
    :param violations: Number of visited states outside the safety set.
    :param steps: Steps taken before termination.
    """

    final_states: np.ndarray
    entered: np.ndarray
    violations: np.ndarray
    steps: np.ndarray

    @property
    def safe(self) -> np.ndarray:
        return self.violations == 0


def _safe(safety, states: np.ndarray) -> np.ndarray:
    ok = np.ones(states.shape[0], dtype=bool)
    for p in safety:
        ok &= predicate_mask(p, states)
    return ok


def execute_edge_policy(
    params: PolicyParams,
    shape: PolicyShape,
    env: Environment,
    starts: np.ndarray,
    target: AtomicPredicate,
    safety: tuple[AtomicPredicate, ...],
    max_steps: int,
    index: int | None = None,
) -> EdgeRollout:
    """
    Roll an edge policy from each start until it enters `target` or runs out of steps.

    Starting inside the target counts as entering it with zero steps. Safety violations
    are counted, including at the start, and do not stop the rollout.
    """
    s = np.array(starts, dtype=np.float64)
    n = s.shape[0]
    entered = predicate_mask(target, s)
    violations = (~_safe(safety, s)).astype(np.int64)
    steps = np.zeros(n, dtype=np.int64)
    active = ~entered
    for _ in range(max_steps):
        if not active.any():
            break
        idx = np.flatnonzero(active)
        a = policy_act(params, shape, observe(env, s[idx]), index)
        s[idx] = step_batch(env, s[idx], a)
        steps[idx] += 1
        violations[idx] += ~_safe(safety, s[idx])
        hit = predicate_mask(target, s[idx])
        entered[idx] |= hit
        active[idx[hit]] = False
    return EdgeRollout(final_states=s, entered=entered, violations=violations, steps=steps)


@dataclass(frozen=True, eq=False)
class PathRollout:
    """
    Batched path-policy rollouts padded to a common length.

    :param lengths: Number of actions taken by each rollout.
    :param completed: Whether each rollout entered the final vertex's region.
    """

    states: np.ndarray
    actions: np.ndarray
    positions: np.ndarray
    lengths: np.ndarray
    completed: np.ndarray

    def trajectory(self, k: int) -> Trajectory:
        n = int(self.lengths[k])
        return Trajectory(
            states=self.states[k, : n + 1],
            actions=self.actions[k, :n],
            edges=self.positions[k, :n].copy(),
        )

    def trajectories(self) -> list[Trajectory]:
        return [self.trajectory(k) for k in range(self.states.shape[0])]


def run_path_batch(
    pp: PathPolicy,
    env: Environment,
    inst: GraphInstance,
    starts: np.ndarray,
    max_steps: int,
) -> PathRollout:
    s = np.array(starts, dtype=np.float64)
    n, dim = s.shape
    m = env.action_dim
    length = len(pp.path)
    states = np.zeros((n, max_steps + 1, dim))
    actions = np.zeros((n, max_steps, m))
    positions = np.zeros((n, max_steps), dtype=np.int64)
    states[:, 0] = s
    pos = np.zeros(n, dtype=np.int64)
    lengths = np.zeros(n, dtype=np.int64)
    index = pp.index if pp.shape.include_task_index else None

    def region_hit(p: np.ndarray, current: np.ndarray) -> np.ndarray:
        hit = np.zeros(len(p), dtype=bool)
        for j in np.unique(p):
            sel = p == j
            target = pp.path[j][1]
            hit[sel] = inst.region_mask(target, current[sel])
        return hit

    if length > 0:
        # the first region may already hold at the start state
        hit0 = region_hit(pos, s)
        pos[hit0] += 1
    done = pos >= length
    for t in range(max_steps):
        active = np.flatnonzero(~done)
        if len(active) == 0:
            break
        a = np.zeros((len(active), m))
        for j in np.unique(pos[active]):
            sel = pos[active] == j
            rows = active[sel]
            a[sel] = policy_act(pp.params[j], pp.shape, observe(env, s[rows]), index)
        s[active] = step_batch(env, s[active], a)
        actions[active, t] = a
        positions[active, t] = pos[active]
        states[active, t + 1] = s[active]
        lengths[active] = t + 1
        hit = region_hit(pos[active], s[active])
        pos[active[hit]] += 1
        done = pos >= length
    return PathRollout(
        states=states, actions=actions, positions=positions, lengths=lengths, completed=done
    )


def execute_path_policy(
    pp: PathPolicy,
    task: RLTask,
    inst: GraphInstance,
    max_steps: int,
    start=None,
    rng: np.random.Generator | None = None,
) -> Trajectory:
    """
    Run the edge policies of `pp` in turn, switching when the next region is entered.

    :param start: Initial state; sampled from the task's initial distribution when absent.
    """
    max_steps = gv.validate_int(max_steps, key="max_steps", minimum=1)
    if start is None:
        rng = rng if rng is not None else np.random.default_rng(0)
        start = sample_states(task.env, task.init, rng, 1)[0]
    start = gv.validate_vector(start, key="start", dim=task.env.state_dim)
    return run_path_batch(pp, task.env, inst, start[None, :], max_steps).trajectory(0)
