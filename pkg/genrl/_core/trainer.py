"""
Augmented Random Search for edge policies and kappa-polynomials.

Every random draw comes from a stream keyed by `(seed, *key, iteration, direction)`,
so parallel and serial direction evaluation produce the same trace.
"""

import logging
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field

import numpy as np

from genrl._core.envs import Environment, InitDistribution, sample_states
from genrl._core.policy import (
    EdgeRollout,
    KappaPolynomial,
    KappaTemplate,
    PolicyParams,
    PolicyShape,
    execute_edge_policy,
    init_kappa,
    initial_params,
    unroll_kappa,
)
from genrl._core.spec_lang import AtomicPredicate, Trajectory, goal_distance, predicate_mask
from genrl._utils import validators as gv
from genrl._utils.config import ArsConfig
from genrl._utils.utils import parallel_map, rng_for
from genrl.errors import InvalidInputError

log = logging.getLogger(__name__)

SIGMA_FLOOR = 1e-8

# Random stream tags.
STREAM_INIT = 1
STREAM_BASE = 2
STREAM_KAPPA = 3
STREAM_PROBE = 4
STREAM_ESTIMATE = 5
STREAM_BASELINE = 6


@dataclass(frozen=True)
class RewardSpec:
    goal: AtomicPredicate
    safety: tuple[AtomicPredicate, ...] = ()
    safety_penalty: float = 10.0


def edge_reward(trajectory: Trajectory, spec: RewardSpec) -> float:
    """
    Minus the final distance to the goal, minus the penalty for each visited state
    outside the safety set.
    """
    states = trajectory.states
    ok = np.ones(states.shape[0], dtype=bool)
    for p in spec.safety:
        ok &= predicate_mask(p, states)
    dist = float(goal_distance(spec.goal, states[-1]))
    return -dist - spec.safety_penalty * float(np.sum(~ok))


def rollout_rewards(rollout: EdgeRollout, spec: RewardSpec) -> np.ndarray:
    dist = goal_distance(spec.goal, rollout.final_states)
    return -dist - spec.safety_penalty * rollout.violations


def softmin_score(rewards, tau: float) -> float:
    """Rewards averaged with weights `softmax(-r / tau)`, leaning to the worst."""
    r = gv.validate_vector(rewards, key="rewards")
    if len(r) == 0:
        raise InvalidInputError("rewards: must not be empty.")
    if tau <= 0:
        raise InvalidInputError(f"tau: must be > 0, got {tau}.")
    z = -r / tau
    w = np.exp(z - z.max())
    w /= w.sum()
    return float(np.dot(w, r))


def perturb(v, delta, scale: float) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    delta = gv.validate_vector(delta, key="delta", dim=v.shape[0])
    return v + scale * delta


@dataclass(frozen=True)
class DirectionSample:
    delta: np.ndarray
    r_plus: float
    r_minus: float


def delta_update(samples: Sequence[DirectionSample], top_b: int, alpha: float):
    """
    `alpha / (top_b * sigma) * sum((r_plus - r_minus) * delta)` over the `top_b`
    directions with the highest `max(r_plus, r_minus)`; `sigma` is the standard
    deviation of the selected scores.
    """
    if not samples:
        raise InvalidInputError("delta_update needs at least one sample.")
    if not 1 <= top_b <= len(samples):
        raise InvalidInputError(f"top_b: must be in [1, {len(samples)}], got {top_b}.")
    best = np.array([max(s.r_plus, s.r_minus) for s in samples])
    chosen = [samples[k] for k in np.argsort(-best, kind="stable")[:top_b]]
    scores = np.array([[s.r_plus, s.r_minus] for s in chosen])
    sigma = max(float(scores.std()), SIGMA_FLOOR)
    step = np.zeros_like(np.asarray(chosen[0].delta, dtype=np.float64))
    for s in chosen:
        step += (s.r_plus - s.r_minus) * np.asarray(s.delta)
    return alpha / (top_b * sigma) * step


@dataclass(frozen=True)
class TelemetryRow:
    iteration: int
    best_score: float
    mean_score: float
    alpha: float


@dataclass(frozen=True, eq=False)
class ArsResult:
    theta: np.ndarray
    best_score: float
    iterations: int
    converged: bool
    telemetry: list[TelemetryRow] = field(default_factory=list)


# objective(theta, iteration, stream) -> score; stream keys the random start states.
Objective = Callable[[np.ndarray, int, tuple[int, ...]], float]


def ars_optimize(
    theta0: np.ndarray,
    objective: Objective,
    cfg: ArsConfig,
    key: tuple[int, ...],
    evaluate: Objective | None = None,
    max_iters: int | None = None,
    label: str = "",
) -> ArsResult:
    """
    Maximise `objective` from `theta0`.

    Each iteration samples `n_directions` Gaussian directions, scores both signs on the
    same start states, and moves along the `delta_update` of the best `top_b`. The step
    size halves (down to `alpha_min`) after `decay_patience` iterations without a new
    best; the run stops early once the best score gains less than `convergence_tol`
    over `convergence_window` iterations.

    :param evaluate: Scores the iterate for best-so-far tracking; defaults to `objective`.
    """
    evaluate = evaluate or objective
    iters = cfg.max_iters if max_iters is None else max_iters
    n_dir = cfg.n_directions
    theta = np.array(theta0, dtype=np.float64)
    best_theta = theta.copy()
    best = evaluate(theta, 0, (0, n_dir))
    alpha, stale = cfg.alpha, 0
    history: list[float] = []
    telemetry: list[TelemetryRow] = []
    converged = False
    done = 0
    for it in range(iters):
        snapshot = theta.copy()

        def score_direction(k: int, it=it, snapshot=snapshot) -> DirectionSample:
            delta = rng_for(cfg.seed, *key, STREAM_INIT, it, k).standard_normal(snapshot.shape)
            stream = (it, k)
            r_plus = objective(perturb(snapshot, delta, cfg.delta_scale), it, stream)
            r_minus = objective(perturb(snapshot, delta, -cfg.delta_scale), it, stream)
            return DirectionSample(delta=delta, r_plus=r_plus, r_minus=r_minus)

        samples = parallel_map(score_direction, range(n_dir))
        theta = snapshot + delta_update(samples, cfg.top_b, alpha * cfg.delta_scale)
        score = evaluate(theta, it, (it, n_dir))
        mean_score = float(np.mean([[s.r_plus, s.r_minus] for s in samples]))
        if score > best:
            best, best_theta, stale = score, theta.copy(), 0
        else:
            stale += 1
            if stale >= cfg.decay_patience:
                alpha, stale = max(alpha / 2, cfg.alpha_min), 0
        history.append(best)
        telemetry.append(
            TelemetryRow(iteration=it, best_score=best, mean_score=mean_score, alpha=alpha)
        )
        log.debug("%s iter %s: best %.4f mean %.4f alpha %.3f", label, it, best, mean_score, alpha)
        done = it + 1
        window = cfg.convergence_window
        if len(history) > window and history[-1] - history[-1 - window] < cfg.convergence_tol:
            converged = True
            break
    return ArsResult(
        theta=best_theta,
        best_score=float(best),
        iterations=done,
        converged=converged,
        telemetry=telemetry,
    )


@dataclass(frozen=True)
class EdgeInstance:
    """One task instance as seen by one edge: where it starts and what it must reach."""

    index: int
    env: Environment
    init: InitDistribution
    reward: RewardSpec


def _rollout(
    params: PolicyParams,
    shape: PolicyShape,
    inst: EdgeInstance,
    rng: np.random.Generator,
    n: int,
    steps: int,
) -> EdgeRollout:
    starts = sample_states(inst.env, inst.init, rng, n)
    index = inst.index if shape.include_task_index else None
    return execute_edge_policy(
        params, shape, inst.env, starts, inst.reward.goal, inst.reward.safety, steps, index
    )


def mean_reward(
    params: PolicyParams,
    shape: PolicyShape,
    inst: EdgeInstance,
    rng: np.random.Generator,
    cfg: ArsConfig,
) -> float:
    rollout = _rollout(params, shape, inst, rng, cfg.reward_rollouts, cfg.train_steps)
    return float(np.mean(rollout_rewards(rollout, inst.reward)))


def edge_success(
    params: PolicyParams,
    shape: PolicyShape,
    inst: EdgeInstance,
    rng: np.random.Generator,
    n_rollouts: int,
    steps: int,
) -> tuple[float, EdgeRollout]:
    """Fraction of rollouts entering the goal region without a safety violation."""
    rollout = _rollout(params, shape, inst, rng, n_rollouts, steps)
    return float(np.mean(rollout.entered & rollout.safe)), rollout


@dataclass(frozen=True, eq=False)
class BasePolicyResult:
    params: PolicyParams
    score: float
    success: float
    flagged: bool
    result: ArsResult


def learn_base_policy(
    inst: EdgeInstance,
    shape: PolicyShape,
    cfg: ArsConfig,
    key: tuple[int, ...],
    start: PolicyParams | None = None,
    max_iters: int | None = None,
) -> BasePolicyResult:
    """
    Plain ARS on one edge and one instance, scored by the mean edge reward.

    Runs that end below `cfg.flag_threshold` success are returned flagged.
    """
    if start is None:
        start = initial_params(shape, rng_for(cfg.seed, *key, STREAM_INIT))

    def objective(theta: np.ndarray, it: int, stream: tuple[int, ...]) -> float:
        rng = rng_for(cfg.seed, *key, STREAM_BASE, *stream)
        return mean_reward(PolicyParams(flat=theta), shape, inst, rng, cfg)

    result = ars_optimize(start.flat, objective, cfg, key, max_iters=max_iters, label=f"base{key}")
    params = PolicyParams(flat=result.theta)
    success, _ = edge_success(
        params,
        shape,
        inst,
        rng_for(cfg.seed, *key, STREAM_ESTIMATE),
        cfg.eval_rollouts_train,
        cfg.train_steps,
    )
    flagged = success < cfg.flag_threshold
    if flagged:
        log.warning(
            "Edge policy %s reached success %.2f, below %.2f.", key, success, cfg.flag_threshold
        )
    return BasePolicyResult(
        params=params, score=result.best_score, success=success, flagged=flagged, result=result
    )


@dataclass(frozen=True, eq=False)
class KappaResult:
    kappa: KappaPolynomial
    train: list[int]
    dropped: list[int]
    score: float
    result: ArsResult


def filter_train(
    base: PolicyParams,
    kappa: KappaPolynomial,
    instances: dict[int, EdgeInstance],
    shape: PolicyShape,
    cfg: ArsConfig,
    key: tuple[int, ...],
) -> tuple[list[int], list[int]]:
    """
    Drop instances an ARS probe cannot bring above `cfg.probe_success`.

    The lowest instance always stays. An instance whose initial unrolled policy already
    clears the bar skips the probe.
    """
    keep, dropped = [], []
    anchor = min(instances)
    for i in sorted(instances):
        if i == anchor:
            keep.append(i)
            continue
        inst = instances[i]
        params = unroll_kappa(kappa, base, i)
        rng = rng_for(cfg.seed, *key, STREAM_PROBE, i)
        success, _ = edge_success(params, shape, inst, rng, cfg.eval_rollouts_train, cfg.train_steps)
        if success <= cfg.probe_success:
            probe = learn_base_policy(
                inst, shape, cfg, (*key, STREAM_PROBE, i), start=params,
                max_iters=cfg.max_iters // 4,
            )
            success = probe.success
        if success > cfg.probe_success:
            keep.append(i)
        else:
            dropped.append(i)
            log.info("Dropping instance %s from edge %s: probe success %.2f.", i, key, success)
    return keep, dropped


def learn_kappa(
    base: PolicyParams,
    instances: dict[int, EdgeInstance],
    degree: int,
    template: KappaTemplate,
    shape: PolicyShape,
    cfg: ArsConfig,
    key: tuple[int, ...],
) -> KappaResult:
    """
    ARS over kappa coefficients, scoring each direction by the softmin over the
    training instances of the mean edge reward of the unrolled policy.

    :param instances: Training instances of this edge, keyed by their true index. The
      base policy is the one learned on the lowest of them.
    """
    if not instances:
        raise InvalidInputError("Kappa training needs at least one instance.")
    kappa0 = init_kappa(
        len(base), degree, template, rng_for(cfg.seed, *key, STREAM_KAPPA), cfg.kappa_init_scale
    )
    if cfg.filter_infeasible and len(instances) > 1:
        train, dropped = filter_train(base, kappa0, instances, shape, cfg, key)
    else:
        train, dropped = sorted(instances), []

    def objective(flat: np.ndarray, it: int, stream: tuple[int, ...]) -> float:
        kappa = kappa0.with_flat(flat)
        rewards = []
        for i in train:
            params = unroll_kappa(kappa, base, i)
            rng = rng_for(cfg.seed, *key, STREAM_KAPPA, *stream, i)
            rewards.append(mean_reward(params, shape, instances[i], rng, cfg))
        return softmin_score(rewards, cfg.softmin_tau)

    result = ars_optimize(kappa0.flat, objective, cfg, (*key, STREAM_KAPPA), label=f"kappa{key}")
    return KappaResult(
        kappa=kappa0.with_flat(result.theta),
        train=train,
        dropped=dropped,
        score=result.best_score,
        result=result,
    )


def learn_shared_policy(
    mode: str,
    instances: dict[int, EdgeInstance],
    shape: PolicyShape,
    cfg: ArsConfig,
    key: tuple[int, ...],
) -> tuple[PolicyParams, ArsResult]:
    """
    One parameter vector for every instance of an edge.

    - `base1`: each iteration trains on the next instance in turn.
    - `base2`: each direction is scored by the softmin over all instances.
    - `base3`: as `base2`; the shape is expected to read the task index.
    """
    order = sorted(instances)
    start = initial_params(shape, rng_for(cfg.seed, *key, STREAM_INIT))

    def instance_reward(theta: np.ndarray, i: int, stream: tuple[int, ...]) -> float:
        rng = rng_for(cfg.seed, *key, STREAM_BASELINE, *stream, i)
        return mean_reward(PolicyParams(flat=theta), shape, instances[i], rng, cfg)

    def softmin_all(theta: np.ndarray, it: int, stream: tuple[int, ...]) -> float:
        rewards = [instance_reward(theta, i, stream) for i in order]
        return softmin_score(rewards, cfg.softmin_tau)

    def round_robin(theta: np.ndarray, it: int, stream: tuple[int, ...]) -> float:
        return instance_reward(theta, order[it % len(order)], stream)

    match mode:
        case "base1":
            result = ars_optimize(
                start.flat, round_robin, cfg, key, evaluate=softmin_all, label=f"base1{key}"
            )
        case "base2" | "base3":
            if (mode == "base3") != shape.include_task_index:
                raise InvalidInputError("Only base3 policies read the task index.")
            result = ars_optimize(start.flat, softmin_all, cfg, key, label=f"{mode}{key}")
        case _:
            raise InvalidInputError(f"Unknown baseline mode '{mode}'.")
    return PolicyParams(flat=result.theta), result
