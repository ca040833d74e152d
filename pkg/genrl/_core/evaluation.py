"""Success estimation for task instances and the sweep over unseen instances."""

import logging
from dataclasses import dataclass, field
from typing import Protocol

import numpy as np

from genrl._core.abstract_graph import instantiate_graph
from genrl._core.envs import sample_states
from genrl._core.policy import PolicyGenerator, generate_policy, run_path_batch
from genrl._core.spec_lang import Trajectory, eval_spec
from genrl._core.tasks import InductiveTask, instantiate_task
from genrl._utils import validators as gv
from genrl._utils.config import ExperimentConfig
from genrl._utils.utils import rng_for
from genrl.errors import InvalidInputError, NumericOverflowError

log = logging.getLogger(__name__)

STREAM_TEST = 11


class RolloutSource(Protocol):
    def rollouts(
        self, task: InductiveTask, i: int, n: int, rng: np.random.Generator
    ) -> list[Trajectory]: ...


@dataclass(frozen=True)
class GeneratorSource:
    """
    Rollouts of the path policy a generator produces for each instance.

    :param steps_per_edge: Step budget per edge; a path gets this times its length.
    """

    generator: PolicyGenerator
    steps_per_edge: int = 60

    def rollouts(
        self, task: InductiveTask, i: int, n: int, rng: np.random.Generator
    ) -> list[Trajectory]:
        rl = instantiate_task(task, i)
        pp = generate_policy(self.generator, task, i)
        inst = instantiate_graph(self.generator.graph, task, i)
        starts = sample_states(rl.env, rl.init, rng, n)
        budget = self.steps_per_edge * max(len(pp.path), 1)
        return run_path_batch(pp, rl.env, inst, starts, budget).trajectories()


@dataclass(frozen=True, eq=False)
class SuccessEstimate:
    index: int
    probability: float
    passed: bool
    samples: tuple[Trajectory, ...] = ()


def estimate_success(
    source: RolloutSource,
    task: InductiveTask,
    i: int,
    n_rollouts: int,
    threshold: float,
    seed: int = 0,
    keep: int = 0,
) -> SuccessEstimate:
    """
    Fraction of `n_rollouts` seeded rollouts satisfying instance `i`'s specification;
    the instance passes when the fraction is strictly above `threshold`.

    A generator whose kappa overflows at `i` scores 0.

    :param keep: Number of rollouts to return with the estimate.
    """
    n_rollouts = gv.validate_int(n_rollouts, key="n_rollouts", minimum=1)
    i = task.check_index(i)
    spec = instantiate_task(task, i).spec
    try:
        trajectories = source.rollouts(task, i, n_rollouts, rng_for(seed, STREAM_TEST, i))
    except NumericOverflowError:
        log.warning("Policy for instance %s overflowed; counted as failed.", i)
        return SuccessEstimate(index=i, probability=0.0, passed=False)
    hits = np.array([eval_spec(spec, t) for t in trajectories], dtype=bool)
    probability = float(hits.mean())
    return SuccessEstimate(
        index=i,
        probability=probability,
        passed=probability > threshold,
        samples=tuple(trajectories[:keep]),
    )


@dataclass(frozen=True, eq=False)
class UnseenSweep:
    """
    :param count: Passing instances over the whole sweep.
    :param capped_count: Passing instances among the first `unseen_cap` probed.
    """

    count: int
    capped_count: int
    stop_reason: str
    estimates: list[SuccessEstimate] = field(default_factory=list)


def evaluate_unseen(
    source: RolloutSource,
    task: InductiveTask,
    first_unseen_index: int,
    cfg: ExperimentConfig,
    seed: int = 0,
) -> UnseenSweep:
    """
    Probe instances from `first_unseen_index` upwards, stopping after
    `cfg.unseen_failure_limit` consecutive failures, at the task's horizon, or after
    `cfg.max_unseen_probes` probes.
    """
    first = gv.validate_int(first_unseen_index, key="first_unseen_index", minimum=0)
    if cfg.train and first <= max(cfg.train):
        raise InvalidInputError(
            f"first_unseen_index: must be > {max(cfg.train)}, got {first}."
        )
    estimates, failures, i = [], 0, first
    reason = "probe limit"
    while len(estimates) < cfg.max_unseen_probes:
        if not task.in_range(i):
            reason = "horizon"
            break
        est = estimate_success(
            source,
            task,
            i,
            cfg.test_rollouts,
            cfg.success_threshold,
            seed=seed,
            keep=cfg.trajectories_per_instance,
        )
        estimates.append(est)
        log.info("Unseen instance %s: success %.3f.", i, est.probability)
        failures = 0 if est.passed else failures + 1
        if failures >= cfg.unseen_failure_limit:
            reason = "consecutive failures"
            break
        i += 1
    count = sum(e.passed for e in estimates)
    cap = cfg.unseen_cap
    capped = count if cap is None else sum(e.passed for e in estimates[:cap])
    return UnseenSweep(count=count, capped_count=capped, stop_reason=reason, estimates=estimates)
