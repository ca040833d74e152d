import logging
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field

import numpy as np

from genrl._core.envs import EnvId, Environment, InitDistribution, shift_init
from genrl._core.spec_lang import (
    AtomicPredicate,
    PredicateKind,
    Spec,
    Trajectory,
    eval_spec,
    iter_predicates,
    map_predicates,
    shift_predicate,
)
from genrl._utils import validators as gv
from genrl.errors import InstanceRangeError, InvalidInputError

log = logging.getLogger(__name__)


def hold_band(preds: Iterable[AtomicPredicate]) -> tuple[float, float] | None:
    """The `(goal, tolerance)` shared by every `holdpole` predicate, if any."""
    bands = {(p.params[0], p.params[1]) for p in preds if p.kind == PredicateKind.HOLD_POLE}
    if len(bands) > 1:
        err = InvalidInputError(
            f"holdpole predicates disagree on the pole band: {sorted(bands)}."
        )
        log.error(err, exc_info=True)
        raise err
    return next(iter(bands), None)


def _with_band(env: Environment, band: tuple[float, float] | None) -> Environment:
    if band is None or env.id != EnvId.CARTPOLE or band == env.hold_band:
        return env
    return env.with_hold_band(band)


@dataclass(frozen=True)
class RLTask:
    spec: Spec
    init: InitDistribution
    env: Environment

    def __post_init__(self):
        for p in iter_predicates(self.spec):
            if p.state_dim > self.env.state_dim:
                raise InvalidInputError(
                    f"Predicate {p.describe()} reads more than the "
                    f"{self.env.state_dim} state dimensions of {self.env.id.value}."
                )
        object.__setattr__(
            self, "env", _with_band(self.env, hold_band(iter_predicates(self.spec)))
        )


@dataclass(frozen=True)
class InductiveTask:
    """
    A family of tasks `R_0, R_1, ...` generated from a base task.

    Instance `i` translates every predicate labelled `name` by `i * update_pred[name]`,
    the initial distribution by `i * update_init`, and adds `i * update_env` to the
    environment parameters. Unlabelled predicates never move.

    :param horizon: Number of instances, when the family is finite.
    """

    base: RLTask
    update_pred: Mapping[str, tuple[float, ...]] = field(default_factory=dict)
    update_init: tuple[float, ...] | None = None
    update_env: tuple[float, ...] | None = None
    horizon: int | None = None
    name: str = ""

    def __post_init__(self):
        names = {p.name for p in iter_predicates(self.base.spec) if p.name}
        unknown = set(self.update_pred) - names
        if unknown:
            raise InvalidInputError(
                f"update_pred refers to unknown predicates: {sorted(unknown)}."
            )
        for p in iter_predicates(self.base.spec):
            if p.name in self.update_pred:
                gv.validate_vector(
                    self.update_pred[p.name], key=f"update_pred[{p.name}]", dim=p.shift_dim
                )
        if self.update_env is not None:
            gv.validate_vector(
                self.update_env, key="update_env", dim=len(self.base.env.env_params)
            )
        if self.horizon is not None and self.horizon < 1:
            raise InvalidInputError(f"horizon: must be >= 1, got {self.horizon}.")

    def check_index(self, i: int) -> int:
        try:
            i = gv.validate_int(i, key="instance index")
        except InvalidInputError as err:
            raise InstanceRangeError(str(err)) from err
        if i < 0 or (self.horizon is not None and i >= self.horizon):
            bound = f"[0, {self.horizon})" if self.horizon is not None else "[0, inf)"
            err = InstanceRangeError(f"Instance {i} is outside {bound} for '{self.name}'.")
            log.error(err, exc_info=True)
            raise err
        return i

    def predicate_at(self, p: AtomicPredicate, i: int) -> AtomicPredicate:
        delta = self.update_pred.get(p.name) if p.name else None
        if delta is None or i == 0:
            return p
        return shift_predicate(p, i * np.asarray(delta, dtype=np.float64))

    def init_at(self, i: int) -> InitDistribution:
        if self.update_init is None or i == 0:
            return self.base.init
        return shift_init(self.base.init, i * np.asarray(self.update_init))

    def env_at(self, i: int) -> Environment:
        """Environment of instance `i`; the CartPole counter band follows the moved spec."""
        env = self.base.env
        if i == 0:
            return env
        if self.update_env is not None:
            params = np.asarray(env.env_params) + i * np.asarray(self.update_env)
            env = env.with_params(params)
        preds = (self.predicate_at(p, i) for p in iter_predicates(self.base.spec))
        return _with_band(env, hold_band(preds))

    def in_range(self, i: int) -> bool:
        return i >= 0 and (self.horizon is None or i < self.horizon)


def instantiate_task(task: InductiveTask, i: int) -> RLTask:
    i = task.check_index(i)
    if i == 0:
        return task.base
    return RLTask(
        spec=map_predicates(task.base.spec, lambda p: task.predicate_at(p, i)),
        init=task.init_at(i),
        env=task.env_at(i),
    )


def task_satisfied(task: RLTask, trajectory: Trajectory) -> bool:
    return eval_spec(task.spec, trajectory)
