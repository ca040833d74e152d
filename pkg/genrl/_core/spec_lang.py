"""
Specification language: atomic predicates, formulas and finite-trajectory semantics.

A formula is built from four constructs:

- `Achieve(b)`: some state of the trajectory satisfies `b`.
- `Ensuring(phi, b)`: `phi` holds and every state satisfies `b`.
- `Seq(phi1, phi2)`: a prefix satisfies `phi1` and the remaining suffix satisfies `phi2`.
- `Choice(phi1, phi2)`: either formula holds.
"""

import csv
import logging
from collections.abc import Iterator, Sequence
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Union

import numpy as np
from pydantic import model_validator

from genrl._core import bases
from genrl._utils import validators as gv
from genrl.errors import InvalidInputError

log = logging.getLogger(__name__)


class PredicateKind(str, Enum):
    REACH_BALL = "reach"
    IN_RECT = "inrect"
    AVOID_RECT = "avoid"
    HOLD_POLE = "holdpole"
    REACH_THETA = "reachtheta"
    REACH_TIP = "reachtip"
    TIP_ABOVE = "tipabove"


# State layout read by each predicate kind.
CARTPOLE_THETA, CARTPOLE_COUNTER = 2, 4
PENDULUM_THETA = 0
ACROBOT_THETA1, ACROBOT_THETA2 = 0, 1

_ARITY = {
    PredicateKind.IN_RECT: 4,
    PredicateKind.AVOID_RECT: 4,
    PredicateKind.HOLD_POLE: 3,
    PredicateKind.REACH_THETA: 2,
    PredicateKind.REACH_TIP: 1,
    PredicateKind.TIP_ABOVE: 1,
}


def wrap_angle(theta: np.ndarray | float) -> np.ndarray | float:
    """Map angles onto [-pi, pi)."""
    return (np.asarray(theta) + np.pi) % (2 * np.pi) - np.pi


def tip_height(theta1: np.ndarray, theta2: np.ndarray) -> np.ndarray:
    """Height of an acrobot's tip above the pivot, in link lengths."""
    return -np.cos(theta1) - np.cos(theta1 + theta2)


class AtomicPredicate(bases.Model):
    """
    A parameterised boolean test on a single state.

    Parameter layout by kind:

    - reach: `(c_0, ..., c_{n-1}, radius)`
    - inrect / avoid: `(a_x, a_y, b_x, b_y)`
    - holdpole: `(goal, tolerance, duration)`
    - reachtheta: `(goal, tolerance)`
    - reachtip: `(threshold,)`, on the absolute tip height
    - tipabove: `(threshold,)`, on the signed tip height (above the pivot is positive)

    :param name: Optional label; inductive tasks address predicates by label.
    """

    kind: PredicateKind
    params: tuple[float, ...]
    name: str | None = None

    @model_validator(mode="after")
    def _check_params(self) -> "AtomicPredicate":
        p = self.params
        if not all(np.isfinite(p)):
            raise InvalidInputError(f"{self.kind.value}: parameters must be finite.")
        arity = _ARITY.get(self.kind)
        if arity is None:
            if len(p) < 2:
                raise InvalidInputError("reach: expected a centre and a radius.")
            if p[-1] <= 0:
                raise InvalidInputError(f"reach: radius must be > 0, got {p[-1]}.")
            return self
        if len(p) != arity:
            raise InvalidInputError(
                f"{self.kind.value}: expected {arity} parameters, got {len(p)}."
            )
        if self.kind in (PredicateKind.IN_RECT, PredicateKind.AVOID_RECT):
            if p[0] > p[2] or p[1] > p[3]:
                raise InvalidInputError(
                    f"{self.kind.value}: corner a must be <= corner b componentwise."
                )
        elif self.kind == PredicateKind.HOLD_POLE:
            if p[1] <= 0 or p[2] < 1:
                raise InvalidInputError("holdpole: needs tolerance > 0 and duration >= 1.")
        elif self.kind == PredicateKind.REACH_THETA and p[1] <= 0:
            raise InvalidInputError("reachtheta: tolerance must be > 0.")
        return self

    @property
    def state_dim(self) -> int:
        """Smallest state dimension this predicate can read."""
        match self.kind:
            case PredicateKind.REACH_BALL:
                return len(self.params) - 1
            case PredicateKind.IN_RECT | PredicateKind.AVOID_RECT:
                return 2
            case PredicateKind.HOLD_POLE:
                return CARTPOLE_COUNTER + 1
            case PredicateKind.REACH_THETA:
                return PENDULUM_THETA + 1
            case PredicateKind.REACH_TIP | PredicateKind.TIP_ABOVE:
                return ACROBOT_THETA2 + 1

    @property
    def shift_dim(self) -> int:
        """Length of the translation vector `shift_predicate` expects."""
        if self.kind == PredicateKind.REACH_BALL:
            return len(self.params) - 1
        if self.kind in (PredicateKind.IN_RECT, PredicateKind.AVOID_RECT):
            return 2
        return 1

    def center(self) -> np.ndarray:
        """Positional centre for region predicates (ball centre, rectangle centre)."""
        p = np.asarray(self.params)
        if self.kind == PredicateKind.REACH_BALL:
            return p[:-1]
        if self.kind in (PredicateKind.IN_RECT, PredicateKind.AVOID_RECT):
            return (p[:2] + p[2:]) / 2
        return p[:1]

    def with_params(self, params: Sequence[float]) -> "AtomicPredicate":
        return AtomicPredicate(
            kind=self.kind, params=tuple(float(x) for x in params), name=self.name
        )

    def describe(self) -> str:
        args = ", ".join(repr(x) for x in self.params)
        label = f" as {self.name}" if self.name else ""
        return f"{self.kind.value}({args}){label}"


def reach_ball(center: Sequence[float], radius: float, name: str | None = None):
    c = gv.validate_vector(center, key="center")
    r = gv.validate_float(radius, key="radius")
    return AtomicPredicate(
        kind=PredicateKind.REACH_BALL, params=(*map(float, c), r), name=name
    )


def in_rect(a: Sequence[float], b: Sequence[float], name: str | None = None):
    a = gv.validate_vector(a, key="a", dim=2)
    b = gv.validate_vector(b, key="b", dim=2)
    return AtomicPredicate(
        kind=PredicateKind.IN_RECT, params=(*map(float, a), *map(float, b)), name=name
    )


def avoid_rect(a: Sequence[float], b: Sequence[float], name: str | None = None):
    a = gv.validate_vector(a, key="a", dim=2)
    b = gv.validate_vector(b, key="b", dim=2)
    return AtomicPredicate(
        kind=PredicateKind.AVOID_RECT, params=(*map(float, a), *map(float, b)), name=name
    )


def hold_pole(goal: float, tolerance: float, duration: int, name: str | None = None):
    return AtomicPredicate(
        kind=PredicateKind.HOLD_POLE,
        params=(float(goal), float(tolerance), float(duration)),
        name=name,
    )


def reach_theta(goal: float, tolerance: float, name: str | None = None):
    return AtomicPredicate(
        kind=PredicateKind.REACH_THETA, params=(float(goal), float(tolerance)), name=name
    )


def reach_tip(threshold: float, name: str | None = None):
    return AtomicPredicate(
        kind=PredicateKind.REACH_TIP, params=(float(threshold),), name=name
    )


def tip_above(threshold: float, name: str | None = None):
    return AtomicPredicate(
        kind=PredicateKind.TIP_ABOVE, params=(float(threshold),), name=name
    )


def _as_states(p: AtomicPredicate, states) -> np.ndarray:
    arr = np.asarray(states, dtype=np.float64)
    if arr.ndim == 0 or arr.shape[-1] < p.state_dim:
        raise InvalidInputError(
            f"{p.describe()}: needs states of dimension >= {p.state_dim}, "
            f"got shape {arr.shape}."
        )
    return arr


def predicate_mask(p: AtomicPredicate, states) -> np.ndarray:
    """
    Evaluate a predicate on a batch of states of shape `(..., n)`.

    :return: A boolean array of shape `(...)`.
    """
    s = _as_states(p, states)
    prm = np.asarray(p.params)
    match p.kind:
        case PredicateKind.REACH_BALL:
            n = len(prm) - 1
            return np.linalg.norm(s[..., :n] - prm[:n], axis=-1) < prm[n]
        case PredicateKind.IN_RECT | PredicateKind.AVOID_RECT:
            inside = np.all((s[..., :2] >= prm[:2]) & (s[..., :2] <= prm[2:]), axis=-1)
            return inside if p.kind == PredicateKind.IN_RECT else ~inside
        case PredicateKind.HOLD_POLE:
            in_band = np.abs(s[..., CARTPOLE_THETA] - prm[0]) < prm[1]
            return in_band & (s[..., CARTPOLE_COUNTER] >= prm[2])
        case PredicateKind.REACH_THETA:
            return np.abs(wrap_angle(s[..., PENDULUM_THETA] - prm[0])) < prm[1]
        case PredicateKind.REACH_TIP:
            h = tip_height(s[..., ACROBOT_THETA1], s[..., ACROBOT_THETA2])
            return np.abs(h) > prm[0]
        case PredicateKind.TIP_ABOVE:
            return tip_height(s[..., ACROBOT_THETA1], s[..., ACROBOT_THETA2]) > prm[0]


def eval_predicate(p: AtomicPredicate, s) -> bool:
    s = gv.validate_vector(s, key="state")
    return bool(predicate_mask(p, s))


def goal_distance(p: AtomicPredicate, states) -> np.ndarray:
    """
    Non-negative distance of each state from satisfying a goal predicate.

    Zero means the goal is met for the threshold kinds; the region kinds measure the
    distance to the region's centre.
    """
    s = _as_states(p, states)
    prm = np.asarray(p.params)
    match p.kind:
        case PredicateKind.REACH_BALL | PredicateKind.IN_RECT:
            c = p.center()
            return np.linalg.norm(s[..., : len(c)] - c, axis=-1)
        case PredicateKind.AVOID_RECT:
            return np.zeros(s.shape[:-1])
        case PredicateKind.HOLD_POLE:
            err = np.abs(s[..., CARTPOLE_THETA] - prm[0])
            shortfall = np.maximum(0.0, prm[2] - s[..., CARTPOLE_COUNTER]) / prm[2]
            return err + shortfall
        case PredicateKind.REACH_THETA:
            return np.abs(wrap_angle(s[..., PENDULUM_THETA] - prm[0]))
        case PredicateKind.REACH_TIP:
            h = tip_height(s[..., ACROBOT_THETA1], s[..., ACROBOT_THETA2])
            return np.maximum(0.0, prm[0] - np.abs(h))
        case PredicateKind.TIP_ABOVE:
            h = tip_height(s[..., ACROBOT_THETA1], s[..., ACROBOT_THETA2])
            return np.maximum(0.0, prm[0] - h)


def shift_predicate(p: AtomicPredicate, delta) -> AtomicPredicate:
    """
    Translate the positional parameters of a predicate.

    Ball centres, both rectangle corners, goal angles and the tip threshold move;
    radii, tolerances and durations do not.
    """
    d = gv.validate_vector(delta, key="delta", dim=p.shift_dim)
    prm = np.array(p.params)
    match p.kind:
        case PredicateKind.REACH_BALL:
            prm[:-1] += d
        case PredicateKind.IN_RECT | PredicateKind.AVOID_RECT:
            prm[:2] += d
            prm[2:] += d
        case _:
            prm[0] += d[0]
    return p.with_params(prm)


class Achieve(bases.Model):
    pred: AtomicPredicate


class Ensuring(bases.Model):
    spec: "Spec"
    pred: AtomicPredicate


class Seq(bases.Model):
    first: "Spec"
    second: "Spec"


class Choice(bases.Model):
    left: "Spec"
    right: "Spec"


Spec = Union[Achieve, Ensuring, Seq, Choice]  # noqa: UP007

Ensuring.model_rebuild()
Seq.model_rebuild()
Choice.model_rebuild()


def iter_predicates(spec: Spec) -> Iterator[AtomicPredicate]:
    """Predicates in left-to-right order of the formula text."""
    match spec:
        case Achieve(pred=p):
            yield p
        case Ensuring(spec=inner, pred=p):
            yield from iter_predicates(inner)
            yield p
        case Seq(first=a, second=b) | Choice(left=a, right=b):
            yield from iter_predicates(a)
            yield from iter_predicates(b)


def map_predicates(spec: Spec, func) -> Spec:
    """Rebuild a formula with `func` applied to every predicate."""
    match spec:
        case Achieve(pred=p):
            return Achieve(pred=func(p))
        case Ensuring(spec=inner, pred=p):
            return Ensuring(spec=map_predicates(inner, func), pred=func(p))
        case Seq(first=a, second=b):
            return Seq(first=map_predicates(a, func), second=map_predicates(b, func))
        case Choice(left=a, right=b):
            return Choice(left=map_predicates(a, func), right=map_predicates(b, func))
    raise InvalidInputError(f"Not a formula: {spec!r}")


def same_shape(a: Spec, b: Spec) -> bool:
    """True when two formulas differ at most in predicate parameters."""
    match a, b:
        case Achieve(pred=p), Achieve(pred=q):
            return p.kind == q.kind and p.name == q.name
        case Ensuring(spec=x, pred=p), Ensuring(spec=y, pred=q):
            return p.kind == q.kind and p.name == q.name and same_shape(x, y)
        case Seq(first=x1, second=x2), Seq(first=y1, second=y2):
            return same_shape(x1, y1) and same_shape(x2, y2)
        case Choice(left=x1, right=x2), Choice(left=y1, right=y2):
            return same_shape(x1, y1) and same_shape(x2, y2)
    return False


@dataclass(frozen=True)
class Trajectory:
    """
    A finite trajectory `s_0 a_0 s_1 ... a_{t-1} s_t`.

    :param states: Array of shape `(t + 1, n)`.
    :param actions: Array of shape `(t, m)`.
    :param edges: Optional position in the executed path for each action step.
    """

    states: np.ndarray
    actions: np.ndarray
    edges: np.ndarray | None = None

    def __post_init__(self):
        states = np.asarray(self.states, dtype=np.float64)
        if states.ndim == 1:
            states = states[:, None]
        actions = np.asarray(self.actions, dtype=np.float64)
        if actions.size == 0:
            actions = actions.reshape(0, actions.shape[-1] if actions.ndim == 2 else 0)
        if states.ndim != 2 or states.shape[0] == 0:
            raise InvalidInputError("Trajectory needs at least one state.")
        if actions.ndim != 2 or actions.shape[0] != states.shape[0] - 1:
            raise InvalidInputError(
                f"Trajectory with {states.shape[0]} states needs "
                f"{states.shape[0] - 1} actions, got shape {actions.shape}."
            )
        if self.edges is not None and len(self.edges) != actions.shape[0]:
            raise InvalidInputError("Edge annotation must have one entry per action.")
        states.setflags(write=False)
        actions.setflags(write=False)
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "actions", actions)

    def __len__(self) -> int:
        return self.states.shape[0]

    @classmethod
    def from_states(cls, states, action_dim: int = 1) -> "Trajectory":
        states = np.asarray(states, dtype=np.float64)
        n = states.shape[0] if states.ndim else 0
        return cls(states=states, actions=np.zeros((max(n - 1, 0), action_dim)))

    def header(self) -> list[str]:
        n, m = self.states.shape[1], self.actions.shape[1]
        return ["step", *(f"s_{k}" for k in range(n)), *(f"a_{k}" for k in range(m))]

    def rows(self) -> Iterator[list]:
        blank = [""] * self.actions.shape[1]
        for step, s in enumerate(self.states):
            if step < len(self.actions):
                a = [repr(float(x)) for x in self.actions[step]]
            else:
                a = blank
            yield [step, *(repr(float(x)) for x in s), *a]

    def to_csv(self, path: Path) -> None:
        with open(path, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(self.header())
            writer.writerows(self.rows())


def _satisfaction_matrix(spec: Spec, states: np.ndarray) -> np.ndarray:
    """
    `M[a, b]` is True when the segment `s_a ... s_b` satisfies `spec`.

    Only the upper triangle (a <= b) can be True.
    """
    size = states.shape[0]
    idx = np.arange(size)
    match spec:
        case Achieve(pred=p):
            hits = predicate_mask(p, states)
            # first index >= a where the predicate holds, `size` when none
            first = np.full(size + 1, size)
            for a in range(size - 1, -1, -1):
                first[a] = a if hits[a] else first[a + 1]
            return idx[None, :] >= first[:size, None]
        case Ensuring(spec=inner, pred=p):
            ok = predicate_mask(p, states)
            first_bad = np.full(size + 1, size)
            for a in range(size - 1, -1, -1):
                first_bad[a] = first_bad[a + 1] if ok[a] else a
            inner_m = _satisfaction_matrix(inner, states)
            return inner_m & (idx[None, :] < first_bad[:size, None])
        case Seq(first=x, second=y):
            mx = _satisfaction_matrix(x, states)
            my = _satisfaction_matrix(y, states)
            out = np.zeros((size, size), dtype=bool)
            if size > 1:
                # split after index i: x on [a, i], y on [i + 1, b]
                out = (mx[:, :-1].astype(np.int64) @ my[1:, :].astype(np.int64)) > 0
            return out
        case Choice(left=x, right=y):
            return _satisfaction_matrix(x, states) | _satisfaction_matrix(y, states)
    raise InvalidInputError(f"Not a formula: {spec!r}")


def eval_spec(spec: Spec, trajectory: Trajectory) -> bool:
    states = trajectory.states
    return bool(_satisfaction_matrix(spec, states)[0, states.shape[0] - 1])
