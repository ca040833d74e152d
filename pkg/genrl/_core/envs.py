"""
Deterministic environments with stochastic initial states.

All step functions work on batches: states of shape `(N, n)` and actions of shape
`(N, m)`. Actions outside the bounds are clamped.
"""

import logging
from collections.abc import Sequence
from dataclasses import dataclass
from enum import Enum

import numpy as np

from genrl._core import bases
from genrl._core.spec_lang import wrap_angle
from genrl._utils import validators as gv
from genrl.errors import InvalidInputError

log = logging.getLogger(__name__)


class EnvId(str, Enum):
    CAR2D = "car2d"
    ARM = "arm"
    CARTPOLE = "cartpole"
    PENDULUM = "pendulum"
    ACROBOT = "acrobot"


# state dim, action dim, init dim, observation dim
_DIMS = {
    EnvId.CAR2D: (2, 2, 2, 2),
    EnvId.ARM: (4, 2, 2, 4),
    EnvId.CARTPOLE: (5, 1, 4, 4),
    EnvId.PENDULUM: (2, 1, 2, 3),
    EnvId.ACROBOT: (4, 1, 4, 6),
}

_ACTION_LIMIT = {
    EnvId.CAR2D: 1.0,
    EnvId.ARM: 0.3,
    EnvId.CARTPOLE: 1.0,
    EnvId.PENDULUM: 2.0,
    EnvId.ACROBOT: 1.0,
}

_DEFAULT_PARAMS = {
    EnvId.CAR2D: (),
    EnvId.ARM: (10.0, 10.0),
    EnvId.CARTPOLE: (0.5,),
    EnvId.PENDULUM: (1.0,),
    EnvId.ACROBOT: (1.0,),
}

_DT = {
    EnvId.CAR2D: 1.0,
    EnvId.ARM: 1.0,
    EnvId.CARTPOLE: 0.02,
    EnvId.PENDULUM: 0.05,
    EnvId.ACROBOT: 0.2,
}

# CartPole
GRAVITY = 9.8
CART_MASS = 1.0
POLE_MASS = 0.1
FORCE_MAG = 10.0

# Pendulum
PENDULUM_G = 10.0
PENDULUM_LENGTH = 1.0
PENDULUM_MAX_SPEED = 8.0

# Acrobot
LINK_LENGTH_1 = 1.0
LINK_COM_POS = 0.5
LINK_MOI = 1.0
ACROBOT_MAX_VEL_1 = 4 * np.pi
ACROBOT_MAX_VEL_2 = 9 * np.pi
ACROBOT_SUBSTEPS = 4


class Environment(bases.Model):
    """
    An environment and its physical parameters.

    :param env_params: Arm: link lengths `(l1, l2)`. CartPole: pole half-length `l`.
        Pendulum: mass `m_p`. Acrobot: link mass `m_a` (both links).
    :param hold_band: CartPole only: `(goal, tolerance)` of the pole angle band in which
        the hold counter (last state component) increases. Tasks set it from their
        `holdpole` predicate.
    """

    id: EnvId
    env_params: tuple[float, ...] = ()
    hold_band: tuple[float, float] = (0.0, 0.1)

    def model_post_init(self, __context) -> None:
        if not self.env_params:
            object.__setattr__(self, "env_params", _DEFAULT_PARAMS[self.id])
        if len(self.env_params) != len(_DEFAULT_PARAMS[self.id]):
            raise InvalidInputError(
                f"{self.id.value}: expected {len(_DEFAULT_PARAMS[self.id])} env params, "
                f"got {len(self.env_params)}."
            )
        if any(not np.isfinite(p) or p <= 0 for p in self.env_params):
            raise InvalidInputError(f"{self.id.value}: env params must be positive.")

    @property
    def state_dim(self) -> int:
        return _DIMS[self.id][0]

    @property
    def action_dim(self) -> int:
        return _DIMS[self.id][1]

    @property
    def init_dim(self) -> int:
        """Dimension of parametric initial distributions."""
        return _DIMS[self.id][2]

    @property
    def obs_dim(self) -> int:
        return _DIMS[self.id][3]

    @property
    def action_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        limit = _ACTION_LIMIT[self.id]
        return np.full(self.action_dim, -limit), np.full(self.action_dim, limit)

    @property
    def step_dt(self) -> float:
        return _DT[self.id]

    def with_params(self, env_params: Sequence[float]) -> "Environment":
        return Environment(
            id=self.id, env_params=tuple(map(float, env_params)), hold_band=self.hold_band
        )

    def with_hold_band(self, band: tuple[float, float]) -> "Environment":
        return Environment(
            id=self.id, env_params=self.env_params, hold_band=(float(band[0]), float(band[1]))
        )


def forward_kinematics(theta1, theta2, l1: float, l2: float) -> np.ndarray:
    """End-effector position of a planar two-link arm, shape `(..., 2)`."""
    theta1, theta2 = np.asarray(theta1), np.asarray(theta2)
    x = l1 * np.cos(theta1) + l2 * np.cos(theta1 + theta2)
    y = l1 * np.sin(theta1) + l2 * np.sin(theta1 + theta2)
    return np.stack([x, y], axis=-1)


def inverse_kinematics(points, l1: float, l2: float) -> np.ndarray:
    """
    Joint angles `(theta1, theta2)` with `theta2 >= 0` reaching each point.

    Points outside the annulus the arm can reach are projected onto its boundary.
    """
    p = np.asarray(points, dtype=np.float64)
    r = np.linalg.norm(p, axis=-1)
    r_clip = np.clip(r, abs(l1 - l2) + 1e-9, l1 + l2 - 1e-9)
    cos2 = (r_clip**2 - l1**2 - l2**2) / (2 * l1 * l2)
    theta2 = np.arccos(np.clip(cos2, -1.0, 1.0))
    phi = np.arctan2(p[..., 1], p[..., 0])
    theta1 = phi - np.arctan2(l2 * np.sin(theta2), l1 + l2 * np.cos(theta2))
    return np.stack([theta1, theta2], axis=-1)


def _check_batch(env: Environment, states, actions) -> tuple[np.ndarray, np.ndarray]:
    s = np.asarray(states, dtype=np.float64)
    a = np.asarray(actions, dtype=np.float64)
    if s.ndim != 2 or s.shape[1] != env.state_dim:
        raise InvalidInputError(
            f"{env.id.value}: expected states of shape (N, {env.state_dim}), got {s.shape}."
        )
    if a.shape != (s.shape[0], env.action_dim):
        raise InvalidInputError(
            f"{env.id.value}: expected actions of shape "
            f"({s.shape[0]}, {env.action_dim}), got {a.shape}."
        )
    if not (np.all(np.isfinite(s)) and np.all(np.isfinite(a))):
        raise InvalidInputError(f"{env.id.value}: non-finite state or action.")
    lo, hi = env.action_bounds
    return s, np.clip(a, lo, hi)


def _car2d(env: Environment, s: np.ndarray, a: np.ndarray) -> np.ndarray:
    return s + a * env.step_dt


def _arm(env: Environment, s: np.ndarray, a: np.ndarray) -> np.ndarray:
    l1, l2 = env.env_params
    theta = s[:, 2:4] + a
    xy = forward_kinematics(theta[:, 0], theta[:, 1], l1, l2)
    return np.concatenate([xy, theta], axis=1)


def _cartpole(env: Environment, s: np.ndarray, a: np.ndarray) -> np.ndarray:
    (length,) = env.env_params
    tau = env.step_dt
    total_mass = CART_MASS + POLE_MASS
    polemass_length = POLE_MASS * length
    x, x_dot, theta, theta_dot, counter = s.T
    force = FORCE_MAG * a[:, 0]
    cos, sin = np.cos(theta), np.sin(theta)
    temp = (force + polemass_length * theta_dot**2 * sin) / total_mass
    theta_acc = (GRAVITY * sin - cos * temp) / (
        length * (4.0 / 3.0 - POLE_MASS * cos**2 / total_mass)
    )
    x_acc = temp - polemass_length * theta_acc * cos / total_mass
    x = x + tau * x_dot
    x_dot = x_dot + tau * x_acc
    theta = theta + tau * theta_dot
    theta_dot = theta_dot + tau * theta_acc
    goal, eps = env.hold_band
    counter = np.where(np.abs(theta - goal) < eps, counter + 1, 0.0)
    return np.stack([x, x_dot, theta, theta_dot, counter], axis=1)


def _pendulum(env: Environment, s: np.ndarray, a: np.ndarray) -> np.ndarray:
    (mass,) = env.env_params
    dt = env.step_dt
    g, length = PENDULUM_G, PENDULUM_LENGTH
    theta, theta_dot = s.T
    u = a[:, 0]
    new_theta_dot = theta_dot + (
        3 * g / (2 * length) * np.sin(theta) + 3.0 / (mass * length**2) * u
    ) * dt
    new_theta_dot = np.clip(new_theta_dot, -PENDULUM_MAX_SPEED, PENDULUM_MAX_SPEED)
    new_theta = wrap_angle(theta + new_theta_dot * dt)
    return np.stack([new_theta, new_theta_dot], axis=1)


def _acrobot_accel(mass: float, s: np.ndarray, torque: np.ndarray) -> np.ndarray:
    m1 = m2 = mass
    l1, lc1, lc2 = LINK_LENGTH_1, LINK_COM_POS, LINK_COM_POS
    i1 = i2 = LINK_MOI
    theta1, theta2, dtheta1, dtheta2 = s.T
    d1 = m1 * lc1**2 + m2 * (l1**2 + lc2**2 + 2 * l1 * lc2 * np.cos(theta2)) + i1 + i2
    d2 = m2 * (lc2**2 + l1 * lc2 * np.cos(theta2)) + i2
    phi2 = m2 * lc2 * GRAVITY * np.cos(theta1 + theta2 - np.pi / 2.0)
    phi1 = (
        -m2 * l1 * lc2 * dtheta2**2 * np.sin(theta2)
        - 2 * m2 * l1 * lc2 * dtheta2 * dtheta1 * np.sin(theta2)
        + (m1 * lc1 + m2 * l1) * GRAVITY * np.cos(theta1 - np.pi / 2)
        + phi2
    )
    ddtheta2 = (
        torque + d2 / d1 * phi1 - m2 * l1 * lc2 * dtheta1**2 * np.sin(theta2) - phi2
    ) / (m2 * lc2**2 + i2 - d2**2 / d1)
    ddtheta1 = -(d2 * ddtheta2 + phi1) / d1
    return np.stack([dtheta1, dtheta2, ddtheta1, ddtheta2], axis=1)


def _acrobot(env: Environment, s: np.ndarray, a: np.ndarray) -> np.ndarray:
    (mass,) = env.env_params
    h = env.step_dt / ACROBOT_SUBSTEPS
    out = s.copy()
    for _ in range(ACROBOT_SUBSTEPS):
        out = out + h * _acrobot_accel(mass, out, a[:, 0])
    out[:, 0] = wrap_angle(out[:, 0])
    out[:, 1] = wrap_angle(out[:, 1])
    out[:, 2] = np.clip(out[:, 2], -ACROBOT_MAX_VEL_1, ACROBOT_MAX_VEL_1)
    out[:, 3] = np.clip(out[:, 3], -ACROBOT_MAX_VEL_2, ACROBOT_MAX_VEL_2)
    return out


_STEP = {
    EnvId.CAR2D: _car2d,
    EnvId.ARM: _arm,
    EnvId.CARTPOLE: _cartpole,
    EnvId.PENDULUM: _pendulum,
    EnvId.ACROBOT: _acrobot,
}


def step_batch(env: Environment, states, actions) -> np.ndarray:
    s, a = _check_batch(env, states, actions)
    return _STEP[env.id](env, s, a)


def env_step(env: Environment, s, a) -> np.ndarray:
    s = gv.validate_vector(s, key="state", dim=env.state_dim)
    a = gv.validate_vector(a, key="action", dim=env.action_dim)
    return step_batch(env, s[None, :], a[None, :])[0]


def observe(env: Environment, states) -> np.ndarray:
    """Policy inputs for a batch of states."""
    s = np.asarray(states, dtype=np.float64)
    match env.id:
        case EnvId.CARTPOLE:
            return s[..., :4]
        case EnvId.PENDULUM:
            return np.stack([np.cos(s[..., 0]), np.sin(s[..., 0]), s[..., 1]], axis=-1)
        case EnvId.ACROBOT:
            t1, t2 = s[..., 0], s[..., 1]
            return np.stack(
                [np.cos(t1), np.sin(t1), np.cos(t2), np.sin(t2), s[..., 2], s[..., 3]],
                axis=-1,
            )
    return s


def lift_init(env: Environment, points) -> np.ndarray:
    """
    Turn samples of a parametric initial distribution into full states.

    Arm samples are end-effector positions, completed with joint angles from inverse
    kinematics (and moved onto the reachable set). CartPole samples get a hold counter.
    """
    p = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if p.shape[1] != env.init_dim:
        raise InvalidInputError(
            f"{env.id.value}: initial samples need dimension {env.init_dim}, got {p.shape[1]}."
        )
    match env.id:
        case EnvId.ARM:
            l1, l2 = env.env_params
            theta = inverse_kinematics(p, l1, l2)
            xy = forward_kinematics(theta[:, 0], theta[:, 1], l1, l2)
            return np.concatenate([xy, theta], axis=1)
        case EnvId.CARTPOLE:
            goal, eps = env.hold_band
            counter = (np.abs(p[:, 2] - goal) < eps).astype(np.float64)
            return np.concatenate([p, counter[:, None]], axis=1)
        case EnvId.PENDULUM:
            return np.stack([wrap_angle(p[:, 0]), p[:, 1]], axis=1)
    return p


@dataclass(frozen=True)
class PointInit:
    point: tuple[float, ...]

    full_state = False

    @property
    def dim(self) -> int:
        return len(self.point)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return np.tile(np.asarray(self.point), (n, 1))

    def shift(self, delta: np.ndarray) -> "PointInit":
        return PointInit(point=tuple(float(x) for x in np.asarray(self.point) + delta))

    def mean(self) -> np.ndarray:
        return np.asarray(self.point)

    def contains(self, s: np.ndarray, atol: float = 1e-9) -> bool:
        return bool(np.allclose(s[: self.dim], self.point, atol=atol))


@dataclass(frozen=True)
class BoxInit:
    low: tuple[float, ...]
    high: tuple[float, ...]

    full_state = False

    def __post_init__(self):
        if len(self.low) != len(self.high) or np.any(np.asarray(self.low) > self.high):
            raise InvalidInputError("Box initial distribution needs low <= high.")

    @property
    def dim(self) -> int:
        return len(self.low)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.uniform(self.low, self.high, size=(n, self.dim))

    def shift(self, delta: np.ndarray) -> "BoxInit":
        return BoxInit(
            low=tuple(float(x) for x in np.asarray(self.low) + delta),
            high=tuple(float(x) for x in np.asarray(self.high) + delta),
        )

    def mean(self) -> np.ndarray:
        return (np.asarray(self.low) + np.asarray(self.high)) / 2

    def contains(self, s: np.ndarray, atol: float = 1e-9) -> bool:
        x = s[: self.dim]
        above = np.all(x >= np.asarray(self.low) - atol)
        return bool(above and np.all(x <= np.asarray(self.high) + atol))


@dataclass(frozen=True, eq=False)
class EmpiricalInit:
    """Uniform choice among full-state particles."""

    particles: np.ndarray

    full_state = True

    def __post_init__(self):
        p = np.array(self.particles, dtype=np.float64)
        if p.ndim != 2 or p.shape[0] == 0:
            raise InvalidInputError("Empirical distribution needs a non-empty particle list.")
        p.setflags(write=False)
        object.__setattr__(self, "particles", p)

    @property
    def dim(self) -> int:
        return self.particles.shape[1]

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        idx = rng.integers(0, self.particles.shape[0], size=n)
        return self.particles[idx]

    def shift(self, delta: np.ndarray) -> "EmpiricalInit":
        out = self.particles.copy()
        out[:, : len(delta)] += delta
        return EmpiricalInit(particles=out)

    def mean(self) -> np.ndarray:
        return self.particles.mean(axis=0)

    def contains(self, s: np.ndarray, atol: float = 1e-9) -> bool:
        return bool(np.any(np.all(np.abs(self.particles - s) <= atol, axis=1)))


InitDistribution = PointInit | BoxInit | EmpiricalInit


def _rng(seed: int | np.random.Generator) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def sample_init(d: InitDistribution, rng_seed: int | np.random.Generator) -> np.ndarray:
    """One sample in the distribution's own coordinates."""
    return d.sample(_rng(rng_seed), 1)[0]


def sample_states(
    env: Environment, d: InitDistribution, rng: np.random.Generator, n: int
) -> np.ndarray:
    """`n` full initial states for `env`."""
    points = d.sample(rng, n)
    if d.full_state:
        return points
    return lift_init(env, points)


def shift_init(d: InitDistribution, delta) -> InitDistribution:
    dim = d.dim if not d.full_state else None
    delta = gv.validate_vector(delta, key="delta", dim=dim)
    if d.full_state and len(delta) > d.dim:
        raise InvalidInputError(f"delta: expected length <= {d.dim}, got {len(delta)}.")
    return d.shift(delta)
