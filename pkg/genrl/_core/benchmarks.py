"""
Benchmark catalog.

Car2D: 1-reach (moving init, moving goal, both; with or without an obstacle),
NReach(n) and NReachObs(n) for n in 1..5, and the choice tasks. Two-link arm:
destacking, pick-and-drop and horizontal stacking. Classic control: CartPole,
Pendulum and Acrobot with induction on an environment parameter.
"""

import logging
from collections.abc import Callable
from dataclasses import dataclass

from genrl._core.envs import BoxInit, EnvId, Environment
from genrl._core.spec_parser import parse_spec
from genrl._core.tasks import InductiveTask, RLTask
from genrl.errors import InvalidInputError

log = logging.getLogger(__name__)

DEFAULT_REACH_EPSILON = 0.3
CAR_INIT_HALF_WIDTH = 0.2
ARM_INIT_HALF_WIDTH = 0.1
TOWER_HEIGHT = 8


@dataclass(frozen=True)
class Benchmark:
    id: str
    description: str
    build: Callable[[float], InductiveTask]


def _car_init(x: float, y: float) -> BoxInit:
    w = CAR_INIT_HALF_WIDTH
    return BoxInit(low=(x - w, y - w), high=(x + w, y + w))


def _one_reach(moving_init: bool, moving_goal: bool, obstacle: bool):
    def build(eps: float) -> InductiveTask:
        text = "achieve reach(goal, eps)"
        if obstacle:
            text += " ensuring avoid(obs)"
        symbols = {"goal": (3.0, 5.0), "eps": eps, "obs": (1.0, 2.0, 2.0, 3.0)}
        return InductiveTask(
            base=RLTask(
                spec=parse_spec(text, symbols),
                init=_car_init(0.0, 0.0),
                env=Environment(id=EnvId.CAR2D),
            ),
            update_pred={"goal": (0.5, 0.0)} if moving_goal else {},
            update_init=(0.5, 0.0) if moving_init else None,
        )

    return build


def _nreach(n: int, obstacle: bool):
    def build(eps: float) -> InductiveTask:
        names = [f"g{k}" for k in range(1, n + 1)]
        text = "; ".join(f"achieve reach({g}, eps)" for g in names)
        symbols: dict = {"eps": eps}
        for k, g in enumerate(names, start=1):
            symbols[g] = (2.0 * k, 3.0 * k)
        if obstacle:
            # one obstacle beside each leg, off the straight line between goals
            for k in range(1, n + 1):
                x, y = 2.0 * k, 3.0 * k
                symbols[f"obs{k}"] = (x - 1.6, y - 1.0, x - 1.1, y - 0.2)
                text += f" ensuring avoid(obs{k})"
        return InductiveTask(
            base=RLTask(
                spec=parse_spec(text, symbols),
                init=_car_init(0.0, 0.0),
                env=Environment(id=EnvId.CAR2D),
            ),
            update_pred={g: (0.5, 0.0) for g in names},
            update_init=(0.5, 0.0),
        )

    return build


def _choice(levels: int, moving_goal: bool):
    def build(eps: float) -> InductiveTask:
        parts = []
        symbols: dict = {"eps": eps}
        for level in range(1, levels + 1):
            base_y = 8.0 * (level - 1)
            symbols[f"g{level}1"] = (0.0, base_y + 4.0)
            symbols[f"g{level}2"] = (9.0, base_y + 4.0)
            symbols[f"goal{level}"] = (4.5, base_y + 8.0)
            symbols[f"obs{level}"] = (3.0, base_y + 1.5, 6.0, base_y + 4.5)
            parts.append(
                f"(achieve reach(g{level}1, eps) or achieve reach(g{level}2, eps)); "
                f"achieve reach(goal{level}, eps)"
            )
        text = "; ".join(f"({p})" if levels > 1 else p for p in parts)
        for level in range(1, levels + 1):
            text = f"{text} ensuring avoid(obs{level})"
        goals = [f"goal{level}" for level in range(1, levels + 1)]
        return InductiveTask(
            base=RLTask(
                spec=parse_spec(text, symbols),
                init=_car_init(0.0, 0.0),
                env=Environment(id=EnvId.CAR2D),
            ),
            update_pred={g: (1.0, 0.0) for g in goals} if moving_goal else {},
            update_init=(1.0, 0.0),
        )

    return build


def _block(x0: float, width: float, k: int, height: float = 1.0) -> tuple:
    return (x0, k * height, x0 + width, (k + 1) * height)


def _arm_init(rect: tuple) -> BoxInit:
    cx, cy = (rect[0] + rect[2]) / 2, (rect[1] + rect[3]) / 2
    w = ARM_INIT_HALF_WIDTH
    return BoxInit(low=(cx - w, cy - w), high=(cx + w, cy + w))


def _destack(source_x: float, target_x: float, link: float):
    """
    Instance `j` moves block `h - j - 1` of the source tower onto level `j` of the
    target tower, starting where the previously moved source block sat.
    """

    def build(eps: float) -> InductiveTask:
        h = TOWER_HEIGHT
        symbols = {
            "target": _block(target_x, 2.0, 0),
            "source": _block(source_x, 2.0, h - 1),
        }
        text = "achieve inrect(target); achieve inrect(source)"
        return InductiveTask(
            base=RLTask(
                spec=parse_spec(text, symbols),
                init=_arm_init(_block(source_x, 2.0, h)),
                env=Environment(id=EnvId.ARM, env_params=(link, link)),
            ),
            update_pred={"target": (0.0, 1.0), "source": (0.0, -1.0)},
            update_init=(0.0, -1.0),
            horizon=h,
        )

    return build


def _pick_drop(source_x: float, drop_x: float, link: float):
    """Carry the top block of the source tower to a fixed drop box."""

    def build(eps: float) -> InductiveTask:
        h = TOWER_HEIGHT
        dropbox = _block(drop_x, 2.0, 0)
        symbols = {"source": _block(source_x, 2.0, h - 1), "dropbox": dropbox}
        text = "achieve inrect(source); achieve inrect(dropbox)"
        return InductiveTask(
            base=RLTask(
                spec=parse_spec(text, symbols),
                init=_arm_init(dropbox),
                env=Environment(id=EnvId.ARM, env_params=(link, link)),
            ),
            update_pred={"source": (0.0, -1.0)},
            horizon=h,
        )

    return build


def _stack_horizontal(eps: float) -> InductiveTask:
    h = TOWER_HEIGHT
    symbols = {
        "target": (h - 1.0, 0.0, float(h), 1.0),
        "source": _block(10.0, 2.0, h - 1),
    }
    text = "achieve inrect(target); achieve inrect(source)"
    return InductiveTask(
        base=RLTask(
            spec=parse_spec(text, symbols),
            init=_arm_init(_block(10.0, 2.0, h)),
            env=Environment(id=EnvId.ARM, env_params=(10.0, 10.0)),
        ),
        update_pred={"target": (-1.0, 0.0), "source": (0.0, -1.0)},
        update_init=(0.0, -1.0),
        horizon=h,
    )


def _cartpole(eps: float) -> InductiveTask:
    band = (0.0, 0.05)
    return InductiveTask(
        base=RLTask(
            spec=parse_spec(f"achieve holdpole({band[0]}, {band[1]}, 8) as hold"),
            init=BoxInit(low=(-0.05, -0.05, 0.06, 0.0), high=(0.05, 0.05, 0.1, 0.0)),
            env=Environment(id=EnvId.CARTPOLE, env_params=(0.4,), hold_band=band),
        ),
        update_env=(0.4,),
    )


def _pendulum(eps: float) -> InductiveTask:
    return InductiveTask(
        base=RLTask(
            spec=parse_spec("achieve reachtheta(0.0, 0.1) as upright"),
            init=BoxInit(low=(-0.5, 0.0), high=(0.5, 0.0)),
            env=Environment(id=EnvId.PENDULUM, env_params=(1.0,)),
        ),
        update_env=(0.1,),
    )


def _acrobot(eps: float) -> InductiveTask:
    return InductiveTask(
        base=RLTask(
            spec=parse_spec("achieve tipabove(1.0) as tip"),
            init=BoxInit(low=(-0.1,) * 4, high=(0.1,) * 4),
            env=Environment(id=EnvId.ACROBOT, env_params=(0.2,)),
        ),
        update_env=(0.1,),
    )


def _catalog() -> dict[str, Benchmark]:
    out: dict[str, Benchmark] = {}

    def add(bid: str, description: str, build: Callable[[float], InductiveTask]):
        out[bid] = Benchmark(id=bid, description=description, build=build)

    for suffix, obstacle in (("", False), ("_obs", True)):
        extra = " around an obstacle" if obstacle else ""
        add(f"reach_moving_init{suffix}", f"1-reach, init moves +0.5 x{extra}",
            _one_reach(True, False, obstacle))
        add(f"reach_moving_goal{suffix}", f"1-reach, goal moves +0.5 x{extra}",
            _one_reach(False, True, obstacle))
        add(f"reach_moving_both{suffix}", f"1-reach, init and goal move +0.5 x{extra}",
            _one_reach(True, True, obstacle))
    for n in range(1, 6):
        add(f"nreach_{n}", f"reach {n} goals in sequence", _nreach(n, False))
        add(f"nreach_obs_{n}", f"reach {n} goals in sequence avoiding obstacles",
            _nreach(n, True))
    add("choice", "visit g1 or g2, then goal; init moves +1 x", _choice(1, False))
    add("choice_moving_goal", "choice with the goal moving +1 x", _choice(1, True))
    add("choice_two_levels", "two stacked choice levels with moving goals",
        _choice(2, True))
    add("destack_same_side", "move the source tower onto the target tower, same side",
        _destack(10.0, 4.0, 10.0))
    add("destack_opposite_side", "move the source tower onto the target tower, "
        "opposite sides", _destack(3.0, -5.0, 5.0))
    add("pick_drop_same_side", "carry source blocks to a drop box, same side",
        _pick_drop(10.0, 4.0, 10.0))
    add("pick_drop_opposite_side", "carry source blocks to a drop box, opposite sides",
        _pick_drop(3.0, -5.0, 5.0))
    add("stack_horizontal_same_side", "lay source blocks in a row along the x axis",
        _stack_horizontal)
    add("cartpole", "catch a tilted pole and hold it upright; pole length grows +0.4",
        _cartpole)
    add("pendulum", "swing to upright; pendulum mass grows +0.1", _pendulum)
    add("acrobot", "swing the tip up from hanging; link mass grows +0.1", _acrobot)
    return out


BENCHMARKS: dict[str, Benchmark] = _catalog()


def list_benchmarks() -> list[Benchmark]:
    return list(BENCHMARKS.values())


def get_benchmark(benchmark_id: str, reach_epsilon: float = DEFAULT_REACH_EPSILON):
    """
    Build the inductive task for a benchmark id.

    :param reach_epsilon: Radius of Car2D reach predicates.
    """
    bench = BENCHMARKS.get(benchmark_id)
    if bench is None:
        err = InvalidInputError(
            f"Unknown benchmark '{benchmark_id}'. Known: {', '.join(BENCHMARKS)}."
        )
        log.error(err, exc_info=True)
        raise err
    task = bench.build(reach_epsilon)
    return InductiveTask(
        base=task.base,
        update_pred=task.update_pred,
        update_init=task.update_init,
        update_env=task.update_env,
        horizon=task.horizon,
        name=benchmark_id,
    )
