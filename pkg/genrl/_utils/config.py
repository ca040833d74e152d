import logging
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path

import toml

from genrl.errors import ConfigError

log = logging.getLogger(__name__)

defaults = {
    "GENRL_CONFIG_FILE": Path.home() / ".genrl_config.toml",
}

MODES = ("genrl", "base1", "base2", "base3")
TEMPLATES = ("polynomial", "constant")
FEATURE_MODES = ("index", "env")


def _fail(msg: str):
    err = ConfigError(msg)
    log.error(err, exc_info=True)
    raise err


@dataclass
class ArsConfig:
    """
    Augmented Random Search settings shared by base-policy, kappa and baseline training.

    `alpha` is measured in perturbation radii: one unit moves the parameters by
    `delta_scale` along the weighted direction.
    """

    n_directions: int = 30
    top_b: int = 8
    delta_scale: float = 0.05
    alpha: float = 1.0
    alpha_min: float = 0.1
    decay_patience: int = 20
    max_iters: int = 200
    train_steps: int = 15
    eval_rollouts_train: int = 100
    reward_rollouts: int = 4
    softmin_tau: float = 1.0
    safety_penalty: float = 10.0
    convergence_window: int = 50
    convergence_tol: float = 1e-4
    kappa_init_scale: float = 0.01
    filter_infeasible: bool = True
    probe_success: float = 0.1
    flag_threshold: float = 0.9
    seed: int = 0

    def validate(self):
        for key in [
            "n_directions",
            "top_b",
            "train_steps",
            "eval_rollouts_train",
            "reward_rollouts",
            "decay_patience",
            "convergence_window",
        ]:
            if getattr(self, key) < 1:
                _fail(f"Config value 'ars.{key}' must be >= 1.")
        if self.max_iters < 0:
            _fail("Config value 'ars.max_iters' must be >= 0.")
        if not 1 <= self.top_b <= self.n_directions:
            _fail("Config value 'ars.top_b' must be between 1 and 'ars.n_directions'.")
        if not 0 < self.alpha_min <= self.alpha:
            _fail("Config values must satisfy 0 < 'ars.alpha_min' <= 'ars.alpha'.")
        for key in ["delta_scale", "softmin_tau"]:
            if getattr(self, key) <= 0:
                _fail(f"Config value 'ars.{key}' must be > 0.")
        if self.safety_penalty < 0 or self.kappa_init_scale < 0:
            _fail("Config values 'ars.safety_penalty' and 'ars.kappa_init_scale' must be >= 0.")

    def __post_init__(self):
        self.validate()


@dataclass
class ExperimentConfig:
    benchmark: str
    train: list[int] | None = None
    train_size: int | None = None
    degree: int = 1
    template: str = "polynomial"
    modes: list[str] = field(default_factory=lambda: ["genrl"])
    success_threshold: float = 0.9
    test_rollouts: int = 1000
    test_steps: int = 60
    seeds: list[int] = field(default_factory=lambda: [0])
    output_dir: str = "runs"
    feature_mode: str = "index"
    n_particles: int = 100
    hidden_dims: list[int] = field(default_factory=lambda: [32, 32])
    unseen_failure_limit: int = 5
    unseen_cap: int | None = None
    max_unseen_probes: int = 100
    trajectories_per_instance: int = 3
    reach_epsilon: float = 0.3
    ars: ArsConfig = field(default_factory=ArsConfig)

    def validate(self):
        if self.benchmark is None or self.benchmark == "":
            _fail("Config value 'experiment.benchmark' must not be empty.")
        if self.train is None:
            if self.train_size is None or self.train_size < 1:
                _fail("Config must give 'experiment.train' or a positive 'train_size'.")
            self.train = list(range(self.train_size))
        self.train = sorted(set(self.train))
        if len(self.train) == 0 or 0 not in self.train:
            _fail("Config value 'experiment.train' must be non-empty and contain 0.")
        if any(i < 0 for i in self.train):
            _fail("Config value 'experiment.train' must hold non-negative indices.")
        if self.degree < 0:
            _fail("Config value 'experiment.degree' must be >= 0.")
        if self.template not in TEMPLATES:
            _fail(f"Config value 'experiment.template' must be one of {TEMPLATES}.")
        if len(self.modes) == 0 or any(m not in MODES for m in self.modes):
            _fail(f"Config value 'experiment.modes' must hold values from {MODES}.")
        if not 0 < self.success_threshold <= 1:
            _fail("Config value 'experiment.success_threshold' must be in (0, 1].")
        if self.feature_mode not in FEATURE_MODES:
            _fail(f"Config value 'experiment.feature_mode' must be one of {FEATURE_MODES}.")
        if len(self.hidden_dims) != 2 or any(d < 1 for d in self.hidden_dims):
            _fail("Config value 'experiment.hidden_dims' must be two positive widths.")
        for key in [
            "test_rollouts",
            "test_steps",
            "n_particles",
            "unseen_failure_limit",
            "max_unseen_probes",
        ]:
            if getattr(self, key) < 1:
                _fail(f"Config value 'experiment.{key}' must be >= 1.")
        if len(self.seeds) == 0:
            _fail("Config value 'experiment.seeds' must not be empty.")
        if self.reach_epsilon <= 0:
            _fail("Config value 'experiment.reach_epsilon' must be > 0.")

    def __post_init__(self):
        if isinstance(self.ars, dict):
            self.ars = ArsConfig(**self.ars)
        self.validate()

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class Config:
    experiment: ExperimentConfig


def objectify_config(config_data: dict) -> Config:
    """
    Convert a config dict into objects to validate the data.
    """
    if "experiment" not in config_data:
        _fail("Config section 'experiment' is missing.")
    try:
        ars = ArsConfig(**config_data.get("ars", {}))
        experiment = ExperimentConfig(**config_data["experiment"], ars=ars)
    except TypeError as err:
        cfg_err = ConfigError(f"Unexpected or missing config key. {err!s}")
        log.error(cfg_err, exc_info=True)
        raise cfg_err from err
    return Config(experiment=experiment)


def get_path(path: str | None, env_key: str) -> Path:
    """
    Get a path from the path argument, the environment key, or the default.
    """
    if path is not None:
        return Path(path)
    env_file_path = os.environ.get(env_key)
    if env_file_path is not None:
        return Path(env_file_path)
    return defaults[env_key]


def get_config_path(config_path: str | None = None) -> Path:
    return get_path(path=config_path, env_key="GENRL_CONFIG_FILE")


def read_toml(path: Path) -> dict:
    """
    Read a toml file.
    """
    try:
        with open(path) as f:
            return toml.load(f)
    except (FileNotFoundError, PermissionError, toml.TomlDecodeError) as err:
        cfg_err = ConfigError(f"Could not read file at: {path}. {err!r}.")
        log.error(cfg_err, exc_info=True)
        raise cfg_err from err


def read_config(config_path: str | None = None) -> Config:
    """
    Read the config file.
    """
    file_path = get_config_path(config_path=config_path)
    file_data = read_toml(path=file_path)
    return objectify_config(config_data=file_data)


def write_config(config: Config, path: Path) -> None:
    """
    Write a config back to toml, e.g. next to a run's artefacts.
    """
    data = {"experiment": config.experiment.to_dict()}
    data["ars"] = data["experiment"].pop("ars")
    data["experiment"] = {k: v for k, v in data["experiment"].items() if v is not None}
    with open(path, "w") as outfile:
        toml.dump(data, outfile)
