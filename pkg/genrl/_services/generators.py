import logging
from collections.abc import Iterable
from pathlib import Path

from genrl._core import bases
from genrl._core.evaluation import GeneratorSource, SuccessEstimate, estimate_success
from genrl._core.generator import TrainingResult, run_genrl, train_baseline
from genrl._core.policy import PathPolicy, PolicyGenerator, generate_policy
from genrl._core.serialization import read_generator, write_generator
from genrl._core.tasks import InductiveTask
from genrl._utils import validators as gv
from genrl._utils.config import MODES, ExperimentConfig
from genrl.errors import GenRLError, InvalidInputError

log = logging.getLogger(__name__)


class GeneratorService(bases.Service):
    """
    Training, storing and evaluating policy generators, through `client.generators`.

    ```python
    from genrl.client import Client

    client = Client()
    result = client.generators.train(task, mode="genrl", seed=0)
    client.generators.write(result.generator, "generator.bin")
    ```
    """

    __slots__ = ("config",)

    def __init__(self, config: ExperimentConfig):
        self.config: ExperimentConfig = config

    def train(
        self,
        task: InductiveTask,
        mode: str = "genrl",
        seed: int = 0,
        train: Iterable[int] | None = None,
    ) -> TrainingResult:
        """
        Learn a generator (or a baseline) for `task`.

        :param mode: One of `genrl`, `base1`, `base2`, `base3`.
        :param train: Training instances; defaults to the config's.
        """
        try:
            if mode not in MODES:
                raise InvalidInputError(f"mode: must be one of {MODES}, got '{mode}'.")
            seed = gv.validate_int(seed, key="seed", minimum=0)
        except GenRLError as err:
            log.error(err, exc_info=True)
            raise
        indices = list(train) if train is not None else self.config.train
        log.info("Training %s on %s with instances %s, seed %s.", mode, task.name, indices, seed)
        if mode == "genrl":
            return run_genrl(task, self.config.degree, indices, self.config, seed)
        return train_baseline(mode, task, indices, self.config, seed)

    def policy(self, generator: PolicyGenerator, task: InductiveTask, i: int) -> PathPolicy:
        return generate_policy(generator, task, i)

    def evaluate(
        self,
        generator: PolicyGenerator,
        task: InductiveTask,
        indices: Iterable[int],
        seed: int = 0,
        n_rollouts: int | None = None,
    ) -> list[SuccessEstimate]:
        """
        Estimate the success of the generated policy on each instance.

        :param n_rollouts: Rollouts per instance; defaults to the config's test rollouts.
        """
        source = GeneratorSource(generator, steps_per_edge=self.config.test_steps)
        n = n_rollouts if n_rollouts is not None else self.config.test_rollouts
        return [
            estimate_success(
                source,
                task,
                i,
                n,
                self.config.success_threshold,
                seed=seed,
                keep=self.config.trajectories_per_instance,
            )
            for i in indices
        ]

    def write(self, generator: PolicyGenerator, path: Path | str) -> Path:
        return write_generator(generator, Path(path))

    def read(self, path: Path | str) -> PolicyGenerator:
        path = gv.validate_file_path(path)
        return read_generator(path)
