from genrl._services.benchmarks import BenchmarkService
from genrl._services.experiments import ExperimentService
from genrl._services.generators import GeneratorService
from genrl._utils.config import Config, read_config


class Client:
    """
    Entry point to genrl. Reads the experiment configuration and provides access to
    benchmarks, generator training and experiment runs.

    :param config_path: Where to read the genrl_config.toml. Defaults to the
        path in GENRL_CONFIG_FILE, then the user home directory.
    :param config: An already loaded config, used instead of reading one.
    """

    def __init__(
        self,
        config_path: str | None = None,
        config: Config | None = None,
    ) -> None:
        if config is None:
            config = read_config(config_path=config_path)
        self.config: Config = config
        experiment = self.config.experiment

        self.benchmarks: BenchmarkService = BenchmarkService(
            default_reach_epsilon=experiment.reach_epsilon
        )
        self.generators: GeneratorService = GeneratorService(config=experiment)
        self.experiments: ExperimentService = ExperimentService(
            config=experiment, benchmarks=self.benchmarks, generators=self.generators
        )

    def run(self, mode: str | None = None, seed: int | None = None):
        """
        Run the configured experiment.

        With neither `mode` nor `seed`, every configured mode and seed runs as a batch.
        """
        if mode is None and seed is None:
            return self.experiments.run_batch()
        experiment = self.config.experiment
        modes = [mode] if mode is not None else experiment.modes
        seeds = [seed] if seed is not None else experiment.seeds
        return self.experiments.run_batch(modes=modes, seeds=seeds)
