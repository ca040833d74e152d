import json
import logging
import time
from pathlib import Path

from genrl._core import bases
from genrl._core.evaluation import GeneratorSource, evaluate_unseen
from genrl._core.reports import (
    RunReport,
    build_manifest,
    build_report,
    summarize,
    summary_csv,
    summary_table,
    telemetry_csv,
    trajectories_csv,
)
from genrl._services.benchmarks import BenchmarkService
from genrl._services.generators import GeneratorService
from genrl._utils.config import Config, ExperimentConfig, write_config

log = logging.getLogger(__name__)


class Artifacts(bases.Model):
    class Config:
        frozen = True

    run_dir: str = "{benchmark}/{mode}/seed_{seed}"
    report: str = "report.json"
    manifest: str = "manifest.json"
    timings: str = "timings.json"
    generator: str = "generator.bin"
    trajectories: str = "trajectories.csv"
    telemetry: str = "telemetry/{name}.csv"
    config: str = "config.toml"
    summary_csv: str = "summary.csv"
    summary_txt: str = "summary.txt"


class ExperimentService(bases.Service):
    """
    Experiment runs are accessed through `client.experiments`. For example:

    ```python
    from genrl.client import Client

    client = Client()
    reports = client.experiments.run_batch()
    ```

    Each run writes its report, manifest, timings, generator, trajectories and
    training telemetry under `<output_dir>/<benchmark>/<mode>/seed_<seed>/`.
    """

    __slots__ = ("config", "benchmarks", "generators", "artifacts")

    def __init__(
        self,
        config: ExperimentConfig,
        benchmarks: BenchmarkService | None = None,
        generators: GeneratorService | None = None,
        artifacts: Artifacts | None = None,
    ):
        self.config: ExperimentConfig = config
        self.benchmarks: BenchmarkService = (
            benchmarks
            if benchmarks is not None
            else BenchmarkService(default_reach_epsilon=config.reach_epsilon)
        )
        self.generators: GeneratorService = (
            generators if generators is not None else GeneratorService(config=config)
        )
        self.artifacts: Artifacts = artifacts if artifacts is not None else Artifacts()

    def run_dir(self, mode: str, seed: int) -> Path:
        rel = self.artifacts.run_dir.format(benchmark=self.config.benchmark, mode=mode, seed=seed)
        return Path(self.config.output_dir) / rel

    def run(self, mode: str = "genrl", seed: int = 0) -> RunReport:
        """
        Train one generator, evaluate it on the training and unseen instances and write
        the run's artefacts.

        :param mode: One of `genrl`, `base1`, `base2`, `base3`.
        :param seed: Seed of every random stream in the run.
        """
        cfg = self.config
        task = self.benchmarks.get(cfg.benchmark)
        train = [task.check_index(i) for i in cfg.train]
        started = time.perf_counter()
        result = self.generators.train(task, mode=mode, seed=seed, train=train)
        timings = dict(result.timings)
        timings["train_total"] = time.perf_counter() - started

        started = time.perf_counter()
        train_estimates = self.generators.evaluate(result.generator, task, train, seed=seed)
        source = GeneratorSource(result.generator, steps_per_edge=cfg.test_steps)
        sweep = evaluate_unseen(source, task, max(train) + 1, cfg, seed=seed)
        timings["evaluation"] = time.perf_counter() - started

        report = build_report(
            benchmark=cfg.benchmark,
            mode=mode,
            seed=seed,
            degree=cfg.degree,
            template=cfg.template,
            train_estimates=train_estimates,
            sweep=sweep,
            result=result,
        )
        log.info(
            "%s %s seed %s: %s/%s train, %s unseen (%s).",
            cfg.benchmark,
            mode,
            seed,
            report.successful_train,
            len(train),
            report.successful_unseen,
            report.unseen_stop_reason,
        )

        out = self.run_dir(mode, seed)
        (out / Path(self.artifacts.telemetry).parent).mkdir(parents=True, exist_ok=True)
        (out / self.artifacts.report).write_text(report.model_dump_json(indent=2) + "\n")
        manifest = build_manifest(result)
        (out / self.artifacts.manifest).write_text(manifest.model_dump_json(indent=2) + "\n")
        (out / self.artifacts.timings).write_text(json.dumps(timings, indent=2) + "\n")
        self.generators.write(result.generator, out / self.artifacts.generator)
        tagged = [("train", e) for e in train_estimates] + [
            ("unseen", e) for e in sweep.estimates
        ]
        (out / self.artifacts.trajectories).write_text(trajectories_csv(tagged))
        for name, rows in sorted(result.telemetry.items()):
            path = out / self.artifacts.telemetry.format(name=name)
            path.write_text(telemetry_csv(rows))
        write_config(Config(experiment=cfg), out / self.artifacts.config)
        return report

    def run_batch(
        self, modes: list[str] | None = None, seeds: list[int] | None = None
    ) -> list[RunReport]:
        """
        Run every mode with every seed, then write the median summary table.

        :param modes: Defaults to the config's modes.
        :param seeds: Defaults to the config's seeds.
        """
        modes = modes if modes is not None else self.config.modes
        seeds = seeds if seeds is not None else self.config.seeds
        reports = [self.run(mode=m, seed=s) for m in modes for s in seeds]
        rows = summarize(reports)
        out = Path(self.config.output_dir) / self.config.benchmark
        out.mkdir(parents=True, exist_ok=True)
        (out / self.artifacts.summary_csv).write_text(summary_csv(rows))
        (out / self.artifacts.summary_txt).write_text(summary_table(rows))
        return reports
