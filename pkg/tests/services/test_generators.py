from unittest import TestCase

from genrl._core.benchmarks import get_benchmark
from genrl._core.serialization import dumps_generator
from genrl._services.generators import GeneratorService
from genrl.errors import GenRLError, InvalidInputError

from tests.utils.utils import get_temp_dir, tiny_experiment


class TestGeneratorService(TestCase):
    def setUp(self) -> None:
        self.config = tiny_experiment()
        self.service = GeneratorService(config=self.config)
        self.task = get_benchmark(self.config.benchmark)

    def test_train__write_read_evaluate(self):
        """Should store a trained generator and evaluate the restored copy the same."""
        result = self.service.train(self.task, mode="genrl", seed=1)
        with get_temp_dir() as tmp:
            path = self.service.write(result.generator, tmp / "generator.bin")
            restored = self.service.read(path.as_posix())
        self.assertEqual(dumps_generator(result.generator), dumps_generator(restored))
        a = self.service.evaluate(result.generator, self.task, [0, 3], seed=2)
        b = self.service.evaluate(restored, self.task, [0, 3], seed=2)
        self.assertEqual([0, 3], [e.index for e in a])
        self.assertEqual([e.probability for e in a], [e.probability for e in b])
        self.assertEqual(1, len(a[0].samples))

    def test_train__defaults_to_config_train(self):
        result = self.service.train(self.task, mode="base2")
        self.assertEqual({"0_1_base2"}, set(result.telemetry))

    def test_evaluate__rollout_override(self):
        result = self.service.train(self.task, mode="base1")
        est = self.service.evaluate(result.generator, self.task, [1], n_rollouts=4)[0]
        self.assertIn(est.probability, {0.0, 0.25, 0.5, 0.75, 1.0})

    def test_policy__path(self):
        result = self.service.train(self.task, mode="genrl")
        self.assertEqual([(0, 1)], list(self.service.policy(result.generator, self.task, 4).path))

    def test_train__error__bad_arguments(self):
        with self.assertRaises(InvalidInputError):
            self.service.train(self.task, mode="base4")
        with self.assertRaises(InvalidInputError):
            self.service.train(self.task, seed=-1)

    def test_read__error__missing_file(self):
        with get_temp_dir() as tmp, self.assertRaises(GenRLError):
            self.service.read(tmp / "nothing.bin")
