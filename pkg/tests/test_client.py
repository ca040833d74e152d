import json
import os
from unittest import TestCase
from unittest.mock import patch

from genrl.client import Client

from tests import resources
from tests.utils.utils import get_temp_dir


class TestClient(TestCase):
    def test_client__ok__from_env(self):
        """Should read the config named by GENRL_CONFIG_FILE."""
        cf = {"GENRL_CONFIG_FILE": resources.CONFIG_FILE.as_posix()}
        with patch.dict(os.environ, cf, clear=True):
            client = Client()
        self.assertEqual("reach_moving_init", client.config.experiment.benchmark)
        self.assertEqual(0.3, client.benchmarks.default_reach_epsilon)
        self.assertIs(client.config.experiment, client.generators.config)
        self.assertIs(client.benchmarks, client.experiments.benchmarks)
        self.assertIs(client.generators, client.experiments.generators)

    def test_client__ok__config_object(self):
        client = Client(config=resources.CONFIG_DATA)
        self.assertIs(resources.CONFIG_DATA, client.config)

    def test_run__one_mode_and_seed(self):
        """Should run only the requested mode and seed and write the summary."""
        client = Client(config_path=resources.SMOKE_CONFIG_FILE.as_posix())
        with get_temp_dir() as tmp:
            client.config.experiment.output_dir = tmp.as_posix()
            reports = client.run(mode="base1", seed=0)
            self.assertEqual(1, len(reports))
            self.assertEqual("base1", reports[0].mode)
            out = tmp / "reach_moving_init"
            self.assertTrue((out / "base1" / "seed_0" / "report.json").exists())
            self.assertTrue((out / "summary.csv").exists())
            report = json.loads((out / "base1" / "seed_0" / "report.json").read_text())
            self.assertEqual(0, report["seed"])
