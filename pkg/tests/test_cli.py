import io
import os
from contextlib import redirect_stderr, redirect_stdout
from unittest import TestCase
from unittest.mock import patch

from genrl import cli
from genrl._core.benchmarks import list_benchmarks
from genrl.errors import InvalidInputError

from tests import resources
from tests.utils.utils import get_temp_dir


def run_cli(*argv: str) -> tuple[int, str, str]:
    out, err = io.StringIO(), io.StringIO()
    with redirect_stdout(out), redirect_stderr(err):
        code = cli.main(["--log-level", "ERROR", *argv])
    return code, out.getvalue(), err.getvalue()


class TestParseIndices(TestCase):
    def test_parse_indices__ok(self):
        self.assertEqual([0, 1, 2, 3, 7], cli.parse_indices("0-3,7"))
        self.assertEqual([2, 5], cli.parse_indices(" 5, 2 ,5"))

    def test_parse_indices__error(self):
        for text in ("", "a-b", "3,x", ","):
            with self.subTest(text=text), self.assertRaises(InvalidInputError):
                cli.parse_indices(text)


class TestMain(TestCase):
    def test_list_benchmarks(self):
        code, out, _ = run_cli("list-benchmarks")
        self.assertEqual(cli.EXIT_OK, code)
        lines = out.splitlines()
        self.assertEqual(len(list_benchmarks()), len(lines))
        self.assertTrue(lines[0].startswith("reach_moving_init "))

    def test_run__config_error(self):
        """Should exit with 1 when the config file cannot be read."""
        code, out, err = run_cli("run", "--config", "/nonexistent/genrl.toml")
        self.assertEqual(cli.EXIT_CONFIG, code)
        self.assertEqual("", out)
        self.assertIn("configuration error", err)

    def test_eval__genrl_error(self):
        """Should exit with 2 for an unknown benchmark."""
        with get_temp_dir() as tmp:
            code, _, err = run_cli(
                "eval", "--generator", (tmp / "g.bin").as_posix(), "--benchmark", "nope"
            )
        self.assertEqual(cli.EXIT_TRAINING, code)
        self.assertIn("nope", err)

    def test_run_then_eval(self):
        """Should train from a config, then evaluate the stored generator."""
        with get_temp_dir() as tmp, patch.dict(os.environ, {"GENRL_THREADS": "1"}):
            code, out, _ = run_cli(
                "run", "--config", resources.SMOKE_CONFIG_FILE.as_posix(),
                "--mode", "genrl", "--output-dir", tmp.as_posix(),
            )
            self.assertEqual(cli.EXIT_OK, code)
            self.assertTrue(out.startswith("benchmark"))
            generator = tmp / "reach_moving_init" / "genrl" / "seed_0" / "generator.bin"
            self.assertTrue(generator.exists())

            code, out, _ = run_cli(
                "eval", "--generator", generator.as_posix(),
                "--benchmark", "reach_moving_init", "--instances", "0,2",
                "--rollouts", "4",
            )
        self.assertEqual(cli.EXIT_OK, code)
        lines = out.splitlines()
        self.assertEqual("instance  probability  passed", lines[0])
        self.assertEqual(["0", "2"], [line.split()[0] for line in lines[1:]])

    def test_version(self):
        with self.assertRaises(SystemExit) as err, redirect_stdout(io.StringIO()):
            cli.main(["--version"])
        self.assertEqual(0, err.exception.code)
