import os
import shutil
import tempfile
from contextlib import contextmanager
from pathlib import Path

from genrl._utils.config import ArsConfig, ExperimentConfig

from tests.resources import configs_data

SLOW_TESTS = os.environ.get("GENRL_SLOW_TESTS") == "1"


@contextmanager
def get_temp_dir() -> Path:
    temp_dir = tempfile.mkdtemp(prefix="genrl_tmp_")
    temp_path = Path(temp_dir)
    try:
        yield temp_path
    finally:
        if temp_path.exists():
            shutil.rmtree(temp_dir)


def tiny_experiment(ars: dict | None = None, **overrides) -> ExperimentConfig:
    """An experiment config small enough to train in a unit test."""
    data = {**configs_data.tiny_experiment, **overrides}
    return ExperimentConfig(**data, ars=ArsConfig(**{**configs_data.tiny_ars, **(ars or {})}))
