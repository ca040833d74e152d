from pathlib import Path

from genrl._utils import config

from tests.resources import (
    configs_data,  # noqa: F401
    specs_data,  # noqa: F401
)

RESOURCES = Path.absolute(Path(__file__)).parent

CONFIG_FILE = RESOURCES / ".genrl_config.toml"
CONFIG_DATA = config.read_config(config_path=CONFIG_FILE.as_posix())

SMOKE_CONFIG_FILE = RESOURCES / "smoke_config.toml"
