__all__ = [
    "ConfigError",
    "Configurable",
    "get_config",
    "load_config",
    "parse_power",
    "num_workers",
]

import logging
import os
import re
from abc import ABC
from pathlib import Path
from typing import Any, Optional, Sequence, Union

from fastcore.all import delegates, ifnone
from hydra import compose, initialize_config_module
from omegaconf import DictConfig, OmegaConf

_logger = logging.getLogger(__name__)

_POWER_RE = re.compile(r"^\s*([-+]?[0-9]*\.?[0-9]+(?:[eE][-+]?[0-9]+)?)\s*(dBm|dB|mW|W)?\s*$")


class ConfigError(ValueError):
    "Raised for malformed or inconsistent configuration"


class Configurable(ABC):
    """
    Helper Class to instantiate obj from config
    """

    @classmethod
    def from_config_dict(cls, config: Union[DictConfig, dict], **kwargs):
        """
        Instantiates object using `DictConfig-based` configuration. You can optionally
        pass in extra `kwargs` which take precedence over the config values.
        """
        if isinstance(config, DictConfig):
            config = OmegaConf.to_container(config, resolve=True)
        config = dict(ifnone(config, {}))
        config.update(kwargs)
        try:
            instance = cls(**config)
        except TypeError as e:
            raise ConfigError(f"Invalid config for {cls.__name__}: {e}") from e
        return instance

    def to_config_dict(self) -> DictConfig:
        """Returns object's configuration to config dictionary"""
        raise NotImplementedError


@delegates(compose)
def get_config(config_name="config", **kwargs) -> DictConfig:
    """
    Get a copy of the default config. `overrides` are hydra-style `key=value` strings.
    """
    with initialize_config_module("robeam.conf"):
        cfg = compose(config_name, **kwargs)
    return cfg.copy()


def load_config(name_or_path: Optional[str] = None, overrides: Sequence[str] = ()) -> DictConfig:
    """
    Load a config either from a preset name in `robeam/conf/scenario` or from
    a yaml file on disk. A file is merged over the default composition, so it
    may specify only the nodes it changes.
    """
    overrides = list(overrides)
    if name_or_path is None:
        return get_config(overrides=overrides)

    path = Path(name_or_path)
    if path.suffix in (".yaml", ".yml") or path.exists():
        if not path.exists():
            raise ConfigError(f"Config file {path} does not exist")
        base = get_config(overrides=overrides)
        OmegaConf.set_struct(base, False)
        user = OmegaConf.load(path)
        if "scenario" not in user and "experiment" not in user and "solver" not in user:
            # a bare scenario document
            user = OmegaConf.create({"scenario": user})
        return OmegaConf.merge(base, user)

    return get_config(overrides=[f"scenario={name_or_path}"] + overrides)


def parse_power(value: Any, name: str = "value") -> float:
    """
    Converts a power-like config value to linear units.

    Accepts plain numbers (already linear) and strings with one of the unit suffixes
    `dB` (10^(x/10)), `dBm` (10^((x-30)/10) Watt), `W` and `mW`.
    """
    if isinstance(value, bool):
        raise ConfigError(f"{name}: expected a number, got {value!r}")
    if isinstance(value, (int, float)):
        return float(value)
    if not isinstance(value, str):
        raise ConfigError(f"{name}: expected a number or a string with unit, got {value!r}")

    match = _POWER_RE.match(value)
    if match is None:
        raise ConfigError(f"{name}: cannot parse {value!r}, expected e.g. '10dB', '5dBm' or '0.1'")

    x, unit = float(match.group(1)), match.group(2)
    if unit is None or unit == "W":
        return x
    if unit == "mW":
        return x * 1e-3
    if unit == "dB":
        return 10.0 ** (x / 10.0)
    return 10.0 ** ((x - 30.0) / 10.0)


def num_workers(default: Optional[int] = None) -> int:
    "Size of the work pool; the `ROBEAM_NUM_WORKERS` env var takes precedence"
    env = os.environ.get("ROBEAM_NUM_WORKERS")
    if env is not None:
        try:
            n = int(env)
        except ValueError as e:
            raise ConfigError(f"ROBEAM_NUM_WORKERS must be an integer, got {env!r}") from e
        return max(n, 0)
    return ifnone(default, 0)
