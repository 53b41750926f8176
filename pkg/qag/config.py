"""
Run configuration: the YAML experiment matrix, user overrides and hashing.
"""

import copy
import hashlib
import json
import logging
from pathlib import Path
from typing import Any, Dict, Optional, Union

import yaml

from qag.errors import ConfigError

logger = logging.getLogger(__name__)

EXPERIMENTS_DIR = Path(__file__).resolve().parent.parent / "experiments"
DEFAULT_CONFIG_PATH = EXPERIMENTS_DIR / "config" / "experiment_matrix.yaml"
NOISE_DIR = EXPERIMENTS_DIR / "config" / "noise"


def load_config(config_path: Union[str, Path]) -> dict:
    """Load a YAML or JSON configuration file."""
    config_path = Path(config_path)
    if not config_path.exists():
        raise ConfigError(f"config file not found: {config_path}")
    try:
        with open(config_path) as f:
            config = yaml.safe_load(f)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{config_path}: cannot parse ({exc})") from exc
    if config is None:
        return {}
    if not isinstance(config, dict):
        raise ConfigError(f"{config_path}: top level must be a mapping")
    return config


def deep_merge(base: dict, override: dict) -> dict:
    """Recursively merge ``override`` into a copy of ``base``."""
    merged = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = deep_merge(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def load_run_config(path: Optional[Union[str, Path]] = None) -> dict:
    """Defaults from the experiment matrix, overlaid with ``path`` if given."""
    config = load_config(DEFAULT_CONFIG_PATH)
    if path is not None:
        config = deep_merge(config, load_config(path))
        logger.info("Merged run config from %s", path)
    return config


def set_path(config: dict, dotted: str, value: Any) -> None:
    """Set ``config['a']['b'] = value`` for ``dotted = 'a.b'``; None is ignored."""
    if value is None:
        return
    node = config
    *parents, leaf = dotted.split(".")
    for key in parents:
        node = node.setdefault(key, {})
    node[leaf] = value


def section(config: dict, name: str) -> Dict[str, Any]:
    value = config.get(name) or {}
    if not isinstance(value, dict):
        raise ConfigError(f"config section '{name}' must be a mapping")
    return value


def config_hash(config: dict) -> str:
    payload = json.dumps(config, sort_keys=True, default=str)
    return hashlib.sha256(payload.encode()).hexdigest()


def resolve_noise_path(entry: Union[str, Path]) -> Path:
    """Paths are tried as given, then relative to the shipped noise directory."""
    path = Path(entry)
    if path.exists():
        return path
    candidate = NOISE_DIR / path
    if candidate.exists():
        return candidate
    raise ConfigError(f"noise model file not found: {entry}")
