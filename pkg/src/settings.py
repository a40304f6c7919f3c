#!/usr/bin/env python3
"""
Settings
Loads config.yaml defaults and hands out seeded random substreams
"""

import copy
import logging
import os
import zlib
from pathlib import Path
from typing import Any, Dict, Optional, Union

import numpy as np
import yaml

from src.errors import ConfigurationError

logger = logging.getLogger(__name__)

DEFAULT_CONFIG_PATH = Path(__file__).resolve().parent.parent / "config.yaml"
OUTPUT_DIR_ENV = "LFRE_OUTPUT_DIR"

DEFAULTS: Dict[str, Dict[str, Any]] = {
    'limits': {
        'bruteforce_max_nodes': 20,
        'tsra_max_nodes': 16,
        'csra_max_nodes': 12,
    },
    'simulation': {
        'horizon': 300,
        'threshold': 1e-6,
        'divergence_limit': 1e12,
        'observer_pole': 0.0,
        'float_digits': 17,
    },
    'validation': {
        'medag_trials': 50,
        'sampling_attempts': 200,
    },
    'output': {
        'directory': 'output',
    },
}

_cached: Optional[Dict[str, Dict[str, Any]]] = None


def load_config(config_path: Union[str, Path, None] = None) -> Dict[str, Dict[str, Any]]:
    """Load configuration, layering the YAML file over built-in defaults"""
    config = copy.deepcopy(DEFAULTS)
    path = Path(config_path) if config_path else DEFAULT_CONFIG_PATH

    if path.exists():
        with open(path, 'r') as f:
            loaded = yaml.safe_load(f) or {}
        for section, values in loaded.items():
            if isinstance(values, dict):
                config.setdefault(section, {}).update(values)
        logger.debug("[CONFIG] loaded %s", path)
    elif config_path:
        logger.warning("[CONFIG] %s not found, using defaults", path)

    return _coerce_numbers(config, path)


def _coerce_numbers(config: Dict[str, Dict[str, Any]], path: Path) -> Dict[str, Dict[str, Any]]:
    """
    Give every key the numeric type of its default. YAML 1.1 reads an
    unsigned exponent such as 1.0e12 as a string.
    """
    for section, defaults in DEFAULTS.items():
        for key, default in defaults.items():
            value = config[section].get(key)
            if isinstance(default, bool) or not isinstance(default, (int, float)):
                continue
            kind = type(default)
            try:
                coerced = kind(float(value)) if kind is int else float(value)
            except (TypeError, ValueError, OverflowError):
                raise ConfigurationError(f"{path}: {section}.{key} must be a number, got {value!r}")
            if kind is int and coerced != float(value):
                raise ConfigurationError(f"{path}: {section}.{key} must be an integer, got {value!r}")
            config[section][key] = coerced
    return config


def get_config() -> Dict[str, Dict[str, Any]]:
    """Process-wide configuration, loaded once from the default path"""
    global _cached
    if _cached is None:
        _cached = load_config()
    return _cached


def setting(section: str, key: str) -> Any:
    return get_config()[section][key]


def output_directory(config: Optional[Dict[str, Dict[str, Any]]] = None) -> Path:
    """Default output directory; the environment variable wins"""
    env_dir = os.getenv(OUTPUT_DIR_ENV)
    if env_dir:
        return Path(env_dir)
    config = config or get_config()
    return Path(config['output']['directory'])


def stream_key(name: str) -> int:
    return zlib.crc32(name.encode('utf-8'))


def substream(seed: int, name: str, *counters: int) -> np.random.Generator:
    """
    Independent generator addressed by (root seed, stream name, counters).

    Streams never share state, so adding a consumer leaves every other
    stream untouched.
    """
    entropy = [int(seed) & 0xFFFFFFFF, stream_key(name)] + [int(c) & 0xFFFFFFFF for c in counters]
    return np.random.default_rng(np.random.SeedSequence(entropy))


def use_config(config_path: Union[str, Path]) -> Dict[str, Dict[str, Any]]:
    """Replace the process-wide configuration with one loaded from config_path"""
    global _cached
    _cached = load_config(config_path)
    return _cached
