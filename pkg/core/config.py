"""
GRANULA - Configuration Loader

Application defaults live in config.yaml at the repository root.
Experiment configs may be JSON or YAML; yaml.safe_load reads both.
"""

import copy
import logging
import os
from typing import Any, Dict, Optional

import yaml

from core.errors import UsageError

logger = logging.getLogger("granula.core.config")

DEFAULT_CONFIG_PATH = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "config.yaml")


def load_mapping(path: str) -> Dict[str, Any]:
    """Read a JSON or YAML file that must contain a mapping."""
    if not os.path.exists(path):
        raise UsageError(f"Config file not found: {path}")
    with open(path, "r", encoding="utf-8") as f:
        try:
            data = yaml.safe_load(f) or {}
        except yaml.YAMLError as e:
            raise UsageError(f"Config file {path} is not valid JSON/YAML: {e}")
    if not isinstance(data, dict):
        raise UsageError(f"Config file {path} must contain a mapping, got {type(data).__name__}")
    return data


def load_config(path: Optional[str] = None) -> Dict[str, Any]:
    """Load application defaults from config.yaml; a missing default file yields {}."""
    config_path = path or DEFAULT_CONFIG_PATH
    if path is None and not os.path.exists(config_path):
        logger.warning(f"Default config not found at {config_path}; using built-in defaults.")
        return {}
    return load_mapping(config_path)


def section(config: Dict[str, Any], name: str) -> Dict[str, Any]:
    return copy.deepcopy(config.get(name) or {})


def merge(base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
    """Recursive dict merge; override wins, None values in override are ignored."""
    merged = copy.deepcopy(base)
    for key, value in override.items():
        if value is None:
            continue
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = merge(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged
