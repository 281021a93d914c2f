"""
Defaults, JSON run configuration and logging setup.
"""

import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, Optional

from errors import ConfigurationError


ARTIFACT_VERSION = "1.0.0"

# Root finding for θ*(n)
ROOT_TOL = 1e-10
THETA_CAP = 1e6
ROOT_MAX_ITER = 200
ZERO_PROBE = 1e-8

# Legendre transform
SUP_THETA_CAP = 1e3
SUP_XATOL = 1e-10

# Spectral radius
POWER_SQUARINGS = 64
POWER_RTOL = 1e-15

# Two-state rate function
J_SCAN_POINTS = 512
J_REFINE_WIDTH = 1e-12

# Monte Carlo
DEFAULT_REPLICAS = 10_000
DEFAULT_WORKERS = 1

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def setup_logging(level: str = "WARNING") -> None:
    """Send package logs to stderr; stdout is reserved for CSV output."""
    numeric = logging.getLevelName(str(level).upper())
    if not isinstance(numeric, int):
        raise ConfigurationError(f"Unknown log level: {level}")
    root = logging.getLogger()
    for handler in list(root.handlers):
        root.removeHandler(handler)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    root.addHandler(handler)
    root.setLevel(numeric)


def load_config_file(path: Optional[str]) -> Dict[str, Any]:
    """Load a JSON object of options; keys are normalized with normalize_option_keys."""
    if not path:
        return {}
    config_file = Path(path)
    if not config_file.exists():
        raise ConfigurationError(f"Config file {path} not found")
    try:
        with open(config_file, 'r', encoding='utf-8') as f:
            data = json.load(f)
    except (json.JSONDecodeError, IOError) as e:
        raise ConfigurationError(f"Error reading config file {path}: {e}")
    if not isinstance(data, dict):
        raise ConfigurationError(f"Config file {path} must hold a JSON object")
    return normalize_option_keys(data)


def normalize_option_keys(options: Dict[str, Any]) -> Dict[str, Any]:
    """Option names as argparse stores them (n-max -> n_max)."""
    return {str(k).replace("-", "_"): v for k, v in options.items()}


def merge_options(flags: Dict[str, Any], file_options: Dict[str, Any],
                  defaults: Dict[str, Any]) -> Dict[str, Any]:
    """Resolve options: flags win over the config file, which wins over defaults."""
    merged = dict(defaults)
    merged.update({k: v for k, v in file_options.items() if v is not None})
    merged.update({k: v for k, v in flags.items() if v is not None})
    return merged
