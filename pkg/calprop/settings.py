import os
import json
import logging
from typing import Optional
from . import constants
from .exceptions import ConfigError


LOGGER = logging.getLogger("calprop.settings")
LOGGER.setLevel(logging.INFO)
SETTINGS_ENV = "CALPROP_SETTINGS"
SETTINGS_PATH = "~/.config/calprop/settings.json"

DEFAULTS = {
    "clamp_eps": constants.CLAMP_EPS,
    "ece_bins": constants.ECE_BINS,
    "folds": constants.FOLDS,
    "gwas_folds": constants.GWAS_FOLDS,
    "logistic": {
        "l2": constants.LOGISTIC_L2,
        "tolerance": constants.LOGISTIC_TOLERANCE,
        "max_iterations": constants.LOGISTIC_MAX_ITERATIONS,
        "learning_rate": 1.0,
    },
    "nb": {
        "var_smoothing": constants.NB_VAR_SMOOTHING,
    },
    "mlp": {
        "hidden": constants.MLP_HIDDEN,
        "epochs": constants.MLP_EPOCHS,
        "batch_size": constants.MLP_BATCH_SIZE,
        "learning_rate": constants.MLP_LEARNING_RATE,
        "l2": constants.LOGISTIC_L2,
    },
    "pca": {
        "components": constants.PCA_COMPONENTS,
        "tolerance": constants.PCA_TOLERANCE,
        "max_sweeps": constants.PCA_MAX_SWEEPS,
    },
    "threads": 1,
}


def _resolve(path: Optional[str]) -> str:
    return os.path.expanduser(path or os.environ.get(SETTINGS_ENV) or SETTINGS_PATH)


def _merge(base: dict, override: dict) -> dict:
    merged = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def load(path: Optional[str] = None) -> dict:
    """
    Loads the current settings, merged over the defaults.
    :param path: The settings document. By default, the path in the
      CALPROP_SETTINGS variable or the per-user settings file.
    :returns: The settings.
    """

    resolved = _resolve(path)
    try:
        with open(resolved, 'r') as f:
            stored = json.load(f)
    except FileNotFoundError:
        return _merge(DEFAULTS, {})
    except (OSError, ValueError) as e:
        raise ConfigError(f"unreadable settings document {resolved}: {e}")
    if not isinstance(stored, dict):
        raise ConfigError(f"settings document {resolved} must hold a JSON object")
    LOGGER.info(f"Settings loaded from {resolved}")
    return _merge(DEFAULTS, stored)


def save(settings: dict, path: Optional[str] = None):
    """
    Saves the settings.
    :param settings: The settings to save.
    :param path: Where to save them (same resolution as `load`).
    """

    resolved = _resolve(path)
    os.makedirs(os.path.dirname(resolved) or ".", 0o700, exist_ok=True)
    with open(resolved, 'w') as f:
        json.dump(settings, f, indent=2, sort_keys=True)


def section(settings: Optional[dict], name: str) -> dict:
    """
    Gets a settings section, falling back to the defaults.
    :param settings: The loaded settings, or None for the defaults.
    :param name: The section name (e.g. "logistic").
    :return: The section, as a fresh dict.
    """

    return dict(_merge(DEFAULTS, settings or {})[name])


def value(settings: Optional[dict], name: str):
    """
    Gets a top-level setting, falling back to the defaults.
    """

    return (settings or {}).get(name, DEFAULTS[name])
