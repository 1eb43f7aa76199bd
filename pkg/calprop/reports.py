import os
import json
import logging
from typing import Optional
import numpy as np
import pandas as pd
from . import __version__
from .metrics import brier, ece, histogram, log_loss, reliability_frame


LOGGER = logging.getLogger("calprop.reports")
LOGGER.setLevel(logging.INFO)
PROPENSITY_HISTOGRAM_BINS = 100


def _plain(value):
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (list, tuple)):
        return [_plain(item) for item in value]
    if isinstance(value, dict):
        return {key: _plain(item) for key, item in value.items()}
    return value


def provenance(command: str, config: dict, seed) -> dict:
    """
    The provenance record of a run: the command, its resolved
    configuration, the seed and the package version.
    """

    return {"command": command, "config": _plain(config), "seed": _plain(seed), "version": __version__}


def write_json(document: dict, path):
    with open(path, 'w') as f:
        json.dump(_plain(document), f, indent=2, sort_keys=True)
        f.write("\n")
    LOGGER.info(f"Wrote {path}")


def write_table(frame: pd.DataFrame, path):
    """
    Writes a table as CSV with 17 significant digits, so identical inputs
    give identical bytes.
    """

    frame.to_csv(path, index=False, float_format="%.17g", lineterminator="\n")
    LOGGER.info(f"Wrote {path}")


def output_path(out_dir: str, name: str) -> str:
    os.makedirs(out_dir, exist_ok=True)
    return os.path.join(out_dir, name)


def reliability_table(labels, plain, recalibrated: Optional[np.ndarray] = None, bins: int = 10) -> pd.DataFrame:
    """
    Reliability bins of the plain propensities and, when given, of the
    recalibrated ones, stacked with a `model` column.
    :param labels: The treatments.
    :param plain: The base model propensities.
    :param recalibrated: The recalibrated propensities.
    :param bins: The number of equal-width bins.
    :return: The table (model, bin_lo, bin_hi, count, mean_pred, mean_obs).
    """

    frames = []
    for name, values in (("plain", plain), ("recalibrated", recalibrated)):
        if values is None:
            continue
        frame = reliability_frame(ece(values, labels, bins))
        frame.insert(0, "model", name)
        frames.append(frame)
    return pd.concat(frames, ignore_index=True)


def propensity_histograms(plain, recalibrated: Optional[np.ndarray] = None,
                          bins: int = PROPENSITY_HISTOGRAM_BINS) -> pd.DataFrame:
    """
    Histograms of propensities over [0, 1], stacked with a `model` column.
    """

    frames = []
    for name, values in (("plain", plain), ("recalibrated", recalibrated)):
        if values is None:
            continue
        frame = histogram(values, bins)
        frame.insert(0, "model", name)
        frames.append(frame)
    return pd.concat(frames, ignore_index=True)


def effect_histogram(terms, bins: int = 50) -> pd.DataFrame:
    """
    Histogram of per-row effect terms over their observed range.
    """

    terms = np.asarray(terms, dtype=float)
    lower, upper = float(terms.min()), float(terms.max())
    if lower == upper:
        lower, upper = lower - 0.5, upper + 0.5
    return histogram(terms, bins, lower, upper)


def calibration_summary(labels, plain, recalibrated: Optional[np.ndarray] = None, bins: int = 10) -> dict:
    """
    Proper scores of the plain and recalibrated propensities against the
    treatments: ECE, log-loss and Brier score per model.
    """

    summary = {}
    for name, values in (("plain", plain), ("recalibrated", recalibrated)):
        if values is None:
            continue
        summary[name] = {"ece": ece(values, labels, bins).ece, "log_loss": log_loss(values, labels),
                         "brier": brier(values, labels)}
    return summary
