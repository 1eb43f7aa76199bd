from typing import List, NamedTuple
import numpy as np
import pandas as pd
from scipy.special import xlogy
from . import constants
from .exceptions import DomainError, InputError, ParameterError


class ReliabilityBin(NamedTuple):
    lower: float
    upper: float
    count: int
    mean_predicted: float
    mean_observed: float

    @property
    def gap(self) -> float:
        return abs(self.mean_observed - self.mean_predicted) if self.count else 0.0


class CalibrationReport(NamedTuple):
    """
    The expected calibration error plus the reliability bins it was
    computed from. Empty bins have NaN means and no weight.
    """

    ece: float
    bins: List[ReliabilityBin]
    bin_count: int

    @property
    def n(self) -> int:
        return sum(b.count for b in self.bins)


def _pair(probabilities, labels):
    probabilities = np.asarray(probabilities, dtype=float).ravel()
    labels = np.asarray(labels, dtype=float).ravel()
    if probabilities.shape != labels.shape:
        raise InputError(f"probabilities and labels differ in length: {probabilities.shape[0]} vs {labels.shape[0]}")
    if not np.all(np.isin(labels, (0.0, 1.0))):
        raise InputError("labels must be 0 or 1")
    return probabilities, labels


def bin_indices(probabilities: np.ndarray, bin_count: int) -> np.ndarray:
    """
    Assigns each probability to one of `bin_count` equal-width bins
    [i/M, (i+1)/M); the last bin is closed at 1.
    """

    return np.minimum(np.floor(probabilities * bin_count).astype(np.int64), bin_count - 1)


def ece(probabilities, labels, bin_count: int = constants.ECE_BINS) -> CalibrationReport:
    """
    Computes the expected calibration error: the count-weighted mean, over
    non-empty bins, of |mean label - mean probability|.
    :param probabilities: Predicted probabilities in [0, 1].
    :param labels: Observed labels, 0 or 1.
    :param bin_count: The number of equal-width bins.
    :return: The report.
    """

    if bin_count < 1:
        raise ParameterError(f"at least one bin is required, got {bin_count}")
    probabilities, labels = _pair(probabilities, labels)
    if probabilities.shape[0] == 0:
        raise InputError("cannot compute a calibration error over no predictions")
    if not np.all(np.isfinite(probabilities)) or np.any(probabilities < 0.0) or np.any(probabilities > 1.0):
        raise InputError("probabilities must lie in [0, 1]")

    indices = bin_indices(probabilities, bin_count)
    counts = np.bincount(indices, minlength=bin_count)
    predicted_sums = np.bincount(indices, weights=probabilities, minlength=bin_count)
    observed_sums = np.bincount(indices, weights=labels, minlength=bin_count)
    occupied = counts > 0
    predicted = np.full(bin_count, np.nan)
    observed = np.full(bin_count, np.nan)
    predicted[occupied] = predicted_sums[occupied] / counts[occupied]
    observed[occupied] = observed_sums[occupied] / counts[occupied]

    error = float(np.sum(counts[occupied] * np.abs(observed[occupied] - predicted[occupied])) / probabilities.shape[0])
    bins = [ReliabilityBin(index / bin_count, (index + 1) / bin_count, int(counts[index]), float(predicted[index]),
                           float(observed[index])) for index in range(bin_count)]
    return CalibrationReport(error, bins, bin_count)


def reliability_frame(report: CalibrationReport) -> pd.DataFrame:
    return pd.DataFrame({
        "bin_lo": [b.lower for b in report.bins],
        "bin_hi": [b.upper for b in report.bins],
        "count": [b.count for b in report.bins],
        "mean_pred": [b.mean_predicted for b in report.bins],
        "mean_obs": [b.mean_observed for b in report.bins],
    })


def log_loss(probabilities, labels) -> float:
    """
    Mean of -[t ln p + (1 - t) ln(1 - p)]. A probability of exactly 0 or 1
    is accepted only where it agrees with the label.
    """

    probabilities, labels = _pair(probabilities, labels)
    if np.any(probabilities < 0.0) or np.any(probabilities > 1.0):
        raise InputError("probabilities must lie in [0, 1]")
    losses = -(xlogy(labels, probabilities) + xlogy(1.0 - labels, 1.0 - probabilities))
    if not np.all(np.isfinite(losses)):
        raise DomainError("a probability of exactly 0 or 1 disagrees with its label")
    return float(np.mean(losses))


def brier(probabilities, labels) -> float:
    probabilities, labels = _pair(probabilities, labels)
    return float(np.mean((probabilities - labels) ** 2))


def chi_squared_loss(p_true, q_model) -> np.ndarray:
    """
    Elementwise (1 - p / q)^2 between true and modelled probabilities of
    the same event.
    :param p_true: True probabilities.
    :param q_model: Model probabilities, strictly inside (0, 1).
    :return: The per-element losses.
    """

    p_true = np.asarray(p_true, dtype=float)
    q_model = np.asarray(q_model, dtype=float)
    if p_true.shape != q_model.shape:
        raise InputError(f"shapes differ: {p_true.shape} vs {q_model.shape}")
    if np.any(q_model <= 0.0) or np.any(q_model >= 1.0):
        raise DomainError("model probabilities must lie strictly inside (0, 1)")
    return (1.0 - p_true / q_model) ** 2


def ate_error(estimate: float, truth: float) -> float:
    return abs(float(estimate) - float(truth))


def ate_error_l2(estimates, truths) -> float:
    """
    The Euclidean norm of the difference between estimated and true
    effect vectors.
    """

    estimates = np.asarray(estimates, dtype=float).ravel()
    truths = np.asarray(truths, dtype=float).ravel()
    if estimates.shape != truths.shape:
        raise InputError(f"effect vectors differ in length: {estimates.shape[0]} vs {truths.shape[0]}")
    return float(np.linalg.norm(estimates - truths))


def histogram(values, bin_count: int = 20, lower: float = 0.0, upper: float = 1.0) -> pd.DataFrame:
    """
    Counts values in equal-width bins over [lower, upper].
    """

    counts, edges = np.histogram(np.asarray(values, dtype=float), bins=bin_count, range=(lower, upper))
    return pd.DataFrame({"bin_lo": edges[:-1], "bin_hi": edges[1:], "count": counts})
