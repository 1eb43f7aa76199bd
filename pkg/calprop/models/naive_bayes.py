from typing import NamedTuple, Optional
import numpy as np
from scipy.special import expit
from scipy.stats import norm
from .base import PropensityModel, clip_probabilities, fit_prior, is_single_class
from .. import constants
from ..exceptions import SizingError

# Log-odds limit matching the probability floor.
_LOG_ODDS_LIMIT = float(np.log((1.0 - constants.PROBABILITY_FLOOR) / constants.PROBABILITY_FLOOR))


class NaiveBayesConfig(NamedTuple):
    var_smoothing: float = constants.NB_VAR_SMOOTHING


class GaussianNaiveBayesModel(PropensityModel):
    """
    Class priors and per-class, per-feature Gaussian likelihoods. Row 0
    of `means`/`variances` is the control class, row 1 the treated class.
    """

    kind = "nb"

    def __init__(self, priors, means, variances, variance_floor: float):
        means = np.asarray(means, dtype=float)
        super().__init__(means.shape[1])
        self._priors = np.asarray(priors, dtype=float)
        self._means = means
        self._variances = np.asarray(variances, dtype=float)
        self._variance_floor = float(variance_floor)

    @property
    def priors(self) -> np.ndarray:
        return self._priors.copy()

    @property
    def means(self) -> np.ndarray:
        return self._means.copy()

    @property
    def variances(self) -> np.ndarray:
        return self._variances.copy()

    @property
    def variance_floor(self) -> float:
        return self._variance_floor

    def log_joint(self, covariates) -> np.ndarray:
        """
        log P(T=c) + sum_j log N(x_j; mean_cj, var_cj), as an n x 2 matrix.
        """

        covariates = self._as_matrix(covariates)
        columns = [
            np.log(self._priors[c]) + norm.logpdf(covariates, self._means[c], np.sqrt(self._variances[c])).sum(axis=1)
            for c in (0, 1)
        ]
        return np.column_stack(columns)

    def _predict(self, covariates: np.ndarray) -> np.ndarray:
        joint = self.log_joint(covariates)
        log_odds = np.clip(joint[:, 1] - joint[:, 0], -_LOG_ODDS_LIMIT, _LOG_ODDS_LIMIT)
        return clip_probabilities(expit(log_odds))

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "priors": self._priors.tolist(),
            "means": self._means.tolist(),
            "variances": self._variances.tolist(),
            "variance_floor": self._variance_floor,
        }

    @classmethod
    def from_dict(cls, document: dict) -> 'GaussianNaiveBayesModel':
        return cls(document["priors"], document["means"], document["variances"], document["variance_floor"])


def fit_naive_bayes(data, config: Optional[NaiveBayesConfig] = None):
    """
    Fits Gaussian naive Bayes on raw covariates. Variances are the per-class
    sample variances, floored at var_smoothing times the largest feature
    variance.
    :param data: An ObservationalDataset.
    :param config: The training settings.
    :return: The fitted model (a prior-only model for single-class data).
    """

    config = config or NaiveBayesConfig()
    covariates = np.asarray(data.covariates, dtype=float)
    labels = np.asarray(data.treatments)
    if covariates.shape[0] < 2:
        raise SizingError("naive Bayes needs at least 2 rows")
    if is_single_class(labels):
        return fit_prior(labels, covariates.shape[1])

    largest = float(covariates.var(axis=0).max()) if covariates.shape[1] else 0.0
    floor = config.var_smoothing * largest if largest > 0 else config.var_smoothing
    priors, means, variances = [], [], []
    for c in (0, 1):
        rows = covariates[labels == c]
        priors.append(rows.shape[0] / covariates.shape[0])
        means.append(rows.mean(axis=0))
        variances.append(np.maximum(rows.var(axis=0), floor))
    return GaussianNaiveBayesModel(priors, np.vstack(means), np.vstack(variances), floor)
