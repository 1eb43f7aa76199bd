import logging
from typing import NamedTuple, Optional, Tuple
import numpy as np
from scipy.special import expit
from .base import PropensityModel, Standardizer, clip_probabilities, fit_prior, is_single_class
from .optimize import minimize
from .. import constants
from ..exceptions import InputError, SizingError


LOGGER = logging.getLogger("calprop.models")
LOGGER.setLevel(logging.INFO)


class LogisticConfig(NamedTuple):
    """
    Training settings for logistic regression.
    """

    l2: float = constants.LOGISTIC_L2
    tolerance: float = constants.LOGISTIC_TOLERANCE
    max_iterations: int = constants.LOGISTIC_MAX_ITERATIONS
    learning_rate: float = 1.0


def logistic_loss_and_grad(params: np.ndarray, features: np.ndarray, labels: np.ndarray,
                           l2: float) -> Tuple[float, np.ndarray]:
    """
    Mean log-loss of sigmoid(features @ w + b) plus (l2 / 2) * |w|^2,
    where params = [w..., b]. The bias is not regularized.
    :return: The (loss, gradient) pair.
    """

    weights, bias = params[:-1], params[-1]
    scores = features @ weights + bias
    loss = np.mean(np.logaddexp(0.0, scores) - labels * scores) + 0.5 * l2 * float(weights @ weights)
    residual = expit(scores) - labels
    gradient = np.empty_like(params)
    gradient[:-1] = features.T @ residual / features.shape[0] + l2 * weights
    gradient[-1] = residual.mean()
    return float(loss), gradient


class LogisticModel(PropensityModel):
    """
    Q(T=1|x) = sigmoid(w . standardize(x) + b).
    """

    kind = "logistic"

    def __init__(self, weights, bias: float, standardizer: Optional[Standardizer] = None,
                 config: LogisticConfig = LogisticConfig()):
        weights = np.asarray(weights, dtype=float).ravel()
        super().__init__(weights.shape[0])
        self._weights = weights
        self._bias = float(bias)
        self._standardizer = standardizer or Standardizer.identity(weights.shape[0])
        self._config = config

    @property
    def weights(self) -> np.ndarray:
        """
        Weights in the standardized feature space.
        """

        return self._weights.copy()

    @property
    def bias(self) -> float:
        return self._bias

    @property
    def config(self) -> LogisticConfig:
        return self._config

    @property
    def coefficients(self) -> np.ndarray:
        """
        Weights on the raw (unstandardized) covariates.
        """

        return self._weights / self._standardizer.scale

    @property
    def intercept(self) -> float:
        """
        Bias on the raw (unstandardized) covariates.
        """

        return self._bias - float(np.sum(self._weights * self._standardizer.mean / self._standardizer.scale))

    def decision_function(self, covariates) -> np.ndarray:
        return self._standardizer.apply(self._as_matrix(covariates)) @ self._weights + self._bias

    def _predict(self, covariates: np.ndarray) -> np.ndarray:
        return clip_probabilities(expit(self._standardizer.apply(covariates) @ self._weights + self._bias))

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "weights": self._weights.tolist(),
            "bias": self._bias,
            "mean": self._standardizer.mean.tolist(),
            "scale": self._standardizer.scale.tolist(),
            "config": self._config._asdict(),
        }

    @classmethod
    def from_dict(cls, document: dict) -> 'LogisticModel':
        standardizer = Standardizer(np.asarray(document["mean"], dtype=float),
                                    np.asarray(document["scale"], dtype=float))
        return cls(document["weights"], document["bias"], standardizer, LogisticConfig(**document["config"]))


def fit_logistic(data, config: Optional[LogisticConfig] = None):
    """
    Fits an L2-regularized logistic regression of treatment on covariates.
    Features are standardized with the training statistics first.
    Single-class data yields a prior-only model.
    :param data: An ObservationalDataset.
    :param config: The training settings.
    :return: The fitted model.
    """

    config = config or LogisticConfig()
    covariates = np.asarray(data.covariates, dtype=float)
    labels = np.asarray(data.treatments, dtype=float)
    if covariates.shape[0] < 2:
        raise SizingError("logistic regression needs at least 2 rows")
    if not np.all(np.isfinite(covariates)):
        raise InputError("covariates contain NaN or infinite entries")
    if is_single_class(labels):
        LOGGER.warning("Single treatment class in training data; falling back to a prior-only model")
        return fit_prior(labels, covariates.shape[1])

    standardizer = Standardizer.fit(covariates)
    features = standardizer.apply(covariates)
    result = minimize(lambda params: logistic_loss_and_grad(params, features, labels, config.l2),
                      np.zeros(features.shape[1] + 1), learning_rate=config.learning_rate,
                      tolerance=config.tolerance, max_iterations=config.max_iterations)
    if not result.converged:
        LOGGER.warning(f"Logistic regression stopped after {result.iterations} iterations without converging")
    else:
        LOGGER.debug(f"Logistic regression converged after {result.iterations} iterations")
    return LogisticModel(result.params[:-1], result.params[-1], standardizer, config)
