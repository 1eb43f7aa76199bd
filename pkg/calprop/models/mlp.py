import logging
from typing import NamedTuple, Optional, Tuple
import numpy as np
from scipy.special import expit
from .base import PropensityModel, Standardizer, clip_probabilities, fit_prior, is_single_class
from .. import constants
from ..data import make_rng
from ..exceptions import InputError, OptimizationError, ParameterError, SizingError


LOGGER = logging.getLogger("calprop.models")
LOGGER.setLevel(logging.INFO)
_BETA1 = 0.9
_BETA2 = 0.999
_ADAM_EPS = 1e-8


class MlpConfig(NamedTuple):
    """
    Training settings for the single-hidden-layer network.
    """

    hidden: int = constants.MLP_HIDDEN
    epochs: int = constants.MLP_EPOCHS
    batch_size: int = constants.MLP_BATCH_SIZE
    learning_rate: float = constants.MLP_LEARNING_RATE
    l2: float = constants.LOGISTIC_L2
    seed: int = 0


class MlpParams(NamedTuple):
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: float


def pack(params: MlpParams) -> np.ndarray:
    return np.concatenate([params.w1.ravel(), params.b1, params.w2, [params.b2]])


def unpack(flat: np.ndarray, d: int, hidden: int) -> MlpParams:
    w1_end = d * hidden
    b1_end = w1_end + hidden
    w2_end = b1_end + hidden
    return MlpParams(flat[:w1_end].reshape(d, hidden), flat[w1_end:b1_end], flat[b1_end:w2_end], float(flat[w2_end]))


def mlp_loss_and_grad(flat: np.ndarray, features: np.ndarray, labels: np.ndarray, hidden: int,
                      l2: float) -> Tuple[float, np.ndarray]:
    """
    Mean log-loss of the tanh network plus (l2 / 2) times the squared
    weight norms (biases excluded), with its gradient.
    :param flat: The packed parameters.
    :return: The (loss, gradient) pair, the gradient packed like `flat`.
    """

    n, d = features.shape
    params = unpack(flat, d, hidden)
    activations = np.tanh(features @ params.w1 + params.b1)
    scores = activations @ params.w2 + params.b2
    loss = (np.mean(np.logaddexp(0.0, scores) - labels * scores)
            + 0.5 * l2 * (float(np.sum(params.w1 ** 2)) + float(params.w2 @ params.w2)))

    residual = (expit(scores) - labels) / n
    grad_w2 = activations.T @ residual + l2 * params.w2
    grad_b2 = residual.sum()
    delta = np.outer(residual, params.w2) * (1.0 - activations ** 2)
    grad_w1 = features.T @ delta + l2 * params.w1
    grad_b1 = delta.sum(axis=0)
    return float(loss), pack(MlpParams(grad_w1, grad_b1, grad_w2, float(grad_b2)))


class MlpModel(PropensityModel):
    """
    One tanh hidden layer and a sigmoid output over standardized covariates.
    """

    kind = "mlp"

    def __init__(self, params: MlpParams, standardizer: Standardizer, config: MlpConfig = MlpConfig()):
        super().__init__(params.w1.shape[0])
        self._params = params
        self._standardizer = standardizer
        self._config = config

    @property
    def params(self) -> MlpParams:
        return self._params

    @property
    def hidden(self) -> int:
        return self._params.w1.shape[1]

    def _predict(self, covariates: np.ndarray) -> np.ndarray:
        activations = np.tanh(self._standardizer.apply(covariates) @ self._params.w1 + self._params.b1)
        return clip_probabilities(expit(activations @ self._params.w2 + self._params.b2))

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "w1": self._params.w1.tolist(),
            "b1": self._params.b1.tolist(),
            "w2": self._params.w2.tolist(),
            "b2": self._params.b2,
            "mean": self._standardizer.mean.tolist(),
            "scale": self._standardizer.scale.tolist(),
            "config": self._config._asdict(),
        }

    @classmethod
    def from_dict(cls, document: dict) -> 'MlpModel':
        params = MlpParams(np.asarray(document["w1"], dtype=float).reshape(len(document["mean"]), len(document["b1"])),
                           np.asarray(document["b1"], dtype=float), np.asarray(document["w2"], dtype=float),
                           float(document["b2"]))
        standardizer = Standardizer(np.asarray(document["mean"], dtype=float),
                                    np.asarray(document["scale"], dtype=float))
        return cls(params, standardizer, MlpConfig(**document["config"]))


def init_params(d: int, hidden: int, rng: np.random.Generator) -> MlpParams:
    return MlpParams(rng.normal(0.0, 1.0 / np.sqrt(max(d, 1)), size=(d, hidden)), np.zeros(hidden),
                     rng.normal(0.0, 1.0 / np.sqrt(hidden), size=hidden), 0.0)


def fit_mlp(data, config: Optional[MlpConfig] = None):
    """
    Trains the network by mini-batch gradient descent (Adam updates) on
    the regularized log-loss.
    :param data: An ObservationalDataset.
    :param config: The training settings.
    :return: The fitted model (a prior-only model for single-class data).
    """

    config = config or MlpConfig()
    if config.hidden < 1:
        raise ParameterError(f"the hidden layer needs at least one unit, got {config.hidden}")
    if config.batch_size < 1 or config.epochs < 1:
        raise ParameterError("batch size and epochs must be positive")
    covariates = np.asarray(data.covariates, dtype=float)
    labels = np.asarray(data.treatments, dtype=float)
    n, d = covariates.shape
    if n < 2:
        raise SizingError("the network needs at least 2 rows")
    if not np.all(np.isfinite(covariates)):
        raise InputError("covariates contain NaN or infinite entries")
    if is_single_class(labels):
        return fit_prior(labels, d)

    rng = make_rng(config.seed)
    standardizer = Standardizer.fit(covariates)
    features = standardizer.apply(covariates)
    flat = pack(init_params(d, config.hidden, rng))
    first_moment = np.zeros_like(flat)
    second_moment = np.zeros_like(flat)
    updates = 0
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            batch = order[start:start + config.batch_size]
            _, gradient = mlp_loss_and_grad(flat, features[batch], labels[batch], config.hidden, config.l2)
            updates += 1
            first_moment = _BETA1 * first_moment + (1.0 - _BETA1) * gradient
            second_moment = _BETA2 * second_moment + (1.0 - _BETA2) * gradient ** 2
            corrected_first = first_moment / (1.0 - _BETA1 ** updates)
            corrected_second = second_moment / (1.0 - _BETA2 ** updates)
            flat = flat - config.learning_rate * corrected_first / (np.sqrt(corrected_second) + _ADAM_EPS)
        loss, _ = mlp_loss_and_grad(flat, features, labels, config.hidden, config.l2)
        if not np.isfinite(loss):
            raise OptimizationError(epoch, "the network loss became non-finite")

    LOGGER.info(f"Network trained for {config.epochs} epochs, final loss {loss:.6f}")
    return MlpModel(unpack(flat, d, config.hidden), standardizer, config)
