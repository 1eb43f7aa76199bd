import abc
import json
import logging
from typing import Optional
import numpy as np
from scipy.special import expit, logit
from sklearn.isotonic import IsotonicRegression
from . import constants
from .exceptions import ConfigError, FitError, InputError, InvariantError, ParameterError, SizingError
from .models import PropensityModel, model_from_dict
from .models.base import clip_probabilities
from .models.logistic import logistic_loss_and_grad
from .models.optimize import minimize


LOGGER = logging.getLogger("calprop.recalibration")
LOGGER.setLevel(logging.INFO)
METHODS = ("isotonic", "sigmoid")


def _check_eps(eps: float):
    if not 0.0 < eps < 0.5:
        raise ParameterError(f"the output clamp must lie in (0, 0.5), got {eps}")


def _checked(scores, labels, minimum: int):
    scores = np.asarray(scores, dtype=float).ravel()
    labels = np.asarray(labels, dtype=float).ravel()
    if scores.shape != labels.shape:
        raise InputError(f"scores and labels differ in length: {scores.shape[0]} vs {labels.shape[0]}")
    if scores.shape[0] < minimum:
        raise InputError(f"at least {minimum} score(s) are required, got {scores.shape[0]}")
    if not np.all(np.isfinite(scores)) or np.any(scores < 0.0) or np.any(scores > 1.0):
        raise InputError("scores must lie in [0, 1]")
    if not np.all(np.isin(labels, (0.0, 1.0))):
        raise InputError("labels must be 0 or 1")
    return scores, labels


class Recalibrator(abc.ABC):
    """
    A monotone map r: [0, 1] -> [0, 1] applied to base model scores.
    """

    kind = None

    @abc.abstractmethod
    def transform(self, scores) -> np.ndarray:
        pass

    @abc.abstractmethod
    def to_dict(self) -> dict:
        pass


class IsotonicRecalibrator(Recalibrator):
    """
    A non-decreasing piecewise-linear map through (breakpoint, value)
    pairs, flat outside the breakpoint range, clamped to [eps, 1 - eps].
    """

    kind = "isotonic"

    def __init__(self, breakpoints, values, eps: float = constants.CLAMP_EPS):
        breakpoints = np.asarray(breakpoints, dtype=float).ravel()
        values = np.asarray(values, dtype=float).ravel()
        _check_eps(eps)
        if breakpoints.shape != values.shape or breakpoints.shape[0] < 1:
            raise InvariantError("breakpoints and values must be non-empty and of equal length")
        if np.any(np.diff(breakpoints) <= 0):
            raise InvariantError("breakpoints must be strictly ascending")
        if np.any(np.diff(values) < 0):
            raise InvariantError("fitted values must be non-decreasing")
        self._breakpoints = breakpoints
        self._values = values
        self._eps = float(eps)

    @property
    def breakpoints(self) -> np.ndarray:
        return self._breakpoints.copy()

    @property
    def values(self) -> np.ndarray:
        return self._values.copy()

    @property
    def eps(self) -> float:
        return self._eps

    def raw(self, scores) -> np.ndarray:
        """
        The fitted monotone function before the output clamp.
        """

        return np.interp(np.asarray(scores, dtype=float), self._breakpoints, self._values)

    def transform(self, scores) -> np.ndarray:
        return np.clip(self.raw(scores), self._eps, 1.0 - self._eps)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "breakpoints": self._breakpoints.tolist(), "values": self._values.tolist(),
                "eps": self._eps}


class SigmoidRecalibrator(Recalibrator):
    """
    Platt map p -> sigmoid(a * logit(p) + b).
    """

    kind = "sigmoid"

    def __init__(self, scale: float, offset: float):
        self._scale = float(scale)
        self._offset = float(offset)

    @property
    def scale(self) -> float:
        return self._scale

    @property
    def offset(self) -> float:
        return self._offset

    def transform(self, scores) -> np.ndarray:
        clipped = np.clip(np.asarray(scores, dtype=float), constants.LOGIT_CLIP, 1.0 - constants.LOGIT_CLIP)
        return clip_probabilities(expit(self._scale * logit(clipped) + self._offset))

    def to_dict(self) -> dict:
        return {"kind": self.kind, "a": self._scale, "b": self._offset}


def fit_isotonic(scores, labels, eps: float = constants.CLAMP_EPS) -> IsotonicRecalibrator:
    """
    Fits the least-squares non-decreasing map from scores to labels
    (pool adjacent violators). Equal scores are pooled.
    :param scores: Base model scores in [0, 1].
    :param labels: Treatments, 0 or 1.
    :param eps: The output clamp.
    :return: The fitted recalibrator.
    """

    scores, labels = _checked(scores, labels, 1)
    order = np.argsort(scores, kind="stable")
    regression = IsotonicRegression(y_min=0.0, y_max=1.0, increasing=True, out_of_bounds="clip")
    regression.fit(scores[order], labels[order])
    return IsotonicRecalibrator(regression.X_thresholds_, regression.y_thresholds_, eps)


def fit_sigmoid(scores, labels, tolerance: float = constants.LOGISTIC_TOLERANCE,
                max_iterations: int = constants.LOGISTIC_MAX_ITERATIONS) -> SigmoidRecalibrator:
    """
    Fits (a, b) minimizing the log-loss of sigmoid(a * logit(p) + b), by
    the same line-search gradient descent as logistic regression, starting
    from the identity map (a, b) = (1, 0).
    :param scores: Base model scores in [0, 1].
    :param labels: Treatments, 0 or 1; both classes must be present.
    :return: The fitted recalibrator.
    """

    scores, labels = _checked(scores, labels, 2)
    if np.unique(labels).shape[0] < 2:
        raise FitError("sigmoid recalibration needs both treatment classes; use isotonic recalibration")
    features = logit(np.clip(scores, constants.LOGIT_CLIP, 1.0 - constants.LOGIT_CLIP)).reshape(-1, 1)
    result = minimize(lambda params: logistic_loss_and_grad(params, features, labels, 0.0), np.array([1.0, 0.0]),
                      tolerance=tolerance, max_iterations=max_iterations)
    if not result.converged:
        LOGGER.warning(f"Sigmoid recalibration stopped after {result.iterations} iterations without converging")
    return SigmoidRecalibrator(result.params[0], result.params[1])


def fit_recalibrator(method: str, scores, labels, eps: float = constants.CLAMP_EPS) -> Recalibrator:
    if method == "isotonic":
        return fit_isotonic(scores, labels, eps)
    elif method == "sigmoid":
        return fit_sigmoid(scores, labels)
    raise ParameterError(f"unknown recalibration method '{method}'")


class CalibratedModel:
    """
    The composite R o Q: base model scores passed through a recalibrator,
    then clamped to [eps, 1 - eps].
    """

    kind = "calibrated"

    def __init__(self, base: PropensityModel, recalibrator: Recalibrator, eps: float = constants.CLAMP_EPS):
        _check_eps(eps)
        self._base = base
        self._recalibrator = recalibrator
        self._eps = float(eps)

    @property
    def base(self) -> PropensityModel:
        return self._base

    @property
    def recalibrator(self) -> Recalibrator:
        return self._recalibrator

    @property
    def eps(self) -> float:
        return self._eps

    @property
    def d(self) -> int:
        return self._base.d

    def predict_proba(self, covariates) -> np.ndarray:
        return np.clip(self._recalibrator.transform(self._base.predict_proba(covariates)),
                       self._eps, 1.0 - self._eps)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "base": self._base.to_dict(), "recalibrator": self._recalibrator.to_dict(),
                "eps": self._eps}


def recalibration_step(base: PropensityModel, calib, method: str = "isotonic",
                       eps: float = constants.CLAMP_EPS) -> CalibratedModel:
    """
    Builds S = {(Q(x), t)} over the calibration rows, fits the recalibrator
    on S and returns the composite.
    :param base: The fitted base model Q.
    :param calib: The calibration ObservationalDataset.
    :param method: "isotonic" or "sigmoid".
    :param eps: The output clamp of the composite.
    :return: The calibrated model.
    """

    if calib is None or calib.n == 0:
        raise SizingError("the calibration set is empty")
    scores = base.predict_proba(calib.covariates)
    recalibrator = fit_recalibrator(method, scores, calib.treatments, eps)
    LOGGER.info(f"Recalibrated a {base.kind} model with {method} on {calib.n} rows")
    return CalibratedModel(base, recalibrator, eps)


def recalibrator_from_dict(document: dict) -> Recalibrator:
    kind = document.get("kind")
    if kind == IsotonicRecalibrator.kind:
        return IsotonicRecalibrator(document["breakpoints"], document["values"], document["eps"])
    elif kind == SigmoidRecalibrator.kind:
        return SigmoidRecalibrator(document["a"], document["b"])
    raise ConfigError(f"not a recalibrator document (kind={kind!r})")


def load_model(path):
    """
    Reads a base or calibrated model from its JSON document.
    :param path: The document path.
    :return: The model.
    """

    try:
        with open(path, 'r') as f:
            document = json.load(f)
    except (OSError, ValueError) as e:
        raise ConfigError(f"cannot read the model document {path}: {e}")
    if not isinstance(document, dict):
        raise ConfigError(f"model document {path} must hold a JSON object")
    try:
        if document.get("kind") == CalibratedModel.kind:
            return CalibratedModel(model_from_dict(document["base"]),
                                   recalibrator_from_dict(document["recalibrator"]), document["eps"])
        return model_from_dict(document)
    except (KeyError, TypeError) as e:
        raise ConfigError(f"incomplete model document {path}: missing or malformed {e}")


def model_document(model) -> Optional[dict]:
    return model.to_dict() if model is not None else None
