import abc
from typing import NamedTuple
import numpy as np
from ..constants import PROBABILITY_FLOOR
from ..exceptions import ShapeError


class Standardizer(NamedTuple):
    """
    Per-feature centering and scaling fitted on a training split.
    """

    mean: np.ndarray
    scale: np.ndarray

    @classmethod
    def fit(cls, covariates: np.ndarray) -> 'Standardizer':
        scale = covariates.std(axis=0)
        # Constant columns are only centered.
        scale = np.where(scale > 0, scale, 1.0)
        return cls(covariates.mean(axis=0), scale)

    @classmethod
    def identity(cls, d: int) -> 'Standardizer':
        return cls(np.zeros(d), np.ones(d))

    def apply(self, covariates: np.ndarray) -> np.ndarray:
        return (covariates - self.mean) / self.scale


def clip_probabilities(probabilities: np.ndarray) -> np.ndarray:
    return np.clip(probabilities, PROBABILITY_FLOOR, 1.0 - PROBABILITY_FLOOR)


class PropensityModel(abc.ABC):
    """
    A fitted probabilistic classifier Q(T=1|X). Fitted models are never
    mutated.
    """

    kind = None

    def __init__(self, d: int):
        self._d = int(d)

    @property
    def d(self) -> int:
        """
        The number of covariate columns the model expects.
        """

        return self._d

    def _as_matrix(self, covariates) -> np.ndarray:
        covariates = np.asarray(covariates, dtype=float)
        if covariates.ndim == 1 and self._d == 1:
            covariates = covariates.reshape(-1, 1)
        if covariates.ndim != 2 or covariates.shape[1] != self._d:
            raise ShapeError(f"expected a matrix with {self._d} columns, got shape {covariates.shape}")
        return covariates

    def predict_proba(self, covariates) -> np.ndarray:
        """
        Predicts Q(T=1|x) for every row.
        :param covariates: An n x d matrix.
        :return: The n probabilities, never exactly 0 or 1.
        """

        return self._predict(self._as_matrix(covariates))

    @abc.abstractmethod
    def _predict(self, covariates: np.ndarray) -> np.ndarray:
        pass

    @abc.abstractmethod
    def to_dict(self) -> dict:
        pass


class PriorModel(PropensityModel):
    """
    Predicts one constant probability. Used when the training data holds
    a single treatment class.
    """

    kind = "prior"

    def __init__(self, probability: float, d: int):
        super().__init__(d)
        self._probability = float(probability)

    @property
    def probability(self) -> float:
        return self._probability

    def _predict(self, covariates: np.ndarray) -> np.ndarray:
        return np.full(covariates.shape[0], self._probability)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "d": self._d, "probability": self._probability}

    @classmethod
    def from_dict(cls, document: dict) -> 'PriorModel':
        return cls(document["probability"], document["d"])


def fit_prior(treatments: np.ndarray, d: int) -> PriorModel:
    """
    Builds the Laplace-smoothed prior model (sum(t) + 1) / (n + 2).
    """

    return PriorModel((float(np.sum(treatments)) + 1.0) / (treatments.shape[0] + 2.0), d)


def is_single_class(treatments: np.ndarray) -> bool:
    return np.unique(treatments).shape[0] < 2
