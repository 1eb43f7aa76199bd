import json
import logging
from typing import Callable, Dict, Optional
from .base import PropensityModel, PriorModel, Standardizer, fit_prior
from .logistic import LogisticConfig, LogisticModel, fit_logistic, logistic_loss_and_grad
from .naive_bayes import GaussianNaiveBayesModel, NaiveBayesConfig, fit_naive_bayes
from .mlp import MlpConfig, MlpModel, fit_mlp, mlp_loss_and_grad
from .. import settings as _settings
from ..exceptions import ConfigError, ParameterError


LOGGER = logging.getLogger("calprop.models")
LOGGER.setLevel(logging.INFO)

MODEL_TYPES = {
    LogisticModel.kind: LogisticModel,
    GaussianNaiveBayesModel.kind: GaussianNaiveBayesModel,
    MlpModel.kind: MlpModel,
    PriorModel.kind: PriorModel,
}


def _config_for(kind: str, settings: Optional[dict], seed: int):
    if kind == "logistic":
        return LogisticConfig(**_settings.section(settings, "logistic"))
    elif kind == "nb":
        return NaiveBayesConfig(**_settings.section(settings, "nb"))
    elif kind == "mlp":
        return MlpConfig(seed=seed, **_settings.section(settings, "mlp"))
    raise ParameterError(f"unknown base model '{kind}'")


FITTERS: Dict[str, Callable] = {
    "logistic": fit_logistic,
    "nb": fit_naive_bayes,
    "mlp": fit_mlp,
}


def fit_model(kind: str, data, settings: Optional[dict] = None, seed: int = 0) -> PropensityModel:
    """
    Fits a base propensity model by kind.
    :param kind: One of "logistic", "nb" or "mlp".
    :param data: The training ObservationalDataset.
    :param settings: The loaded settings (the defaults when None).
    :param seed: Seed for models with random initialization.
    :return: The fitted model.
    """

    try:
        fitter = FITTERS[kind]
    except KeyError:
        raise ParameterError(f"unknown base model '{kind}'")
    return fitter(data, _config_for(kind, settings, seed))


def model_from_dict(document: dict) -> PropensityModel:
    """
    Rebuilds a model from its JSON document.
    :param document: The output of the model's `to_dict`.
    :return: The model.
    """

    try:
        model_type = MODEL_TYPES[document["kind"]]
    except KeyError:
        raise ConfigError(f"not a propensity model document (kind={document.get('kind')!r})")
    return model_type.from_dict(document)


def dump_model(model, path):
    """
    Writes any model (base or calibrated) as JSON.
    """

    with open(path, 'w') as f:
        json.dump(model.to_dict(), f, indent=2)
