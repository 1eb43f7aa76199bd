import logging
from typing import NamedTuple, Optional, Tuple
import numpy as np
from . import constants
from . import settings as _settings
from .data import ObservationalDataset, SplitSpec, kfold_indices, split_train_calibration
from .exceptions import DomainError, EstimationError, NumericError, ParameterError, ShapeError, SizingError
from .metrics import ece
from .models import fit_model
from .recalibration import fit_recalibrator, recalibration_step


LOGGER = logging.getLogger("calprop.estimators")
LOGGER.setLevel(logging.INFO)


class EffectEstimate(NamedTuple):
    """
    An average treatment effect with the estimator that produced it and a
    summary of the propensities it used. `ratio` is the estimated
    E[Y(1)] / E[Y(0)], or None when the control mean is 0.
    """

    ate: float
    estimator: str
    n: int
    propensity_min: float
    propensity_max: float
    propensity_mean: float
    ratio: Optional[float] = None

    def to_dict(self) -> dict:
        return self._asdict()


def _ratio(treated_mean: float, control_mean: float) -> Optional[float]:
    return float(treated_mean / control_mean) if control_mean != 0.0 else None


def _estimate(ate: float, estimator: str, n: int, propensities: np.ndarray, treated_mean: float,
              control_mean: float) -> EffectEstimate:
    if not np.isfinite(ate):
        raise NumericError(f"the {estimator} estimate is not finite")
    return EffectEstimate(float(ate), estimator, n, float(propensities.min()), float(propensities.max()),
                          float(propensities.mean()), _ratio(treated_mean, control_mean))


def _check_groups(data: ObservationalDataset):
    treated = int(data.treatments.sum())
    if treated == 0 or treated == data.n:
        raise EstimationError(f"both treatment groups must be non-empty ({treated} of {data.n} rows treated)")


def _check_propensities(data: ObservationalDataset, propensities) -> np.ndarray:
    propensities = np.asarray(propensities, dtype=float).ravel()
    if propensities.shape[0] != data.n:
        raise ShapeError(f"expected {data.n} propensities, got {propensities.shape[0]}")
    if not np.all((propensities > 0.0) & (propensities < 1.0)):
        raise DomainError("propensities must lie strictly inside (0, 1); clamp or recalibrate them first")
    return propensities


def naive_ate(data: ObservationalDataset) -> EffectEstimate:
    """
    The difference of group means, mean(y | t=1) - mean(y | t=0). The
    propensity summary is the treated fraction.
    """

    _check_groups(data)
    treated = data.treatments == 1
    treated_mean = float(data.outcomes[treated].mean())
    control_mean = float(data.outcomes[~treated].mean())
    fraction = np.array([treated.mean()])
    return _estimate(treated_mean - control_mean, "naive", data.n, fraction, treated_mean, control_mean)


def iptw_terms(data: ObservationalDataset, propensities) -> np.ndarray:
    """
    The per-row terms t y / e - (1 - t) y / (1 - e); their mean is the
    Horvitz-Thompson estimate.
    """

    propensities = _check_propensities(data, propensities)
    t = data.treatments
    y = data.outcomes
    return t * y / propensities - (1 - t) * y / (1.0 - propensities)


def iptw_ate(data: ObservationalDataset, propensities, normalized: bool = False) -> EffectEstimate:
    """
    The inverse propensity weighted estimate
    (1/n) sum(t y / e - (1 - t) y / (1 - e)).
    :param data: The dataset.
    :param propensities: e(x) for every row, strictly inside (0, 1).
    :param normalized: When True, each group's weights are normalized to
      sum to one (the Hajek form) instead.
    :return: The estimate.
    """

    propensities = _check_propensities(data, propensities)
    t = data.treatments
    y = data.outcomes
    treated_weights = t / propensities
    control_weights = (1 - t) / (1.0 - propensities)
    if normalized:
        _check_groups(data)
        treated_mean = float(np.sum(treated_weights * y) / np.sum(treated_weights))
        control_mean = float(np.sum(control_weights * y) / np.sum(control_weights))
    else:
        treated_mean = float(np.mean(treated_weights * y))
        control_mean = float(np.mean(control_weights * y))
    return _estimate(treated_mean - control_mean, "iptw", data.n, propensities, treated_mean, control_mean)


class OutcomeModel:
    """
    The linear outcome model f(x, t) = x . coefficients + t * treatment_coefficient + intercept.
    """

    def __init__(self, coefficients, treatment_coefficient: float, intercept: float):
        self._coefficients = np.asarray(coefficients, dtype=float).ravel()
        self._treatment_coefficient = float(treatment_coefficient)
        self._intercept = float(intercept)
        if not (np.all(np.isfinite(self._coefficients)) and np.isfinite(self._treatment_coefficient)
                and np.isfinite(self._intercept)):
            raise NumericError("outcome model coefficients must be finite")

    @property
    def coefficients(self) -> np.ndarray:
        return self._coefficients.copy()

    @property
    def treatment_coefficient(self) -> float:
        return self._treatment_coefficient

    @property
    def intercept(self) -> float:
        return self._intercept

    def predict(self, covariates, treatment) -> np.ndarray:
        covariates = np.asarray(covariates, dtype=float)
        if covariates.ndim == 1:
            covariates = covariates.reshape(-1, 1)
        if covariates.shape[1] != self._coefficients.shape[0]:
            raise ShapeError(f"expected {self._coefficients.shape[0]} covariate columns, got {covariates.shape[1]}")
        return covariates @ self._coefficients + np.asarray(treatment, dtype=float) * self._treatment_coefficient \
            + self._intercept


def fit_outcome_model(data: ObservationalDataset, ridge: float = constants.OUTCOME_RIDGE) -> OutcomeModel:
    """
    Least squares of y on [x, t, 1], solved through the normal equations
    with a small ridge added to the diagonal.
    :param data: The dataset, with n >= d + 2 rows.
    :param ridge: The diagonal jitter.
    :return: The fitted model.
    """

    if data.n < data.d + 2:
        raise SizingError(f"an outcome model over {data.d} covariates needs at least {data.d + 2} rows, got {data.n}")
    design = np.column_stack((data.covariates, data.treatments.astype(float), np.ones(data.n)))
    gram = design.T @ design + ridge * np.eye(design.shape[1])
    try:
        solution = np.linalg.solve(gram, design.T @ data.outcomes)
    except np.linalg.LinAlgError as e:
        raise NumericError(f"the outcome design is rank deficient ({e})")
    if not np.all(np.isfinite(solution)):
        raise NumericError("the outcome design is rank deficient")
    return OutcomeModel(solution[:-2], solution[-2], solution[-1])


def aipw_ate(data: ObservationalDataset, propensities, outcome: OutcomeModel) -> EffectEstimate:
    """
    The augmented estimate
    (1/n) sum(f(x,1) - f(x,0) + t (y - f(x,1)) / e - (1 - t) (y - f(x,0)) / (1 - e)).
    """

    propensities = _check_propensities(data, propensities)
    t = data.treatments
    y = data.outcomes
    treated_fit = outcome.predict(data.covariates, np.ones(data.n))
    control_fit = outcome.predict(data.covariates, np.zeros(data.n))
    treated_mean = float(np.mean(treated_fit + t * (y - treated_fit) / propensities))
    control_mean = float(np.mean(control_fit + (1 - t) * (y - control_fit) / (1.0 - propensities)))
    return _estimate(treated_mean - control_mean, "aipw", data.n, propensities, treated_mean, control_mean)


def estimate(data: ObservationalDataset, estimator: str, propensities=None, outcome: Optional[OutcomeModel] = None,
             normalized: bool = False) -> EffectEstimate:
    if estimator == "naive":
        return naive_ate(data)
    elif estimator == "iptw":
        return iptw_ate(data, propensities, normalized)
    elif estimator == "aipw":
        return aipw_ate(data, propensities, outcome if outcome is not None else fit_outcome_model(data))
    raise ParameterError(f"unknown estimator '{estimator}'")


def crossfit_propensities(data: ObservationalDataset, base: str, recal: str, fold_count: int, seed: int,
                          eps: float = constants.CLAMP_EPS,
                          settings: Optional[dict] = None) -> Tuple[np.ndarray, np.ndarray]:
    """
    Out-of-fold propensities over k folds. Row i in fold j gets the base
    score s_i of the model trained without fold j. Its recalibrated score
    applies to s_i a recalibrator fitted on the (s, t) pairs outside fold j,
    so no row takes part in calibrating its own score.
    :param data: The dataset.
    :param base: The base model kind.
    :param recal: "none", "isotonic" or "sigmoid".
    :param fold_count: The number of folds.
    :param seed: Seeds the folds and the base models.
    :param eps: The clamp of recalibrated scores.
    :param settings: The loaded settings.
    :return: The (plain, recalibrated) propensities; with recal "none" both are the base scores.
    """

    folds = kfold_indices(data.n, fold_count, seed)
    scores = out_of_fold_scores(data, base, folds, seed, settings)
    if recal == "none":
        return scores, scores.copy()
    LOGGER.debug(f"Cross-fitted {base} propensities with {recal} recalibration over {fold_count} folds")
    return scores, out_of_fold_recalibration(scores, data.treatments, folds, recal, eps)


def out_of_fold_scores(data: ObservationalDataset, base: str, folds, seed: int,
                       settings: Optional[dict] = None) -> np.ndarray:
    scores = np.empty(data.n)
    for index, (train, calibration) in enumerate(folds):
        model = fit_model(base, data.subset(train), settings, seed + index)
        scores[calibration] = model.predict_proba(data.covariates[calibration])
        LOGGER.debug(f"Fold {index}: {base} model fitted on {train.shape[0]} rows")
    return scores


def out_of_fold_recalibration(scores: np.ndarray, treatments: np.ndarray, folds, recal: str,
                              eps: float = constants.CLAMP_EPS) -> np.ndarray:
    calibrated = np.empty(scores.shape[0])
    for train, calibration in folds:
        recalibrator = fit_recalibrator(recal, scores[train], treatments[train], eps)
        calibrated[calibration] = np.clip(recalibrator.transform(scores[calibration]), eps, 1.0 - eps)
    return calibrated


class PipelineResult(NamedTuple):
    """
    Everything one run of the calibrated pipeline produces. `model` is
    the fitted propensity model of a fractional split (None for k folds).
    """

    estimate: EffectEstimate
    plain_estimate: EffectEstimate
    plain_propensities: np.ndarray
    propensities: np.ndarray
    ece_before: float
    ece_after: float
    model: object = None


def run_pipeline(data: ObservationalDataset, base: str = "logistic", recal: str = "isotonic",
                 estimator: str = "iptw", spec: Optional[SplitSpec] = None, eps: float = constants.CLAMP_EPS,
                 settings: Optional[dict] = None, normalized: bool = False,
                 ece_bins: int = constants.ECE_BINS) -> PipelineResult:
    """
    Splits the data, trains the base model, recalibrates it and estimates
    the effect with the composite propensities over every row. The same
    estimator is also run on the plain base propensities for comparison.
    :param data: The dataset.
    :param base: "logistic", "nb" or "mlp".
    :param recal: "none", "isotonic" or "sigmoid".
    :param estimator: "naive", "iptw" or "aipw".
    :param spec: The split; by default the configured number of folds with seed 0.
    :param eps: The clamp of recalibrated scores.
    :param settings: The loaded settings.
    :param normalized: Use the Hajek form of IPTW.
    :param ece_bins: Bins of the reported calibration errors.
    :return: The result.
    """

    if recal not in constants.RECALIBRATORS:
        raise ParameterError(f"unknown recalibration method '{recal}'")
    if estimator not in constants.ESTIMATORS:
        raise ParameterError(f"unknown estimator '{estimator}'")
    _check_groups(data)
    if spec is None:
        spec = SplitSpec(fold_count=_settings.value(settings, "folds"))

    model = None
    if spec.is_kfold:
        plain, calibrated = crossfit_propensities(data, base, recal, spec.fold_count, spec.seed, eps, settings)
    else:
        train, calibration = split_train_calibration(data, spec)
        base_model = fit_model(base, train, settings, spec.seed)
        plain = base_model.predict_proba(data.covariates)
        if recal == "none":
            model = base_model
            calibrated = plain.copy()
        else:
            model = recalibration_step(base_model, calibration, recal, eps)
            calibrated = model.predict_proba(data.covariates)

    outcome = fit_outcome_model(data) if estimator == "aipw" else None
    result = PipelineResult(
        estimate(data, estimator, calibrated, outcome, normalized),
        estimate(data, estimator, plain, outcome, normalized),
        plain,
        calibrated,
        ece(plain, data.treatments, ece_bins).ece,
        ece(calibrated, data.treatments, ece_bins).ece,
        model,
    )
    LOGGER.info(f"Pipeline {base}/{recal}/{estimator} on {data.n} rows: ate={result.estimate.ate:.6g} "
                f"(plain {result.plain_estimate.ate:.6g}), ECE {result.ece_before:.4f} -> {result.ece_after:.4f}")
    return result


def calibrated_pipeline(data: ObservationalDataset, base: str, recal: str, estimator: str, spec: SplitSpec,
                        eps: float = constants.CLAMP_EPS, settings: Optional[dict] = None,
                        normalized: bool = False) -> EffectEstimate:
    """
    Trains a propensity model, recalibrates it and returns the effect
    estimated with the recalibrated propensities.
    """

    return run_pipeline(data, base, recal, estimator, spec, eps, settings, normalized).estimate
