import itertools
import numpy as np
import pytest
from calprop.data import ObservationalDataset, make_rng
from calprop.exceptions import ConfigError, FitError, InputError, InvariantError, ParameterError, SizingError
from calprop.metrics import ece, log_loss
from calprop.models import PriorModel, dump_model
from calprop.models.base import PropensityModel
from calprop.models.logistic import fit_logistic
from calprop.recalibration import (CalibratedModel, IsotonicRecalibrator, SigmoidRecalibrator, fit_isotonic,
                                   fit_recalibrator, fit_sigmoid, load_model, recalibration_step,
                                   recalibrator_from_dict)
from calprop.simulators import DrugSimConfig, simulate_drug
from calprop.worlds import random_world, sample_world


class LookupModel(PropensityModel):
    """
    Predicts a fixed probability per integer-coded support point.
    """

    kind = "lookup"

    def __init__(self, table):
        super().__init__(1)
        self._table = np.asarray(table, dtype=float)

    def _predict(self, covariates):
        return self._table[covariates[:, 0].astype(int)]

    def to_dict(self):
        return {"kind": self.kind, "table": self._table.tolist()}


def _best_partition_error(labels):
    """
    The least squared error over monotone fits, by enumerating every split
    of the sorted points into contiguous blocks fitted with their means.
    """

    n = labels.shape[0]
    best = np.inf
    for cuts in itertools.product((False, True), repeat=n - 1):
        blocks = np.split(labels, [index + 1 for index, cut in enumerate(cuts) if cut])
        means = [block.mean() for block in blocks]
        if np.all(np.diff(means) >= 0):
            best = min(best, sum(float(np.sum((block - mean) ** 2)) for block, mean in zip(blocks, means)))
    return best


def test_isotonic_monotone_data_is_kept():
    recalibrator = fit_isotonic([0.1, 0.2, 0.3], [0, 1, 1], eps=1e-3)
    assert np.allclose(recalibrator.raw([0.1, 0.2, 0.3]), [0.0, 1.0, 1.0])
    assert np.allclose(recalibrator.transform([0.1, 0.2, 0.3]), [0.001, 0.999, 0.999])


def test_isotonic_pools_violators():
    recalibrator = fit_isotonic([0.1, 0.2, 0.3], [1, 0, 1], eps=1e-3)
    assert np.allclose(recalibrator.transform([0.1, 0.2, 0.3]), [0.5, 0.5, 0.999])


def test_isotonic_all_zero_labels():
    recalibrator = fit_isotonic([0.2, 0.4, 0.9], [0, 0, 0], eps=1e-3)
    assert np.allclose(recalibrator.transform([0.0, 0.5, 1.0]), 1e-3)


def test_isotonic_interpolates_and_clips_outside_range():
    recalibrator = fit_isotonic([0.2, 0.4, 0.6, 0.8], [0, 0, 1, 1], eps=1e-3)
    assert recalibrator.raw([0.5])[0] == pytest.approx(0.5)
    assert recalibrator.transform([0.0])[0] == pytest.approx(1e-3)
    assert recalibrator.transform([1.0])[0] == pytest.approx(1 - 1e-3)


def test_isotonic_is_optimal_on_small_instances():
    rng = make_rng(4)
    for _ in range(1000):
        n = int(rng.integers(1, 7))
        scores = np.sort(rng.random(n))
        labels = rng.integers(0, 2, n).astype(float)
        fitted = fit_isotonic(scores, labels).raw(scores)
        assert np.all(np.diff(fitted) >= -1e-12)
        assert float(np.sum((fitted - labels) ** 2)) <= _best_partition_error(labels) + 1e-9


def test_isotonic_beats_every_grid_step_function():
    rng = make_rng(5)
    grid = np.linspace(0.0, 1.0, 11)
    for _ in range(50):
        n = int(rng.integers(1, 5))
        scores = np.sort(rng.random(n))
        labels = rng.integers(0, 2, n).astype(float)
        error = float(np.sum((fit_isotonic(scores, labels).raw(scores) - labels) ** 2))
        for levels in itertools.combinations_with_replacement(grid, n):
            assert error <= float(np.sum((np.asarray(levels) - labels) ** 2)) + 1e-9


@pytest.mark.parametrize("scores,labels", [([0.1, 1.2], [0, 1]), ([0.1, 0.2], [0, 2]), ([0.1], [0, 1]), ([], [])])
def test_isotonic_rejects_bad_input(scores, labels):
    with pytest.raises(InputError):
        fit_isotonic(scores, labels)


def test_isotonic_recalibrator_invariants():
    with pytest.raises(InvariantError):
        IsotonicRecalibrator([0.2, 0.1], [0.0, 1.0])
    with pytest.raises(InvariantError):
        IsotonicRecalibrator([0.1, 0.2], [1.0, 0.0])
    with pytest.raises(ParameterError):
        IsotonicRecalibrator([0.1], [0.5], eps=0.5)


def test_sigmoid_keeps_calibrated_scores():
    rng = make_rng(6)
    scores = rng.uniform(0.05, 0.95, 10_000)
    labels = (rng.random(10_000) < scores).astype(int)
    recalibrator = fit_sigmoid(scores, labels)
    assert recalibrator.scale == pytest.approx(1.0, abs=0.1)
    assert recalibrator.offset == pytest.approx(0.0, abs=0.1)


def test_sigmoid_softens_overconfident_scores():
    rng = make_rng(7)
    scores = rng.uniform(0.01, 0.99, 10_000)
    labels = (rng.random(10_000) < 0.5 + 0.5 * (scores - 0.5)).astype(int)
    assert fit_sigmoid(scores, labels).scale < 1.0


def test_sigmoid_needs_both_classes():
    with pytest.raises(FitError):
        fit_sigmoid([0.2, 0.4, 0.6], [1, 1, 1])


def test_sigmoid_identity_map():
    assert np.allclose(SigmoidRecalibrator(1.0, 0.0).transform([0.1, 0.5, 0.9]), [0.1, 0.5, 0.9])


def test_unknown_method():
    with pytest.raises(ParameterError):
        fit_recalibrator("beta", [0.1, 0.9], [0, 1])


def test_constant_base_collapses_to_treated_fraction():
    calib = ObservationalDataset(np.arange(100.0), [1] * 30 + [0] * 70, np.zeros(100))
    model = recalibration_step(PriorModel(0.5, 1), calib, "isotonic")
    assert np.allclose(model.predict_proba(np.linspace(-5.0, 5.0, 7)), 0.3)


def test_empty_calibration_set():
    with pytest.raises(SizingError):
        recalibration_step(PriorModel(0.5, 1), None)


def test_oracle_base_stays_calibrated():
    rng = make_rng(8)
    world = random_world(rng)
    oracle = LookupModel(world.propensities)
    support, treatments, _ = sample_world(world, 20_000, rng)
    calib = ObservationalDataset(support.astype(float), treatments, np.zeros(20_000))
    model = recalibration_step(oracle, calib, "isotonic")
    support, treatments, _ = sample_world(world, 20_000, rng)
    held_out = support.astype(float).reshape(-1, 1)
    before = ece(oracle.predict_proba(held_out), treatments).ece
    after = ece(model.predict_proba(held_out), treatments).ece
    assert after <= before + 0.03


@pytest.mark.parametrize("method", ["isotonic", "sigmoid"])
def test_predictions_are_clamped(method):
    rng = make_rng(9)
    covariates = rng.standard_normal(500) * 10.0
    labels = (rng.random(500) < 1.0 / (1.0 + np.exp(-covariates))).astype(int)
    data = ObservationalDataset(covariates, labels, np.zeros(500))
    model = recalibration_step(fit_logistic(data), data, method, eps=0.01)
    probabilities = model.predict_proba(np.linspace(-100.0, 100.0, 201))
    assert probabilities.min() >= 0.01 and probabilities.max() <= 0.99


def test_composition_is_deterministic(linear_data):
    base = fit_logistic(linear_data)
    first = recalibration_step(base, linear_data, "isotonic")
    second = recalibration_step(base, linear_data, "isotonic")
    assert np.array_equal(first.predict_proba(linear_data.covariates), second.predict_proba(linear_data.covariates))


@pytest.mark.parametrize("method", ["isotonic", "sigmoid"])
def test_load_model_round_trip(tmp_path, linear_data, method):
    model = recalibration_step(fit_logistic(linear_data), linear_data, method, eps=0.002)
    path = tmp_path / "calibrated.json"
    dump_model(model, path)
    loaded = load_model(path)
    assert isinstance(loaded, CalibratedModel)
    assert loaded.eps == 0.002
    assert np.allclose(loaded.predict_proba(linear_data.covariates), model.predict_proba(linear_data.covariates),
                       rtol=0, atol=1e-12)


def test_unknown_recalibrator_document():
    with pytest.raises(ConfigError):
        recalibrator_from_dict({"kind": "beta"})


@pytest.mark.parametrize("content", [None, "{broken", "[]", '{"kind": "calibrated"}'])
def test_unreadable_model_documents(tmp_path, content):
    path = tmp_path / "model.json"
    if content is not None:
        path.write_text(content)
    with pytest.raises(ConfigError):
        load_model(path)


@pytest.mark.slow
@pytest.mark.parametrize("method", ["isotonic", "sigmoid"])
def test_recalibration_has_no_regret(method):
    for seed in range(10):
        data = simulate_drug(DrugSimConfig("A", 15_000, seed, truth_draws=1)).data
        train, calib, held_out = data.subset(range(5000)), data.subset(range(5000, 10_000)), \
            data.subset(range(10_000, 15_000))
        base = fit_logistic(train)
        model = recalibration_step(base, calib, method)
        plain = log_loss(base.predict_proba(held_out.covariates), held_out.treatments)
        recalibrated = log_loss(model.predict_proba(held_out.covariates), held_out.treatments)
        assert recalibrated <= plain + 0.02
