import numpy as np
import pytest
from calprop.data import make_rng
from calprop.exceptions import DomainError, InputError
from calprop.worlds import (DiscreteWorld, binary_confounder_world, calibrate_on_buckets, chi_squared_bound,
                            exact_aipw_limit, exact_ate, exact_iptw_limit, exact_naive, level_set_buckets,
                            necessity_witness, pi_yt, random_world, toy_world)


def test_true_propensities_recover_the_effect():
    rng = make_rng(1)
    for _ in range(100):
        world = random_world(rng)
        assert exact_iptw_limit(world, world.propensities) == pytest.approx(exact_ate(world), abs=1e-12)


@pytest.mark.parametrize("p0,p1,q0,q1", [(0.5, 0.5, 0.5, 0.5), (0.3, 0.6, 0.4, 0.8), (0.2, 0.9, 0.7, 0.1)])
def test_toy_world_closed_forms(p0, p1, q0, q1):
    treated, untreated = toy_world(p0, p1, 0), toy_world(p0, p1, 1)
    assert exact_ate(treated) == pytest.approx(0.5)
    assert exact_ate(untreated) == pytest.approx(-0.5)
    assert exact_iptw_limit(treated, (q0, q1)) == pytest.approx(0.5 * p1 / q1)
    assert exact_iptw_limit(untreated, (q0, q1)) == pytest.approx(-0.5 * (1 - p0) / (1 - q0))


def test_binary_confounder_effects():
    assert exact_ate(binary_confounder_world("xor")) == pytest.approx(0.0, abs=1e-15)
    assert exact_ate(binary_confounder_world("and")) == pytest.approx(0.5)
    assert exact_naive(binary_confounder_world("xor")) == pytest.approx(-2.0 / 21.0)
    assert binary_confounder_world().probabilities.sum() == pytest.approx(1.0)


def test_calibrated_coarsening_is_exact():
    rng = make_rng(2)
    for _ in range(100):
        world = random_world(rng, size=int(rng.integers(2, 11)), levels=3)
        q = calibrate_on_buckets(world, level_set_buckets(world))
        assert exact_iptw_limit(world, q) == pytest.approx(exact_ate(world), abs=1e-12)


def test_calibrate_on_buckets_averages_propensities():
    world = DiscreteWorld((0.25, 0.25, 0.5), (0.2, 0.4, 0.8), outcome_means=np.zeros((3, 2)))
    assert np.allclose(calibrate_on_buckets(world, (0, 0, 1)), (0.3, 0.3, 0.8))
    with pytest.raises(InputError):
        calibrate_on_buckets(world, (0, 1))


def test_necessity_witness_breaks_iptw():
    rng = make_rng(3)
    for _ in range(100):
        world = random_world(rng)
        q = rng.uniform(0.05, 0.95, world.size)
        witness = necessity_witness(world, q)
        limit, truth = exact_iptw_limit(witness, q), exact_ate(witness)
        assert abs(limit - truth) > 1e-9


def test_necessity_witness_closed_form():
    world = DiscreteWorld((0.5, 0.5), (0.2, 0.6), outcome_means=np.zeros((2, 2)))
    q = (0.5, 0.5)
    witness = necessity_witness(world, q)
    assert exact_ate(witness) == pytest.approx(1.0)
    assert exact_iptw_limit(witness, q) == pytest.approx(0.4 / 0.5)


def test_calibrated_q_has_no_witness():
    world = DiscreteWorld((0.5, 0.5), (0.2, 0.6), outcome_means=np.zeros((2, 2)))
    with pytest.raises(InputError):
        necessity_witness(world, (0.4, 0.4))


def test_chi_squared_bound_holds():
    rng = make_rng(4)
    for _ in range(100):
        world = random_world(rng, outcome_values=(-2.0, -0.5, 0.0, 1.0, 3.0))
        q = np.clip(world.propensities + rng.normal(0.0, 0.2, world.size), 0.02, 0.98)
        gap = abs(exact_iptw_limit(world, q) - exact_ate(world))
        assert gap <= chi_squared_bound(world, q) + 1e-12


def test_chi_squared_bound_vanishes_for_true_propensities():
    world = random_world(make_rng(5))
    assert chi_squared_bound(world, world.propensities) == pytest.approx(0.0, abs=1e-12)


def test_weighted_outcome_probabilities():
    world = random_world(make_rng(6))
    q = np.full(world.size, 0.5)
    weights = pi_yt(world, q)
    assert weights.shape == (3, 2)
    assert float(world.outcome_values @ (weights[:, 1] - weights[:, 0])) == pytest.approx(exact_iptw_limit(world, q))
    exact = pi_yt(world, world.propensities)
    assert np.allclose(exact.sum(axis=0), 1.0)


def test_aipw_double_robustness():
    rng = make_rng(7)
    for _ in range(20):
        world = random_world(rng)
        truth = exact_ate(world)
        wrong_q = rng.uniform(0.05, 0.95, world.size)
        wrong_fit = rng.standard_normal((world.size, 2))
        assert exact_aipw_limit(world, wrong_q, world.outcome_means) == pytest.approx(truth, abs=1e-12)
        assert exact_aipw_limit(world, world.propensities, wrong_fit) == pytest.approx(truth, abs=1e-12)
        assert exact_aipw_limit(world, world.propensities, world.outcome_means) == pytest.approx(truth, abs=1e-12)


@pytest.mark.parametrize("q", [(0.0, 0.5), (0.5, 1.0)])
def test_limits_reject_boundary_probabilities(q):
    with pytest.raises(DomainError):
        exact_iptw_limit(toy_world(0.5, 0.5, 0), q)


def test_world_validation():
    with pytest.raises(InputError):
        DiscreteWorld((0.5, 0.6), (0.5, 0.5), outcome_means=np.zeros((2, 2)))
    with pytest.raises(InputError):
        DiscreteWorld((0.5, 0.5), (0.5, 1.5), outcome_means=np.zeros((2, 2)))
    with pytest.raises(InputError):
        DiscreteWorld((0.5, 0.5), (0.5, 0.5))
