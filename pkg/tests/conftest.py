import numpy as np
import pytest
from calprop.data import ObservationalDataset, make_rng
from calprop.simulators import DrugSimConfig, simulate_binary_confounder, simulate_drug


@pytest.fixture
def rng() -> np.random.Generator:
    return make_rng(12345)


@pytest.fixture
def linear_data(rng) -> ObservationalDataset:
    """
    Two covariates, logistic treatment with weights (2, -1), linear outcome.
    """

    covariates = rng.standard_normal((1000, 2))
    treatments = (rng.random(1000) < 1.0 / (1.0 + np.exp(-(2.0 * covariates[:, 0] - covariates[:, 1])))).astype(int)
    outcomes = covariates @ np.array([1.0, 0.5]) + 2.0 * treatments + rng.standard_normal(1000)
    return ObservationalDataset(covariates, treatments, outcomes)


@pytest.fixture
def drug_study():
    return simulate_drug(DrugSimConfig("A", 2000, seed=3, truth_draws=10_000))


@pytest.fixture
def confounder_study():
    return simulate_binary_confounder(5000, seed=11)


@pytest.fixture
def write_lines(tmp_path):
    """
    Writes lines to a fresh CSV file and returns its path.
    """

    def write(*lines, name="data.csv"):
        path = tmp_path / name
        path.write_text("\n".join(lines) + "\n")
        return str(path)

    return write
