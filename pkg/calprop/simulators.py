import logging
from typing import NamedTuple, Optional, Tuple
import numpy as np
from . import constants
from .data import ObservationalDataset, _frozen, make_rng
from .exceptions import InvariantError, ParameterError
from .worlds import CONFOUNDER_T, CONFOUNDER_X, binary_confounder_world, exact_ate


LOGGER = logging.getLogger("calprop.simulators")
LOGGER.setLevel(logging.INFO)
DRUG_COVARIATES = ("x1", "x2", "x3")


class SimulatedStudy(NamedTuple):
    """
    A simulated dataset with its ground truth. `true_ratio` is
    E[Y(1)] / E[Y(0)] when the simulator knows it; `confounders` holds
    hidden variables the estimators never see.
    """

    data: ObservationalDataset
    true_ate: float
    true_ratio: Optional[float] = None
    clamped_means: int = 0
    confounders: Optional[np.ndarray] = None


class DrugSimConfig(NamedTuple):
    variant: str
    n: int
    seed: int = 0
    truth_draws: int = constants.TRUTH_DRAWS

    def validate(self):
        if self.variant not in constants.DRUG_VARIANTS:
            raise ParameterError(f"unknown drug simulation variant '{self.variant}'")
        if self.n < 1:
            raise ParameterError(f"a simulation needs at least one row, got n={self.n}")
        if self.truth_draws < 1:
            raise ParameterError(f"at least one draw is needed for the true effect, got {self.truth_draws}")


def draw_drug_covariates(rng: np.random.Generator, n: int) -> np.ndarray:
    """
    Draws x1 ~ Bernoulli(0.5), x2 ~ Gamma(shape 8, scale 4) and
    x3 ~ Beta(3, 1.5), one row per individual.
    """

    x1 = rng.binomial(1, 0.5, n).astype(float)
    x2 = rng.gamma(8.0, 4.0, n)
    x3 = rng.beta(3.0, 1.5, n)
    return np.column_stack((x1, x2, x3))


def drug_treatments(variant: str, covariates: np.ndarray) -> np.ndarray:
    """
    Applies one of the four deterministic assignment rules.
    """

    x1, x2, x3 = covariates[:, 0], covariates[:, 1], covariates[:, 2]
    if variant == "A":
        treated = np.where(x1 == 1, x2 > 45, x3 > 0.3)
    elif variant == "B":
        treated = np.where(x1 == 1, x3 > 0.3, x2 > 40)
    elif variant == "C":
        treated = (x2 > 50) & (x3 > 0.7)
    elif variant == "D":
        treated = (x2 > 50) ^ (x3 > 0.7)
    else:
        raise ParameterError(f"unknown drug simulation variant '{variant}'")
    return treated.astype(np.int8)


def poisson_means(covariates: np.ndarray, treatments) -> Tuple[np.ndarray, int]:
    """
    The outcome mean 2 + 0.5 x1 + 0.03 x2 + 2 x3 - t, clamped from below.
    :return: The means and the number of clamped entries.
    """

    means = 2.0 + 0.5 * covariates[:, 0] + 0.03 * covariates[:, 1] + 2.0 * covariates[:, 2] - treatments
    clamped = int(np.count_nonzero(means <= 0.0))
    return np.maximum(means, constants.POISSON_MEAN_FLOOR), clamped


def drug_truth(seed: np.random.SeedSequence, draws: int) -> Tuple[float, float]:
    """
    Estimates the effect of setting t=1 against t=0 over fresh covariate
    draws: the difference and the ratio of mean Poisson means.
    """

    covariates = draw_drug_covariates(make_rng(seed), draws)
    treated, _ = poisson_means(covariates, 1.0)
    control, _ = poisson_means(covariates, 0.0)
    return float(np.mean(treated - control)), float(treated.mean() / control.mean())


def simulate_drug(config: DrugSimConfig) -> SimulatedStudy:
    """
    Simulates a drug effectiveness study. Covariates are drawn before the
    assignment rule is applied, so every variant shares the same covariates
    under one seed.
    :param config: The variant, size and seed.
    :return: The study, with the true effect estimated from `truth_draws` draws.
    """

    config.validate()
    data_seed, truth_seed = np.random.SeedSequence(config.seed).spawn(2)
    rng = make_rng(data_seed)
    covariates = draw_drug_covariates(rng, config.n)
    treatments = drug_treatments(config.variant, covariates)
    means, clamped = poisson_means(covariates, treatments)
    if clamped:
        LOGGER.warning(f"Clamped {clamped} non-positive Poisson means to {constants.POISSON_MEAN_FLOOR}")
    outcomes = rng.poisson(means).astype(float)
    true_ate, true_ratio = drug_truth(truth_seed, config.truth_draws)
    data = ObservationalDataset(covariates, treatments, outcomes, DRUG_COVARIATES)
    LOGGER.info(f"Simulated drug variant {config.variant}: {config.n} rows, {int(treatments.sum())} treated")
    return SimulatedStudy(data, true_ate, true_ratio, clamped)


def simulate_binary_confounder(n: int, seed: int = 0, op: str = "xor") -> SimulatedStudy:
    """
    Simulates the hidden binary confounder study: Z ~ Bernoulli(0.5),
    X and T each depend on Z only, and Y = T op Z. Only X is observed.
    :param n: The number of rows.
    :param seed: The seed.
    :param op: "xor" (true effect 0) or "and".
    :return: The study; `confounders` holds Z.
    """

    if n < 1:
        raise ParameterError(f"a simulation needs at least one row, got n={n}")
    true_ate = exact_ate(binary_confounder_world(op))
    rng = make_rng(seed)
    z = rng.binomial(1, 0.5, n)
    x = (rng.random(n) < np.take(CONFOUNDER_X, z)).astype(float)
    t = (rng.random(n) < np.take(CONFOUNDER_T, z)).astype(np.int8)
    y = (t ^ z) if op == "xor" else (t & z)
    data = ObservationalDataset(x.reshape(-1, 1), t, y.astype(float), ("x",))
    return SimulatedStudy(data, true_ate, None, 0, _frozen(z.reshape(-1, 1).astype(float)))


class SpatialGwasConfig(NamedTuple):
    n: int
    m: int
    alpha: float = 0.1
    causal_fraction: float = 0.01
    seed: int = 0
    nu_gene: float = constants.NU_GENE
    nu_conf: float = constants.NU_CONF
    nu_noise: float = constants.NU_NOISE

    @property
    def causal_count(self) -> int:
        return max(1, int(round(self.causal_fraction * self.m)))

    def validate(self):
        if self.n < 2 or self.m < 2:
            raise ParameterError(f"a GWAS simulation needs n >= 2 and m >= 2, got n={self.n}, m={self.m}")
        if self.alpha <= 0:
            raise ParameterError(f"the Beta concentration must be positive, got {self.alpha}")
        if not 0.0 < self.causal_fraction <= 1.0:
            raise ParameterError(f"the causal fraction must lie in (0, 1], got {self.causal_fraction}")
        if min(self.nu_gene, self.nu_conf, self.nu_noise) <= 0:
            raise ParameterError("variance shares must be positive")


class GwasDataset:
    """
    Simulated genotypes and phenotypes. The allele frequencies and
    confounders are kept for diagnostics and oracle baselines; estimators
    only see genotypes and phenotypes.
    """

    def __init__(self, genotypes, phenotypes, true_beta, confounders, frequencies, config: SpatialGwasConfig):
        self._genotypes = _frozen(np.asarray(genotypes, dtype=np.int8))
        self._phenotypes = _frozen(np.asarray(phenotypes, dtype=float))
        self._true_beta = _frozen(np.asarray(true_beta, dtype=float))
        self._confounders = _frozen(np.asarray(confounders, dtype=float))
        self._frequencies = _frozen(np.asarray(frequencies, dtype=float))
        self._config = config

    @property
    def genotypes(self) -> np.ndarray:
        return self._genotypes

    @property
    def phenotypes(self) -> np.ndarray:
        return self._phenotypes

    @property
    def true_beta(self) -> np.ndarray:
        return self._true_beta

    @property
    def confounders(self) -> np.ndarray:
        return self._confounders

    @property
    def frequencies(self) -> np.ndarray:
        return self._frequencies

    @property
    def config(self) -> SpatialGwasConfig:
        return self._config

    @property
    def causal(self) -> np.ndarray:
        return np.flatnonzero(self._true_beta)

    @property
    def n(self) -> int:
        return self._genotypes.shape[0]

    @property
    def m(self) -> int:
        return self._genotypes.shape[1]

    def snp_dataset(self, snp: int) -> ObservationalDataset:
        """
        The observational view of one SNP: it is the treatment and every
        other SNP a covariate.
        """

        others = np.delete(np.arange(self.m), snp)
        return ObservationalDataset(self._genotypes[:, others], self._genotypes[:, snp], self._phenotypes,
                                    [f"snp{index}" for index in others])

    def permuted(self, order) -> 'GwasDataset':
        order = np.asarray(order)
        return GwasDataset(self._genotypes[:, order], self._phenotypes, self._true_beta[order], self._confounders,
                           self._frequencies[:, order], self._config)


def _rescale(values: np.ndarray, scale: float, share: float) -> np.ndarray:
    sd = values.std()
    if sd == 0:
        return values
    return scale * np.sqrt(share) / sd * values


def simulate_spatial_gwas(config: SpatialGwasConfig) -> GwasDataset:
    """
    Simulates the spatial population-structure GWAS. Individuals sit at
    Beta(alpha, alpha) coordinates; allele frequencies F = S Gamma^T mix
    them; genotypes are Bernoulli(F). The phenotype is the causal genetic
    signal plus a confounding term linear in the coordinates plus noise,
    rescaled so their variances stand in the ratio nu_gene : nu_conf : nu_noise.
    :param config: The simulation parameters.
    :return: The dataset.
    """

    config.validate()
    rng = make_rng(config.seed)
    n, m = config.n, config.m

    mixing = np.empty((m, 3))
    mixing[:, :2] = 0.9 * rng.uniform(0.0, 0.5, (m, 2))
    mixing[:, 2] = 0.05
    structure = np.empty((n, 3))
    structure[:, :2] = rng.beta(config.alpha, config.alpha, (n, 2))
    structure[:, 2] = 1.0
    frequencies = structure @ mixing.T
    if not np.all((frequencies > 0.0) & (frequencies < 1.0)):
        raise InvariantError("allele frequencies fell outside (0, 1)")
    genotypes = rng.binomial(1, frequencies).astype(np.int8)

    beta = np.zeros(m)
    causal = rng.choice(m, size=config.causal_count, replace=False)
    beta[causal] = rng.standard_normal(causal.shape[0])

    confounders = structure[:, :2]
    confounding = confounders @ rng.standard_normal(2)
    noise = rng.standard_normal(n)

    genetic = genotypes @ beta
    sd_gene = genetic.std()
    if sd_gene == 0:
        LOGGER.warning("The genetic signal has no variance; confounding and noise are scaled as if it were 1")
        scale = 1.0
    else:
        scale = sd_gene / np.sqrt(config.nu_gene)
    confounding = _rescale(confounding, scale, config.nu_conf)
    noise = _rescale(noise, scale, config.nu_noise)

    LOGGER.info(f"Simulated spatial GWAS (alpha={config.alpha}): {n} individuals, {m} SNPs, "
                f"{causal.shape[0]} causal")
    return GwasDataset(genotypes, genetic + confounding + noise, beta, confounders, frequencies, config)
