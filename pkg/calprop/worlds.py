from typing import Optional, Sequence
import numpy as np
from .exceptions import DomainError, InputError, ParameterError


_TOLERANCE = 1e-9


class DiscreteWorld:
    """
    A finite, fully specified joint distribution over (X, T, Y), used to
    compute population limits exactly by enumeration.

    Outcomes are given either as means E[Y|x, t] (a K x 2 matrix, column t)
    or as a finite distribution: values y_1..y_V and, per (x, t), their
    probabilities (a K x 2 x V array). The means are then derived.
    """

    def __init__(self, probabilities, propensities, outcome_means=None, outcome_values=None,
                 outcome_probabilities=None):
        probabilities = np.asarray(probabilities, dtype=float).ravel()
        propensities = np.asarray(propensities, dtype=float).ravel()
        size = probabilities.shape[0]
        if size < 1 or propensities.shape[0] != size:
            raise InputError("support probabilities and propensities must be non-empty and of equal length")
        if np.any(probabilities < 0.0) or abs(probabilities.sum() - 1.0) > _TOLERANCE:
            raise InputError("support probabilities must be non-negative and sum to 1")
        if np.any(propensities < 0.0) or np.any(propensities > 1.0):
            raise InputError("propensities must lie in [0, 1]")

        if outcome_probabilities is not None:
            values = np.asarray(outcome_values, dtype=float).ravel()
            distribution = np.asarray(outcome_probabilities, dtype=float)
            if distribution.shape != (size, 2, values.shape[0]):
                raise InputError(f"outcome probabilities must have shape {(size, 2, values.shape[0])}, "
                                 f"got {distribution.shape}")
            if np.any(distribution < 0.0) or np.any(np.abs(distribution.sum(axis=2) - 1.0) > _TOLERANCE):
                raise InputError("every outcome distribution must be non-negative and sum to 1")
            means = distribution @ values
            self._values = values
            self._distribution = distribution
        elif outcome_means is not None:
            means = np.asarray(outcome_means, dtype=float)
            if means.shape != (size, 2):
                raise InputError(f"outcome means must have shape {(size, 2)}, got {means.shape}")
            self._values = None
            self._distribution = None
        else:
            raise InputError("either outcome means or an outcome distribution is required")
        if not np.all(np.isfinite(means)):
            raise InputError("outcome means must be finite")

        self._probabilities = probabilities
        self._propensities = propensities
        self._means = means

    @property
    def size(self) -> int:
        return self._probabilities.shape[0]

    @property
    def probabilities(self) -> np.ndarray:
        return self._probabilities.copy()

    @property
    def propensities(self) -> np.ndarray:
        return self._propensities.copy()

    @property
    def outcome_means(self) -> np.ndarray:
        return self._means.copy()

    @property
    def outcome_values(self) -> Optional[np.ndarray]:
        return None if self._values is None else self._values.copy()

    @property
    def outcome_probabilities(self) -> Optional[np.ndarray]:
        return None if self._distribution is None else self._distribution.copy()

    @property
    def has_distribution(self) -> bool:
        return self._distribution is not None


def _model_probabilities(world: DiscreteWorld, q) -> np.ndarray:
    q = np.asarray(q, dtype=float).ravel()
    if q.shape[0] != world.size:
        raise InputError(f"one model probability per support point is required ({world.size}), got {q.shape[0]}")
    if np.any(q <= 0.0) or np.any(q >= 1.0):
        raise DomainError("model probabilities must lie strictly inside (0, 1)")
    return q


def exact_ate(world: DiscreteWorld) -> float:
    """
    The true effect: sum over x of P(x) (E[Y|x, 1] - E[Y|x, 0]).
    """

    means = world.outcome_means
    return float(np.sum(world.probabilities * (means[:, 1] - means[:, 0])))


def exact_iptw_limit(world: DiscreteWorld, q) -> float:
    """
    The value an IPTW estimator using propensities q converges to as the
    sample grows.
    :param world: The world.
    :param q: The model probability Q(T=1|x) at each support point.
    :return: sum over x of P(x) (P(1|x) E[Y|x,1] / q(x) - P(0|x) E[Y|x,0] / (1 - q(x))).
    """

    q = _model_probabilities(world, q)
    propensities = world.propensities
    means = world.outcome_means
    return float(np.sum(world.probabilities * (propensities * means[:, 1] / q
                                               - (1.0 - propensities) * means[:, 0] / (1.0 - q))))


def exact_aipw_limit(world: DiscreteWorld, q, outcome_fit) -> float:
    """
    The population limit of the AIPW estimator with propensities q and an
    outcome model whose predictions at each support point are the K x 2
    matrix `outcome_fit` (column t).
    """

    q = _model_probabilities(world, q)
    fit = np.asarray(outcome_fit, dtype=float)
    if fit.shape != (world.size, 2):
        raise InputError(f"outcome predictions must have shape {(world.size, 2)}, got {fit.shape}")
    propensities = world.propensities
    means = world.outcome_means
    terms = (fit[:, 1] - fit[:, 0] + propensities * (means[:, 1] - fit[:, 1]) / q
             - (1.0 - propensities) * (means[:, 0] - fit[:, 0]) / (1.0 - q))
    return float(np.sum(world.probabilities * terms))


def exact_naive(world: DiscreteWorld) -> float:
    """
    The population limit of the difference of group means,
    E[Y|T=1] - E[Y|T=0].
    """

    probabilities = world.probabilities
    propensities = world.propensities
    means = world.outcome_means
    treated = np.sum(probabilities * propensities)
    control = np.sum(probabilities * (1.0 - propensities))
    if treated <= 0.0 or control <= 0.0:
        raise DomainError("both treatment groups need positive probability")
    return float(np.sum(probabilities * propensities * means[:, 1]) / treated
                 - np.sum(probabilities * (1.0 - propensities) * means[:, 0]) / control)


def pi_yt(world: DiscreteWorld, q) -> np.ndarray:
    """
    The weighted outcome probabilities
    pi[v, t] = sum over x of P(y_v|x, t) P(t|x) / Q(t|x) P(x).
    With q equal to the true propensities, pi[:, t] is the distribution
    of Y under do(T=t); with any q, sum_v y_v (pi[v, 1] - pi[v, 0]) is the
    IPTW limit.
    :param world: A world with an outcome distribution.
    :param q: The model probability Q(T=1|x) at each support point.
    :return: A V x 2 matrix.
    """

    if not world.has_distribution:
        raise InputError("the world has outcome means only; an outcome distribution is required")
    q = _model_probabilities(world, q)
    ratios = _propensity_ratios(world, q)
    distribution = world.outcome_probabilities
    return np.einsum("x,xt,xtv->vt", world.probabilities, ratios, distribution)


def _propensity_ratios(world: DiscreteWorld, q: np.ndarray) -> np.ndarray:
    propensities = world.propensities
    return np.column_stack(((1.0 - propensities) / (1.0 - q), propensities / q))


def chi_squared_bound(world: DiscreteWorld, q) -> float:
    """
    Bounds |IPTW limit - true effect| by
    2 |Y| K max over (y, t) of E_{x ~ R_yt} sqrt(l_chi(x, t)),
    where R_yt is proportional to P(y|x, t) P(x), l_chi = (1 - P(t|x) / Q(t|x))^2
    and K bounds |y|. Pairs (y, t) that no x can produce contribute 0.
    :param world: A world with an outcome distribution.
    :param q: The model probability Q(T=1|x) at each support point.
    :return: The bound.
    """

    if not world.has_distribution:
        raise InputError("the world has outcome means only; an outcome distribution is required")
    q = _model_probabilities(world, q)
    root_losses = np.abs(1.0 - _propensity_ratios(world, q))
    # weights[x, t, v] = P(y_v|x, t) P(x)
    weights = world.outcome_probabilities * world.probabilities[:, None, None]
    mass = weights.sum(axis=0)
    expected = np.einsum("xtv,xt->tv", weights, root_losses)
    expected = np.divide(expected, mass, out=np.zeros_like(expected), where=mass > 0)
    values = world.outcome_values
    bound = np.max(np.abs(values))
    return float(2.0 * values.shape[0] * bound * expected.max())


def calibrate_on_buckets(world: DiscreteWorld, buckets) -> np.ndarray:
    """
    The calibrated coarsening of the true propensities over a bucket map:
    every support point gets P(T=1 | X in its bucket).
    :param world: The world.
    :param buckets: An integer bucket label per support point.
    :return: The coarsened propensities.
    """

    buckets = np.asarray(buckets).ravel()
    if buckets.shape[0] != world.size:
        raise InputError(f"one bucket label per support point is required ({world.size}), got {buckets.shape[0]}")
    _, labels = np.unique(buckets, return_inverse=True)
    probabilities = world.probabilities
    mass = np.bincount(labels, weights=probabilities)
    treated = np.bincount(labels, weights=probabilities * world.propensities)
    if np.any(mass <= 0.0):
        raise DomainError("every bucket needs positive probability")
    return (treated / mass)[labels]


def level_set_buckets(world: DiscreteWorld) -> np.ndarray:
    """
    Labels support points by their true propensity value, so that buckets
    only merge points the true propensities cannot tell apart.
    """

    _, labels = np.unique(world.propensities, return_inverse=True)
    return labels


def necessity_witness(world: DiscreteWorld, q) -> DiscreteWorld:
    """
    Builds the world with outcome Y = T * 1[X in B], where B is the bucket
    {x : q(x) = v} on which q is most miscalibrated. On this world the IPTW
    limit with q is P(B) P(T=1|B) / v while the true effect is P(B).
    :param world: The world supplying P(X) and P(T=1|X).
    :param q: Model probabilities, miscalibrated on at least one bucket.
    :return: The witness world.
    """

    q = _model_probabilities(world, q)
    levels, labels = np.unique(q, return_inverse=True)
    probabilities = world.probabilities
    mass = np.bincount(labels, weights=probabilities)
    treated = np.bincount(labels, weights=probabilities * world.propensities)
    gaps = np.zeros(levels.shape[0])
    occupied = mass > 0
    gaps[occupied] = np.abs(treated[occupied] / mass[occupied] - levels[occupied])
    worst = int(np.argmax(gaps))
    if gaps[worst] <= _TOLERANCE:
        raise InputError("q is calibrated on every bucket; no witness exists")

    inside = (labels == worst).astype(float)
    distribution = np.zeros((world.size, 2, 2))
    distribution[:, 0, 0] = 1.0
    distribution[:, 1, 1] = inside
    distribution[:, 1, 0] = 1.0 - inside
    return DiscreteWorld(probabilities, world.propensities, outcome_values=(0.0, 1.0),
                         outcome_probabilities=distribution)


def toy_world(p0: float, p1: float, component: int) -> DiscreteWorld:
    """
    Binary X with P(X=1) = 0.5 and P(T=1|X=x) = p_x. Component 0 has
    outcome Y = X AND T (effect 0.5); component 1 has Y = (NOT X) AND (NOT T)
    (effect -0.5).
    """

    x = np.array([0.0, 1.0])
    distribution = np.zeros((2, 2, 2))
    if component == 0:
        ones = np.column_stack((np.zeros(2), x))
    elif component == 1:
        ones = np.column_stack((1.0 - x, np.zeros(2)))
    else:
        raise ParameterError(f"component must be 0 or 1, got {component}")
    distribution[:, :, 1] = ones
    distribution[:, :, 0] = 1.0 - ones
    return DiscreteWorld((0.5, 0.5), (p0, p1), outcome_values=(0.0, 1.0), outcome_probabilities=distribution)


# P(X=1|Z=z) and P(T=1|Z=z), indexed by z.
CONFOUNDER_X = (0.1, 0.3)
CONFOUNDER_T = (0.2, 0.4)


def binary_confounder_world(op: str = "xor") -> DiscreteWorld:
    """
    The hidden-confounder world: Z ~ Bernoulli(0.5), X depends on Z, T
    depends on Z, and Y = T op Z. The support enumerates (z, x), ordered
    (0, 0), (0, 1), (1, 0), (1, 1).
    :param op: "xor" or "and".
    :return: The world.
    """

    probabilities, propensities, ones = [], [], []
    for z in (0, 1):
        for x in (0, 1):
            probabilities.append(0.5 * (CONFOUNDER_X[z] if x else 1.0 - CONFOUNDER_X[z]))
            propensities.append(CONFOUNDER_T[z])
            if op == "xor":
                ones.append((float(z), float(1 - z)))
            elif op == "and":
                ones.append((0.0, float(z)))
            else:
                raise ParameterError(f"unknown operator '{op}'")
    ones = np.array(ones)
    distribution = np.stack((1.0 - ones, ones), axis=2)
    return DiscreteWorld(probabilities, propensities, outcome_values=(0.0, 1.0), outcome_probabilities=distribution)


def random_world(rng: np.random.Generator, size: int = 10, outcome_values: Sequence[float] = (-1.0, 0.0, 1.0),
                 levels: Optional[int] = None) -> DiscreteWorld:
    """
    Draws a random world: Dirichlet support probabilities, propensities in
    [0.05, 0.95] and a Dirichlet outcome distribution per (x, t).
    :param rng: The generator.
    :param size: The number of support points.
    :param outcome_values: The outcome values.
    :param levels: When set, propensities take at most this many distinct
      values, so level sets hold several support points.
    :return: The world.
    """

    probabilities = rng.dirichlet(np.ones(size))
    if levels is None:
        propensities = rng.uniform(0.05, 0.95, size)
    else:
        propensities = rng.choice(rng.uniform(0.05, 0.95, levels), size)
    values = np.asarray(outcome_values, dtype=float)
    distribution = rng.dirichlet(np.ones(values.shape[0]), size=(size, 2))
    return DiscreteWorld(probabilities, propensities, outcome_values=values, outcome_probabilities=distribution)


def sample_world(world: DiscreteWorld, n: int, rng: np.random.Generator):
    """
    Draws n rows from a world. Returns (support index, treatments, outcomes);
    with outcome means only, Y is the mean itself.
    """

    support = rng.choice(world.size, size=n, p=world.probabilities)
    treatments = (rng.random(n) < world.propensities[support]).astype(np.int8)
    if world.has_distribution:
        cumulative = np.cumsum(world.outcome_probabilities[support, treatments], axis=1)
        picks = (rng.random(n)[:, None] > cumulative).sum(axis=1)
        outcomes = world.outcome_values[np.minimum(picks, world.outcome_values.shape[0] - 1)]
    else:
        outcomes = world.outcome_means[support, treatments]
    return support, treatments, outcomes
