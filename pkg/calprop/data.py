import re
import hashlib
import logging
from typing import List, Optional, Sequence, Tuple
import numpy as np
import pandas as pd
from .exceptions import DataError, ParameterError, ParseError, ShapeError, SizingError


LOGGER = logging.getLogger("calprop.data")
LOGGER.setLevel(logging.INFO)
_SEED_LIMIT = 2 ** 64
_LINE_PATTERN = re.compile(r"line (\d+)")


def make_rng(seed) -> np.random.Generator:
    """
    Builds the generator every seeded operation uses: numpy's counter-based
    Philox bit generator.
    :param seed: An integer seed or a numpy SeedSequence.
    :return: The generator.
    """

    return np.random.Generator(np.random.Philox(seed))


def content_seed(seed: int, values) -> int:
    """
    Derives a seed from a base seed and the content of an array. Equal
    content gets equal seeds wherever it sits in a larger structure.
    :param seed: The base seed.
    :param values: The array keying the seed.
    :return: A 64-bit seed.
    """

    digest = hashlib.blake2b(np.ascontiguousarray(values).tobytes(), digest_size=8).digest()
    sequence = np.random.SeedSequence([int(seed), int.from_bytes(digest, "little")])
    return int(sequence.generate_state(1, np.uint64)[0])


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.array(array, copy=True)
    array.flags.writeable = False
    return array


class ObservationalDataset:
    """
    Rows of (covariates x, binary treatment t, scalar outcome y). The
    arrays are copied and frozen on construction.
    """

    def __init__(self, covariates, treatments, outcomes, covariate_names: Optional[Sequence[str]] = None):
        covariates = np.asarray(covariates, dtype=float)
        if covariates.ndim == 1:
            covariates = covariates.reshape(-1, 1)
        if covariates.ndim != 2:
            raise ShapeError(f"covariates must be a matrix, got {covariates.ndim} dimensions")
        treatments = np.asarray(treatments)
        outcomes = np.asarray(outcomes, dtype=float)
        if treatments.ndim != 1 or outcomes.ndim != 1:
            raise ShapeError("treatments and outcomes must be vectors")

        n = covariates.shape[0]
        if n < 1:
            raise DataError("a dataset needs at least one row")
        if treatments.shape[0] != n or outcomes.shape[0] != n:
            raise ShapeError(f"row counts differ: covariates {n}, treatments {treatments.shape[0]}, "
                             f"outcomes {outcomes.shape[0]}")
        if not np.all(np.isin(treatments, (0, 1))):
            raise DataError("every treatment must be exactly 0 or 1")
        if not np.all(np.isfinite(covariates)):
            raise DataError("covariates contain NaN or infinite entries")
        if not np.all(np.isfinite(outcomes)):
            raise DataError("outcomes contain NaN or infinite entries")

        if covariate_names is None:
            covariate_names = [f"x{index + 1}" for index in range(covariates.shape[1])]
        if len(covariate_names) != covariates.shape[1]:
            raise ShapeError("one name per covariate column is required")

        self._covariates = _frozen(covariates)
        self._treatments = _frozen(treatments.astype(np.int8))
        self._outcomes = _frozen(outcomes)
        self._covariate_names = tuple(covariate_names)

    @property
    def covariates(self) -> np.ndarray:
        return self._covariates

    @property
    def treatments(self) -> np.ndarray:
        return self._treatments

    @property
    def outcomes(self) -> np.ndarray:
        return self._outcomes

    @property
    def covariate_names(self) -> Tuple[str, ...]:
        return self._covariate_names

    @property
    def n(self) -> int:
        return self._covariates.shape[0]

    @property
    def d(self) -> int:
        return self._covariates.shape[1]

    def __len__(self) -> int:
        return self.n

    def subset(self, indices) -> 'ObservationalDataset':
        """
        Takes the given rows, in the given order.
        :param indices: Row indices.
        :return: A new dataset.
        """

        indices = np.asarray(indices, dtype=np.int64)
        return ObservationalDataset(self._covariates[indices], self._treatments[indices],
                                    self._outcomes[indices], self._covariate_names)

    def with_outcomes(self, outcomes) -> 'ObservationalDataset':
        return ObservationalDataset(self._covariates, self._treatments, outcomes, self._covariate_names)


class SplitSpec:
    """
    How a dataset is divided between model training and calibration:
    either a single split by calibration fraction, or k folds.
    """

    def __init__(self, calibration_fraction: Optional[float] = None, fold_count: Optional[int] = None,
                 seed: int = 0):
        if (calibration_fraction is None) == (fold_count is None):
            raise ParameterError("exactly one of calibration_fraction and fold_count must be set")
        if calibration_fraction is not None and not 0.0 < calibration_fraction < 1.0:
            raise ParameterError(f"calibration fraction must lie strictly in (0, 1), got {calibration_fraction}")
        if fold_count is not None and fold_count < 2:
            raise ParameterError(f"fold count must be at least 2, got {fold_count}")
        if not 0 <= int(seed) < _SEED_LIMIT:
            raise ParameterError(f"seed must be a 64-bit unsigned integer, got {seed}")
        self._calibration_fraction = calibration_fraction
        self._fold_count = fold_count
        self._seed = int(seed)

    @property
    def calibration_fraction(self) -> Optional[float]:
        return self._calibration_fraction

    @property
    def fold_count(self) -> Optional[int]:
        return self._fold_count

    @property
    def seed(self) -> int:
        return self._seed

    @property
    def is_kfold(self) -> bool:
        return self._fold_count is not None

    def reseeded(self, seed: int) -> 'SplitSpec':
        return SplitSpec(self._calibration_fraction, self._fold_count, seed)

    def __repr__(self):
        if self.is_kfold:
            return f"SplitSpec(fold_count={self._fold_count}, seed={self._seed})"
        return f"SplitSpec(calibration_fraction={self._calibration_fraction}, seed={self._seed})"


def split_indices(n: int, spec: SplitSpec) -> Tuple[np.ndarray, np.ndarray]:
    """
    Computes the (train, calibration) row indices of a fractional split.
    The calibration part holds floor(fraction * n) rows, clamped to
    [1, n - 1]. Both index sets are returned in ascending order.
    :param n: The number of rows.
    :param spec: A fractional split spec.
    :return: The (train, calibration) indices.
    """

    if spec.is_kfold:
        raise ParameterError("split_indices needs a fractional split spec; use kfold_indices for folds")
    if n < 2:
        raise SizingError(f"cannot split {n} row(s) into two non-empty parts")
    calibration_size = min(max(int(np.floor(spec.calibration_fraction * n)), 1), n - 1)
    permutation = make_rng(spec.seed).permutation(n)
    return np.sort(permutation[calibration_size:]), np.sort(permutation[:calibration_size])


def split_train_calibration(data: ObservationalDataset,
                            spec: SplitSpec) -> Tuple[ObservationalDataset, ObservationalDataset]:
    """
    Splits a dataset into training and calibration parts.
    :param data: The dataset.
    :param spec: A fractional split spec.
    :return: The (train, calibration) datasets, rows in their original relative order.
    """

    train, calibration = split_indices(data.n, spec)
    return data.subset(train), data.subset(calibration)


def kfold_indices(n: int, k: int, seed: int) -> List[Tuple[np.ndarray, np.ndarray]]:
    """
    Builds k folds over n rows. The calibration sets partition range(n)
    and their sizes differ by at most one.
    :param n: The number of rows.
    :param k: The number of folds.
    :param seed: The shuffling seed.
    :return: A list of k (train indices, calibration indices) pairs, each sorted.
    """

    if k < 2 or k > n:
        raise ParameterError(f"fold count must satisfy 2 <= k <= n, got k={k}, n={n}")
    permutation = make_rng(seed).permutation(n)
    folds = []
    for chunk in np.array_split(permutation, k):
        mask = np.ones(n, dtype=bool)
        mask[chunk] = False
        folds.append((np.flatnonzero(mask), np.sort(chunk)))
    return folds


def _parse_failure_row(error: Exception) -> int:
    match = _LINE_PATTERN.search(str(error))
    # File line 1 is the header, so file line L holds data row L - 1.
    return int(match.group(1)) - 1 if match else 0


def read_csv(path, treatment_col: str = "t", outcome_col: str = "y") -> ObservationalDataset:
    """
    Reads a dataset from a CSV document with a header row. The treatment
    and outcome columns are picked by name; every other column is a
    covariate.
    :param path: The document path.
    :param treatment_col: The treatment column name.
    :param outcome_col: The outcome column name.
    :return: The dataset.
    """

    try:
        raw = pd.read_csv(path, header=None, dtype=str, skip_blank_lines=False)
    except OSError as e:
        raise DataError(f"cannot read {path}: {e}")
    except pd.errors.EmptyDataError:
        raise ParseError(0, "the document is empty; a header row is required")
    except pd.errors.ParserError as e:
        raise ParseError(_parse_failure_row(e), f"malformed row ({e})")

    # Blank lines are dropped; the index keeps file line L as row L - 1.
    raw = raw.loc[~raw.isna().all(axis=1).to_numpy()]
    if raw.shape[0] == 0:
        raise ParseError(0, "the document is empty; a header row is required")
    columns = [str(column).strip() for column in raw.iloc[0]]
    for required in (treatment_col, outcome_col):
        if required not in columns:
            raise ParseError(0, f"the header lacks the column '{required}' (found {columns})")
    body = raw.iloc[1:]
    if body.shape[0] == 0:
        raise ParseError(1, "no data rows after the header")
    rows = body.index.to_numpy()

    values = body.apply(lambda cells: pd.to_numeric(cells, errors="coerce")).to_numpy(dtype=float)
    for bad, problem in ((np.isnan(values), "missing or non-numeric"), (~np.isfinite(values), "non-finite")):
        offending = np.argwhere(bad)
        if offending.size:
            row, index = offending[0]
            raise ParseError(int(rows[row]), f"{problem} value {body.iloc[row, index]!r} in column '{columns[index]}'")
    numeric = pd.DataFrame(values, columns=columns)

    treatments = numeric[treatment_col].to_numpy()
    invalid = np.flatnonzero(~np.isin(treatments, (0, 1)))
    if invalid.size:
        row = int(invalid[0])
        raise ParseError(int(rows[row]), f"treatment must be 0 or 1, got {treatments[row]!r}")

    covariate_columns = [column for column in columns if column not in (treatment_col, outcome_col)]
    data = ObservationalDataset(numeric[covariate_columns].to_numpy(dtype=float),
                                treatments.astype(np.int8), numeric[outcome_col].to_numpy(dtype=float),
                                covariate_columns)
    LOGGER.info(f"Read {data.n} rows with {data.d} covariates from {path}")
    return data


def write_csv(data: ObservationalDataset, path, treatment_col: str = "t", outcome_col: str = "y"):
    """
    Writes a dataset as CSV: covariates first, then treatment and outcome.
    Reals are written with 17 significant digits.
    :param data: The dataset.
    :param path: The document path.
    :param treatment_col: The treatment column name.
    :param outcome_col: The outcome column name.
    """

    frame = pd.DataFrame(data.covariates, columns=list(data.covariate_names))
    frame[treatment_col] = data.treatments.astype(int)
    frame[outcome_col] = data.outcomes
    frame.to_csv(path, index=False, float_format="%.17g")
