import numpy as np
import pytest
from calprop.data import (ObservationalDataset, SplitSpec, content_seed, kfold_indices, make_rng, read_csv,
                          split_indices, split_train_calibration, write_csv)
from calprop.exceptions import DataError, ParameterError, ParseError, ShapeError, SizingError


def test_dataset_is_frozen():
    data = ObservationalDataset([[1.0], [2.0]], [0, 1], [0.5, 1.5])
    assert data.n == 2 and data.d == 1
    assert data.covariate_names == ("x1",)
    with pytest.raises(ValueError):
        data.outcomes[0] = 3.0


@pytest.mark.parametrize("treatments", [[0, 2], [0.5, 1]])
def test_dataset_rejects_non_binary_treatment(treatments):
    with pytest.raises(DataError):
        ObservationalDataset([[1.0], [2.0]], treatments, [0.0, 0.0])


def test_dataset_rejects_mismatched_rows():
    with pytest.raises(ShapeError):
        ObservationalDataset([[1.0], [2.0]], [0, 1, 1], [0.0, 0.0])


def test_dataset_rejects_nan():
    with pytest.raises(DataError):
        ObservationalDataset([[np.nan], [2.0]], [0, 1], [0.0, 0.0])


def test_subset_keeps_order():
    data = ObservationalDataset(np.arange(5.0), [0, 1, 0, 1, 0], np.arange(5.0) * 10)
    part = data.subset([3, 1])
    assert part.covariates[:, 0].tolist() == [3.0, 1.0]
    assert part.outcomes.tolist() == [30.0, 10.0]


def test_split_of_two_rows():
    train, calibration = split_indices(2, SplitSpec(calibration_fraction=0.5, seed=1))
    assert len(train) == 1 and len(calibration) == 1


def test_split_of_one_row_fails():
    with pytest.raises(SizingError):
        split_indices(1, SplitSpec(calibration_fraction=0.5))


@pytest.mark.parametrize("n", range(2, 11))
@pytest.mark.parametrize("fraction", [0.01, 0.1, 0.25, 0.5, 0.75, 0.9, 0.99])
def test_split_partitions_rows(n, fraction):
    train, calibration = split_indices(n, SplitSpec(calibration_fraction=fraction, seed=n))
    assert len(train) >= 1 and len(calibration) >= 1
    assert sorted(np.concatenate([train, calibration]).tolist()) == list(range(n))
    assert len(calibration) == min(max(int(np.floor(fraction * n)), 1), n - 1)


def test_split_is_deterministic():
    spec = SplitSpec(calibration_fraction=0.3, seed=42)
    first, second = split_indices(100, spec), split_indices(100, spec)
    assert np.array_equal(first[0], second[0]) and np.array_equal(first[1], second[1])
    other = split_indices(100, spec.reseeded(43))
    assert not np.array_equal(first[1], other[1])


def test_split_train_calibration_sizes(linear_data):
    train, calibration = split_train_calibration(linear_data, SplitSpec(calibration_fraction=0.25, seed=0))
    assert (train.n, calibration.n) == (750, 250)


@pytest.mark.parametrize("kwargs", [{}, {"calibration_fraction": 0.5, "fold_count": 5},
                                    {"calibration_fraction": 1.0}, {"calibration_fraction": 0.0},
                                    {"fold_count": 1}, {"fold_count": 3, "seed": -1}])
def test_split_spec_validation(kwargs):
    with pytest.raises(ParameterError):
        SplitSpec(**kwargs)


def test_kfold_sizes():
    folds = kfold_indices(10, 3, seed=0)
    assert sorted(len(calibration) for _, calibration in folds) == [3, 3, 4]
    assert sorted(np.concatenate([calibration for _, calibration in folds]).tolist()) == list(range(10))
    for train, calibration in folds:
        assert len(np.intersect1d(train, calibration)) == 0
        assert len(train) + len(calibration) == 10


def test_kfold_leave_one_out():
    folds = kfold_indices(5, 5, seed=9)
    assert all(len(calibration) == 1 for _, calibration in folds)


def test_kfold_is_deterministic():
    first, second = kfold_indices(50, 4, seed=7), kfold_indices(50, 4, seed=7)
    for (a, b), (c, d) in zip(first, second):
        assert np.array_equal(a, c) and np.array_equal(b, d)


@pytest.mark.parametrize("n,k", [(5, 1), (5, 6)])
def test_kfold_rejects_bad_counts(n, k):
    with pytest.raises(ParameterError):
        kfold_indices(n, k, seed=0)


def test_make_rng_is_reproducible():
    assert np.array_equal(make_rng(5).random(4), make_rng(5).random(4))


def test_content_seed_depends_on_content_not_position():
    matrix = make_rng(6).binomial(1, 0.5, (50, 3))
    seeds = [content_seed(9, matrix[:, column]) for column in range(3)]
    reordered = matrix[:, [2, 0, 1]]
    assert content_seed(9, reordered[:, 0]) == seeds[2]
    assert content_seed(9, reordered[:, 1]) == seeds[0]
    assert len(set(seeds)) == 3
    assert content_seed(10, matrix[:, 0]) != seeds[0]
    assert 0 <= seeds[0] < 2 ** 64


def test_read_csv(write_lines):
    path = write_lines("age,t,y", "30,1,2.5", "40,0,1.0", "50,1,3.0")
    data = read_csv(path)
    assert data.n == 3 and data.covariate_names == ("age",)
    assert data.treatments.tolist() == [1, 0, 1]
    assert data.outcomes.tolist() == [2.5, 1.0, 3.0]


def test_read_csv_named_columns(write_lines):
    path = write_lines("treated,a,b,response", "1,0.5,1,2", "0,0.25,2,1")
    data = read_csv(path, treatment_col="treated", outcome_col="response")
    assert data.covariate_names == ("a", "b")
    assert data.covariates.tolist() == [[0.5, 1.0], [0.25, 2.0]]


def test_read_csv_bad_treatment_names_row(write_lines):
    path = write_lines("x,t,y", "1,0,1", "2,2,1", "3,1,0")
    with pytest.raises(ParseError) as info:
        read_csv(path)
    assert info.value.row == 2


def test_read_csv_missing_cell(write_lines):
    path = write_lines("x,t,y", "1,0,1", "2,1,1", "3,1,")
    with pytest.raises(ParseError) as info:
        read_csv(path)
    assert info.value.row == 3


def test_read_csv_non_numeric(write_lines):
    path = write_lines("x,t,y", "abc,0,1")
    with pytest.raises(ParseError) as info:
        read_csv(path)
    assert info.value.row == 1


def test_read_csv_ragged_row(write_lines):
    path = write_lines("x,t,y", "1,0,1", "2,1,1,9")
    with pytest.raises(ParseError) as info:
        read_csv(path)
    assert info.value.row == 2


def test_read_csv_missing_column(write_lines):
    with pytest.raises(ParseError) as info:
        read_csv(write_lines("x,treatment,y", "1,0,1"))
    assert info.value.row == 0


def test_read_csv_header_only(write_lines):
    with pytest.raises(ParseError):
        read_csv(write_lines("x,t,y"))


def test_read_csv_infinite_covariate_names_row(write_lines):
    path = write_lines("x,t,y", "1,0,1", "inf,1,1")
    with pytest.raises(ParseError) as info:
        read_csv(path)
    assert info.value.row == 2


def test_read_csv_reports_first_offending_row(write_lines):
    path = write_lines("x,t,y", "1,0,1", "2,1,", "abc,1,1")
    with pytest.raises(ParseError) as info:
        read_csv(path)
    assert info.value.row == 2


def test_read_csv_rows_follow_file_lines_past_blank_lines(write_lines):
    path = write_lines("x,t,y", "1,0,1", "", "", "2,5,1")
    with pytest.raises(ParseError) as info:
        read_csv(path)
    assert info.value.row == 4


def test_read_csv_skips_blank_lines(write_lines):
    data = read_csv(write_lines("x,t,y", "1,0,1", "", "2,1,3"))
    assert data.n == 2
    assert list(data.outcomes) == [1.0, 3.0]


def test_read_csv_missing_file(tmp_path):
    with pytest.raises(DataError) as info:
        read_csv(tmp_path / "absent.csv")
    assert not isinstance(info.value, ParseError)


def test_csv_round_trip(tmp_path, drug_study):
    path = tmp_path / "round.csv"
    write_csv(drug_study.data, path)
    read = read_csv(path)
    assert read.covariate_names == drug_study.data.covariate_names
    assert np.array_equal(read.treatments, drug_study.data.treatments)
    assert np.allclose(read.covariates, drug_study.data.covariates, rtol=0, atol=1e-12)
    assert np.allclose(read.outcomes, drug_study.data.outcomes, rtol=0, atol=1e-12)
