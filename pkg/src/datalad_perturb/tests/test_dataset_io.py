import numpy as np
import pandas as pd
import pytest

from datalad_perturb.dataset_io import (
    Dataset,
    ScalerMethod,
    apply_scaler,
    encode_labels,
    fit_scaler,
    load_csv,
    split,
    undersample,
)
from datalad_perturb.exceptions import (
    DataError,
    UsageError,
)


def test_load_csv_drops_unusable_rows(tmp_path):
    path = tmp_path / "flows.csv"
    path.write_text(
        " a ,b,label\n"
        "1,2,benign\n"
        "x,3,attack\n"
        "4,inf,attack\n"
        "5,,benign\n"
        "6,7,attack\n"
    )
    ds, report = load_csv(path, "label")
    assert ds.feature_names == ("a", "b")
    np.testing.assert_array_equal(ds.x, [[1.0, 2.0], [6.0, 7.0]])
    np.testing.assert_array_equal(ds.y, [0, 1])
    assert report.rows_read == 5
    assert report.rows_dropped == 3
    assert report.per_column_failures == {"a": 1, "b": 1}
    assert report.label_encoding == {"attack": 1, "benign": 0}


def test_load_csv_errors(tmp_path):
    with pytest.raises(DataError, match="not found"):
        load_csv(tmp_path / "missing.csv", "label")
    path = tmp_path / "flows.csv"
    path.write_text("a,b\n1,2\n")
    with pytest.raises(DataError, match="label column 'label'"):
        load_csv(path, "label")
    path.write_text("a,label\nx,0\n")
    with pytest.raises(DataError, match="no usable rows"):
        load_csv(path, "label")


def test_encode_labels():
    y, enc = encode_labels(pd.Series(["DoS", "Normal", "DoS"]))
    assert enc == {"DoS": 1, "Normal": 0}
    np.testing.assert_array_equal(y, [1, 0, 1])
    y, enc = encode_labels(pd.Series(["1", "0"]))
    assert enc == {"0": 0, "1": 1}
    y, enc = encode_labels(pd.Series(["a", "b"]), benign_label="b")
    assert enc == {"a": 1, "b": 0}
    with pytest.raises(DataError, match="does not occur"):
        encode_labels(pd.Series(["a", "b"]), benign_label="c")


def test_dataset_rejects_bad_input():
    with pytest.raises(DataError, match="non-finite"):
        Dataset(("a",), [[np.nan]], [0])
    with pytest.raises(DataError, match="labels"):
        Dataset(("a",), [[1.0]], [2])
    with pytest.raises(DataError, match="names"):
        Dataset(("a", "b"), [[1.0]], [0])
    ds = Dataset(("a",), [[1.0]], [0])
    with pytest.raises(ValueError):
        ds.x[0, 0] = 2.0


def _ramp(n):
    return Dataset(
        ("i", "sq"),
        np.column_stack([np.arange(n), np.arange(n) ** 2]),
        np.arange(n) % 2,
    )


def test_split_sizes_and_determinism():
    ds = _ramp(10)
    train, test = split(ds, 0.25, seed=0)
    # 2.5 rounds up
    assert (train.n_rows, test.n_rows) == (7, 3)
    assert sorted(np.concatenate([train.x[:, 0], test.x[:, 0]])) == list(range(10))
    again, _ = split(ds, 0.25, seed=0)
    np.testing.assert_array_equal(train.x, again.x)
    other, _ = split(ds, 0.25, seed=1)
    assert not np.array_equal(train.x, other.x)


def test_split_errors():
    with pytest.raises(UsageError):
        split(_ramp(10), 1.0, seed=0)
    with pytest.raises(DataError, match="degenerate"):
        split(_ramp(2), 0.1, seed=0)


def test_standardize_on_train():
    rng = np.random.default_rng(3)
    x = np.column_stack(
        [rng.normal(10.0, 3.0, 500), rng.integers(0, 50, 500), np.full(500, 4.0)]
    )
    ds = Dataset(("a", "b", "const"), x, np.zeros(500, dtype=int))
    params = fit_scaler(ds, "standardize")
    assert params.method is ScalerMethod.STANDARDIZE
    scaled = apply_scaler(params, ds)
    np.testing.assert_allclose(scaled.x[:, :2].mean(axis=0), 0.0, atol=1e-9)
    np.testing.assert_allclose(scaled.x[:, :2].std(axis=0), 1.0, atol=1e-9)
    np.testing.assert_array_equal(scaled.x[:, 2], 0.0)
    # the input is left alone
    assert ds.x[0, 2] == 4.0


def test_minmax_uses_train_range():
    train = _ramp(11)
    params = fit_scaler(train, ScalerMethod.MINMAX)
    scaled = apply_scaler(params, train)
    assert scaled.x.min() == 0.0 and scaled.x.max() == 1.0
    test = Dataset(("i", "sq"), [[20.0, 0.0]], [0])
    # values outside the training range are not clipped
    assert apply_scaler(params, test).x[0, 0] == pytest.approx(2.0)
    with pytest.raises(DataError):
        apply_scaler(params, Dataset(("i",), [[1.0]], [0]))


def test_undersample_balances():
    y = np.array([0] * 30 + [1] * 10)
    ds = Dataset(("i",), np.arange(40)[:, None], y)
    balanced = undersample(ds, seed=1)
    assert balanced.class_counts() == (10, 10)
    # every minority row survives
    assert set(balanced.x[balanced.y == 1, 0]) == set(range(30, 40))
    again = undersample(ds, seed=1)
    np.testing.assert_array_equal(balanced.x, again.x)


def test_undersample_single_class():
    ds = Dataset(("i",), [[0.0], [1.0]], [1, 1])
    with pytest.raises(DataError, match="both classes"):
        undersample(ds, seed=0)
