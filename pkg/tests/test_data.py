"""Dataset container, normalization statistics, and CSV formats."""

import numpy as np
import pytest

from deeplfm.data import (
    Normalization,
    SeriesDataset,
    load_data_csv,
    load_dataset,
    load_inputs_csv,
    load_splits_csv,
    write_data_csv,
    write_predictions_csv,
    write_splits_csv,
)
from deeplfm.errors import DataError


def sample_dataset(n=10, truth=True):
    gen = np.random.default_rng(0)
    inputs = np.sort(gen.uniform(0, 1, (n, 1)), axis=0)
    targets = gen.normal(0, 2, (n, 2))
    return SeriesDataset(
        inputs=inputs,
        targets=targets,
        splits={"train": np.arange(n - 4), "test": np.arange(n - 4, n)},
        input_names=["t"],
        target_names=["y1", "y2"],
        truth=targets + 0.5 if truth else None,
    )


# -- container -----------------------------------------------------------------


def test_dataset_validation():
    with pytest.raises(DataError):
        SeriesDataset(np.zeros((3, 1)), np.zeros((4, 1)), {}, ["t"], ["y1"])
    with pytest.raises(DataError):
        SeriesDataset(np.zeros(3), np.zeros((3, 1)), {}, ["t"], ["y1"])
    with pytest.raises(DataError):
        SeriesDataset(np.zeros((3, 1)), np.zeros((3, 1)), {}, ["t", "x"],
                      ["y1"])
    with pytest.raises(DataError):
        SeriesDataset(np.zeros((3, 1)), np.zeros((3, 1)), {}, ["t"], [])
    with pytest.raises(DataError):
        SeriesDataset(np.zeros((3, 1)), np.zeros((3, 1)),
                      {"train": [0, 3]}, ["t"], ["y1"])
    with pytest.raises(DataError):
        SeriesDataset(np.zeros((3, 1)), np.zeros((3, 1)), {}, ["t"], ["y1"],
                      truth=np.zeros((2, 1)))


def test_split_arrays_and_truth():
    ds = sample_dataset()
    x, y = ds.split_arrays("test")
    assert x.shape == (4, 1) and y.shape == (4, 2)
    assert np.array_equal(y, ds.targets[-4:])
    _, yt = ds.split_arrays("test", use_truth=True)
    assert np.array_equal(yt, ds.truth[-4:])
    with pytest.raises(DataError):
        ds.split_arrays("validation")
    bare = sample_dataset(truth=False)
    with pytest.raises(DataError):
        bare.split_arrays("test", use_truth=True)


# -- normalization ---------------------------------------------------------------


def test_zscore_normalization_statistics():
    gen = np.random.default_rng(1)
    x = gen.uniform(-3, 5, (50, 2))
    y = gen.normal(4, 3, (50, 1))
    norm = Normalization.fit(x, y)
    xn = norm.normalize_x(x)
    yn = norm.normalize_y(y)
    assert np.allclose(xn.mean(axis=0), 0.0, atol=1e-12)
    assert np.allclose(xn.std(axis=0), 1.0, rtol=1e-12)
    assert np.allclose(yn.mean(axis=0), 0.0, atol=1e-12)
    assert np.allclose(norm.denormalize_mean(yn), y, atol=1e-12)
    assert np.allclose(norm.denormalize_var(np.ones((50, 1))),
                       np.full((50, 1), y.var(axis=0)), rtol=1e-12)


def test_identity_input_mode_leaves_inputs_alone():
    gen = np.random.default_rng(2)
    x = gen.uniform(0, 1, (20, 1))
    y = gen.normal(0, 2, (20, 1))
    norm = Normalization.fit(x, y, x_mode="identity")
    assert np.array_equal(norm.normalize_x(x), x)
    assert not np.allclose(norm.normalize_y(y), y)
    with pytest.raises(DataError):
        Normalization.fit(x, y, x_mode="minmax")


def test_constant_columns_get_unit_scale():
    x = np.column_stack([np.ones(5), np.arange(5.0)])
    y = np.full((5, 1), 2.0)
    norm = Normalization.fit(x, y)
    assert norm.x_std[0] == 1.0 and norm.y_std[0] == 1.0
    assert np.allclose(norm.normalize_x(x)[:, 0], 0.0)
    with pytest.raises(DataError):
        Normalization.fit(x[:1], y[:1])


def test_normalization_dict_round_trip():
    norm = Normalization.fit(np.random.default_rng(3).normal(0, 1, (10, 2)),
                             np.random.default_rng(4).normal(0, 1, (10, 1)))
    back = Normalization.from_dict(norm.to_dict())
    for field in ("x_mean", "x_std", "y_mean", "y_std"):
        assert np.array_equal(getattr(norm, field), getattr(back, field))


# -- CSV formats -----------------------------------------------------------------


def test_data_csv_round_trip_is_exact(tmp_path):
    ds = sample_dataset()
    path = tmp_path / "data.csv"
    write_data_csv(path, ds)
    inputs, targets, truth, input_names, target_names = load_data_csv(path)
    assert input_names == ["t"] and target_names == ["y1", "y2"]
    assert np.array_equal(inputs, ds.inputs)
    assert np.array_equal(targets, ds.targets)
    assert np.array_equal(truth, ds.truth)


def test_data_csv_without_truth(tmp_path):
    ds = sample_dataset(truth=False)
    path = tmp_path / "data.csv"
    write_data_csv(path, ds)
    _, _, truth, _, _ = load_data_csv(path)
    assert truth is None


def test_data_csv_explicit_columns(tmp_path):
    ds = sample_dataset(truth=False)
    path = tmp_path / "data.csv"
    write_data_csv(path, ds)
    inputs, targets, _, input_names, target_names = load_data_csv(
        path, input_cols=["t", "y1"], target_cols=["y2"]
    )
    assert inputs.shape == (10, 2) and targets.shape == (10, 1)
    assert input_names == ["t", "y1"] and target_names == ["y2"]
    with pytest.raises(DataError):
        load_data_csv(path, input_cols=["t"], target_cols=None)
    with pytest.raises(DataError):
        load_data_csv(path, input_cols=["t"], target_cols=["nope"])


def test_data_csv_parse_errors(tmp_path):
    missing = tmp_path / "missing.csv"
    with pytest.raises(DataError):
        load_data_csv(missing)
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    with pytest.raises(DataError):
        load_data_csv(empty)
    ragged = tmp_path / "ragged.csv"
    ragged.write_text("t,y1\n0.1,2.0\n0.2\n")
    with pytest.raises(DataError):
        load_data_csv(ragged)
    words = tmp_path / "words.csv"
    words.write_text("t,y1\n0.1,two\n")
    with pytest.raises(DataError):
        load_data_csv(words)
    no_targets = tmp_path / "no_targets.csv"
    no_targets.write_text("t,x\n0.1,2.0\n")
    with pytest.raises(DataError):
        load_data_csv(no_targets)


def test_splits_csv_round_trip(tmp_path):
    path = tmp_path / "splits.csv"
    splits = {"train": np.array([0, 2, 4]), "test": np.array([1, 3])}
    write_splits_csv(path, splits)
    back = load_splits_csv(path)
    assert set(back) == {"train", "test"}
    assert np.array_equal(back["train"], splits["train"])
    assert np.array_equal(back["test"], splits["test"])


def test_splits_csv_validation(tmp_path):
    bad_header = tmp_path / "a.csv"
    bad_header.write_text("name,row\ntrain,0\n")
    with pytest.raises(DataError):
        load_splits_csv(bad_header)
    bad_index = tmp_path / "b.csv"
    bad_index.write_text("split,index\ntrain,zero\n")
    with pytest.raises(DataError):
        load_splits_csv(bad_index)
    bad_width = tmp_path / "c.csv"
    bad_width.write_text("split,index\ntrain,0,9\n")
    with pytest.raises(DataError):
        load_splits_csv(bad_width)
    with pytest.raises(DataError):
        load_splits_csv(tmp_path / "missing.csv")


def test_load_dataset_composes_files(tmp_path):
    ds = sample_dataset()
    data_path = tmp_path / "data.csv"
    splits_path = tmp_path / "splits.csv"
    write_data_csv(data_path, ds)
    write_splits_csv(splits_path, ds.splits)
    loaded = load_dataset(data_path, splits_path)
    assert np.array_equal(loaded.inputs, ds.inputs)
    assert np.array_equal(loaded.targets, ds.targets)
    assert set(loaded.splits) == {"train", "test"}
    # without a splits file everything lands in train
    solo = load_dataset(data_path)
    assert np.array_equal(solo.splits["train"], np.arange(10))


def test_predictions_csv_round_trip(tmp_path):
    gen = np.random.default_rng(5)
    inputs = gen.uniform(0, 1, (6, 1))
    mean = gen.normal(0, 1, (6, 2))
    var = np.exp(gen.normal(0, 0.3, (6, 2)))
    path = tmp_path / "pred.csv"
    write_predictions_csv(path, inputs, mean, var, ["t"], ["y1", "y2"])
    header = path.read_text().splitlines()[0]
    assert header == "t,mean_y1,mean_y2,var_y1,var_y2"
    back, cols = load_inputs_csv(path)
    assert cols == ["t", "mean_y1", "mean_y2", "var_y1", "var_y2"]
    assert np.array_equal(back[:, 0], inputs[:, 0])
    assert np.array_equal(back[:, 1:3], mean)
    assert np.array_equal(back[:, 3:5], var)


def test_inputs_csv_validation(tmp_path):
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    with pytest.raises(DataError):
        load_inputs_csv(empty)
    with pytest.raises(DataError):
        load_inputs_csv(tmp_path / "none.csv")
