import numpy as np
import pytest

from data import (CsvFormatError, Dataset, EmptyDatasetError, SingleClassError, apply_scaler, fit_scaler,
                  load_csv, make_rings, make_xor, save_csv, stratified_split, stratified_split_indices,
                  xor_label)


def write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def test_load_csv_remaps_labels(tmp_path):
    ds = load_csv(write(tmp_path, "toy.csv", "a,b,target\n1,2,5\n3,4,5\n5,6,9\n"))
    assert ds.y.tolist() == [0, 0, 1]
    assert ds.n_classes == 2
    assert ds.feature_names == ["a", "b"]
    assert ds.name == "toy"


def test_load_csv_uses_last_column_without_target(tmp_path):
    ds = load_csv(write(tmp_path, "t.csv", "label,x,cls\n1,0.5,b\n2,0.7,a\n"))
    assert ds.feature_names == ["label", "x"]
    assert ds.y.tolist() == [1, 0]


def test_load_csv_header_only(tmp_path):
    with pytest.raises(EmptyDatasetError):
        load_csv(write(tmp_path, "h.csv", "a,b,target\n"))


def test_load_csv_bad_cell_names_row_and_column(tmp_path):
    with pytest.raises(CsvFormatError) as info:
        load_csv(write(tmp_path, "bad.csv", "a,b,target\n1,2,0\n3,abc,1\n"))
    assert info.value.row == 3
    assert info.value.column == "b"


def test_load_csv_single_class(tmp_path):
    with pytest.raises(SingleClassError):
        load_csv(write(tmp_path, "one.csv", "a,target\n1,0\n2,0\n"))


def test_csv_round_trip(tmp_path):
    ds = make_rings(40, seed=3)
    path = str(tmp_path / "rings.csv")
    save_csv(ds, path)
    loaded = load_csv(path)
    assert np.array_equal(loaded.X, ds.X)
    assert np.array_equal(loaded.y, ds.y)
    assert loaded.feature_names == ds.feature_names


def test_scaler_known_values():
    train = np.array([[0.0, 7.0], [5.0, 7.0], [10.0, 7.0]])
    params = fit_scaler(Dataset(train, [0, 1, 0]))
    assert params.mins.tolist() == [0.0, 7.0]
    assert params.maxs.tolist() == [10.0, 7.0]
    scaled = apply_scaler(params, [[5.0, 7.0], [12.0, 3.0]])
    assert scaled.tolist() == [[0.0, 0.0], [1.0, 0.0]]


def test_stratified_split_balanced():
    ds = Dataset(np.arange(10.0).reshape(-1, 1), [0] * 5 + [1] * 5)
    train, test = stratified_split(ds, 0.8, seed=1)
    assert train.n_samples == 8
    assert train.class_counts().tolist() == [4, 4]
    assert test.class_counts().tolist() == [1, 1]


def test_stratified_split_half():
    ds = Dataset(np.arange(4.0).reshape(-1, 1), [0, 0, 1, 1])
    train, test = stratified_split(ds, 0.5, seed=0)
    assert train.class_counts().tolist() == [1, 1]
    assert test.class_counts().tolist() == [1, 1]


def test_stratified_split_is_deterministic_and_disjoint():
    ds = make_rings(101, seed=2)
    first = stratified_split_indices(ds, 0.8, seed=9)
    second = stratified_split_indices(ds, 0.8, seed=9)
    assert first[0].tolist() == second[0].tolist()
    assert first[1].tolist() == second[1].tolist()
    assert len(set(first[0]) & set(first[1])) == 0
    assert len(first[0]) + len(first[1]) == 101
    assert len(first[0]) == 81


def random_dataset(rng):
    n_classes = int(rng.integers(2, 5))
    n = int(rng.integers(2 * n_classes, 120))
    y = np.concatenate([np.arange(n_classes), rng.integers(0, n_classes, size=n - n_classes)])
    rng.shuffle(y)
    return Dataset(rng.normal(scale=5.0, size=(n, 3)), y, n_classes)


def test_split_determinism_and_cover_on_random_datasets():
    rng = np.random.default_rng(12)
    for trial in range(50):
        ds = random_dataset(rng)
        fraction = float(rng.uniform(0.2, 0.9))
        train, test = stratified_split_indices(ds, fraction, seed=trial)
        again = stratified_split_indices(ds, fraction, seed=trial)
        assert train.tolist() == again[0].tolist()
        assert test.tolist() == again[1].tolist()
        assert not set(train.tolist()) & set(test.tolist())
        assert sorted(train.tolist() + test.tolist()) == list(range(ds.n_samples))


def test_scaled_values_stay_in_unit_range():
    rng = np.random.default_rng(3)
    for _ in range(20):
        ds = random_dataset(rng)
        train, test = stratified_split(ds, 0.7, seed=0)
        params = fit_scaler(train)
        for X in (train.X, test.X, rng.normal(scale=50.0, size=(40, 3))):
            scaled = apply_scaler(params, X)
            assert scaled.min() >= -1.0 and scaled.max() <= 1.0


def test_xor_labels():
    assert xor_label(0.5, -0.5) == 0
    assert xor_label(-0.5, -0.5) == 1
    ds = make_xor(50, seed=7)
    assert ds.y.tolist() == [xor_label(a, b) for a, b in ds.X]
    assert set(ds.y.tolist()) == {0, 1}


def test_rings_without_noise_sit_on_the_radii():
    ds = make_rings(60, noise_sd=0.0, seed=1)
    radius = np.hypot(ds.X[:, 0], ds.X[:, 1])
    expected = np.where(ds.y == 0, 0.4, 0.85)
    assert np.max(np.abs(radius - expected)) <= 1e-12


def test_generators_are_seeded():
    assert np.array_equal(make_rings(30, seed=5).X, make_rings(30, seed=5).X)
    assert np.array_equal(make_xor(30, seed=5).X, make_xor(30, seed=5).X)
