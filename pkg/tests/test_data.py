import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from bsgan.data import (
    Dataset,
    PreparationRecipe,
    class_partition,
    load_csv,
    load_dataset,
    load_recipe,
    min_max_scale,
    stratified_split,
)
from bsgan.errors import (
    ClassTooSmall,
    EmptyClass,
    MissingFile,
    RecipeError,
    UnknownLabelValue,
    UnparseableCell,
)


def identity_recipe(**kw):
    base = dict(id="t", source_file="x.csv", label_column="label",
                minority_values=["1"], majority_values=["0"])
    base.update(kw)
    return PreparationRecipe(**base)


def test_two_row_file(tmp_path):
    path = tmp_path / "two.csv"
    path.write_text("a,b,label\n1.5,2,0\n3,4,1\n")
    ds = load_csv(path, identity_recipe())
    assert ds.labels.tolist() == [0, 1]
    assert ds.features.tolist() == [[1.5, 2.0], [3.0, 4.0]]
    assert ds.feature_names == ("a", "b")


def test_headerless_with_value_map(tmp_path):
    path = tmp_path / "h.csv"
    path.write_text("M,0.5,3\nI,0.2,9\nF,0.1,2\n")
    recipe = identity_recipe(has_header=False, column_names=["sex", "len", "rings"], label_column="rings",
                             minority_values=["2", "3"], majority_values=["9"],
                             value_maps={"sex": {"M": 0, "F": 1, "I": 2}})
    ds = load_csv(path, recipe)
    assert ds.features.tolist() == [[0, 0.5], [2, 0.2], [1, 0.1]]
    assert ds.labels.tolist() == [1, 0, 1]


def test_missing_file(tmp_path):
    with pytest.raises(MissingFile):
        load_csv(tmp_path / "nope.csv", identity_recipe())


def test_unparseable_cell_is_an_error(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("a,label\n1,0\nfoo,1\n")
    with pytest.raises(UnparseableCell) as info:
        load_csv(path, identity_recipe())
    assert info.value.row == 3 and info.value.col == "a"


def test_unlisted_labels_drop_or_raise(tmp_path):
    path = tmp_path / "l.csv"
    path.write_text("a,label\n1,0\n2,7\n3,1\n")
    assert load_csv(path, identity_recipe()).n_samples == 2
    with pytest.raises(UnknownLabelValue):
        load_csv(path, identity_recipe(drop_unlisted=False))


def test_empty_class(tmp_path):
    path = tmp_path / "e.csv"
    path.write_text("a,label\n1,0\n2,0\n")
    with pytest.raises(EmptyClass):
        load_csv(path, identity_recipe())


def test_overlapping_label_sets_rejected():
    with pytest.raises(RecipeError):
        identity_recipe(minority_values=["1", "2"], majority_values=["2"])


def test_recipe_json_roundtrip(tmp_path):
    recipe = load_recipe("ecoli")
    path = tmp_path / "r.json"
    path.write_text(json.dumps(recipe.to_dict()))
    assert load_recipe(path) == recipe


def test_ecoli_recipe_counts(ecoli):
    # reference 20 / 315 / 7; the bundled source carries one extra majority row
    assert ecoli.n_minority == 20
    assert abs(ecoli.n_majority - 315) <= 1
    assert ecoli.n_features == 7


def test_yeast_recipe_counts():
    ds, _ = load_dataset("yeast")
    assert ds.n_minority == 51 and abs(ds.n_samples - 513) <= 1 and ds.n_features == 8


def test_dataset_rejects_non_finite():
    with pytest.raises(ValueError):
        Dataset(np.array([[np.nan]]), np.array([1]))


# --- scaling ---------------------------------------------------------------

def test_scale_simple_column():
    ds = Dataset(np.array([[2.0, 5.0], [4.0, 5.0], [6.0, 5.0]]), np.array([0, 1, 0]))
    scaled, _ = min_max_scale(ds)
    assert scaled.features[:, 0].tolist() == [0.0, 0.5, 1.0]
    assert scaled.features[:, 1].tolist() == [0.0, 0.0, 0.0]


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(2, 20), st.integers(1, 6)),
              elements=st.floats(-1e3, 1e3, allow_nan=False)))
def test_scale_roundtrip(x):
    ds = Dataset(x, np.r_[0, np.ones(len(x) - 1, dtype=int)])
    scaled, params = min_max_scale(ds)
    assert scaled.features.min() >= 0.0 and scaled.features.max() <= 1.0
    np.testing.assert_allclose(params.inverse_transform(scaled.features), x, rtol=0, atol=1e-12)


# --- splitting -------------------------------------------------------------

def test_split_sizes_ecoli(ecoli):
    split = stratified_split(ecoli, 0.2, seed=7)
    assert split.test.n_samples == 67
    assert split.test.n_minority == 4
    assert split.train.n_minority == 16


def test_split_exact_proportions():
    ds = Dataset(np.arange(10.0).reshape(-1, 1), np.array([0, 1] * 5))
    split = stratified_split(ds, 0.2, seed=3)
    assert split.test.n_samples == 2 and split.test.n_minority == 1


def test_split_deterministic(ecoli):
    a = stratified_split(ecoli, 0.2, seed=11)
    b = stratified_split(ecoli, 0.2, seed=11)
    c = stratified_split(ecoli, 0.2, seed=12)
    assert np.array_equal(a.test_rows, b.test_rows)
    assert not np.array_equal(a.test_rows, c.test_rows)


@settings(max_examples=80, deadline=None)
@given(st.integers(2, 60), st.integers(2, 300), st.floats(0.05, 0.6), st.integers(0, 2**32))
def test_split_invariants(n_min, n_maj, frac, seed):
    y = np.r_[np.zeros(n_maj, dtype=int), np.ones(n_min, dtype=int)]
    ds = Dataset(np.arange(len(y), dtype=float).reshape(-1, 1), y)
    try:
        split = stratified_split(ds, frac, seed)
    except ClassTooSmall:
        # only legitimate when some class cannot spare a row for one side
        assert any(frac * n < 1 or (1 - frac) * n < 1 for n in (n_min, n_maj))
        return
    rows = np.concatenate([split.train_rows, split.test_rows])
    assert sorted(rows.tolist()) == list(range(len(y)))
    assert split.test.n_samples == int(np.floor(frac * len(y) + 0.5))
    for c, n_c in ((0, n_maj), (1, n_min)):
        assert abs(np.sum(split.test.labels == c) - frac * n_c) < 1 + 1e-9


def test_split_class_too_small():
    ds = Dataset(np.arange(6.0).reshape(-1, 1), np.array([0, 0, 0, 0, 0, 1]))
    with pytest.raises(ClassTooSmall):
        stratified_split(ds, 0.2, 0)


# --- partition -------------------------------------------------------------

def test_partition_ecoli(ecoli):
    mino, majo = class_partition(ecoli)
    assert mino.n_samples == 20 and majo.n_samples == ecoli.n_samples - 20


def test_partition_all_minority():
    with pytest.raises(EmptyClass):
        class_partition(Dataset(np.zeros((3, 1)), np.ones(3, dtype=int)))


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(0, 1), min_size=2, max_size=40).filter(lambda v: 0 < sum(v) < len(v)))
def test_partition_reconstructs(labels):
    y = np.array(labels)
    ds = Dataset(np.arange(len(y) * 2, dtype=float).reshape(-1, 2), y)
    mino, majo = class_partition(ds)
    rebuilt = np.empty_like(ds.features)
    rebuilt[y == 1] = mino.features
    rebuilt[y == 0] = majo.features
    assert np.array_equal(rebuilt, ds.features)
