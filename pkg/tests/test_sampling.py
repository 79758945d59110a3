import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bsgan.data import Dataset, class_partition, min_max_scale, stratified_split
from bsgan.errors import DimensionMismatch, NoDangerPoints, PoolTooSmall
from bsgan.sampling import (
    Borderline,
    SmoteConfig,
    borderline_smote,
    classify_minority,
    danger_indices,
    interpolate,
    knn,
    smote,
)

from conftest import two_blobs


def sort_oracle(query, pool, k, exclude=None):
    """Sort every pool row by (distance, index) in plain Python."""
    keyed = []
    for i, row in enumerate(pool):
        if i == exclude:
            continue
        keyed.append((math.dist(query, row), i))
    keyed.sort()
    return [i for _, i in keyed[:k]]


def test_knn_by_inspection():
    nb = knn([0, 0], [[1, 0], [0, 1], [3, 3]], k=2)
    assert nb.neighbor_indices.tolist() == [0, 1]


def test_knn_full_pool_in_distance_order():
    pool = np.array([[5.0], [1.0], [3.0], [-2.0]])
    assert knn([0.0], pool, k=4).neighbor_indices.tolist() == [1, 3, 2, 0]


def test_knn_matches_oracle_random_pool(rng):
    pool = rng.random((50, 4))
    for q in range(10):
        query = rng.random(4)
        assert knn(query, pool, 5).neighbor_indices.tolist() == sort_oracle(query, pool, 5)
        assert knn(pool[q], pool, 5, exclude=q).neighbor_indices.tolist() == sort_oracle(pool[q], pool, 5, q)


def test_knn_excludes_self_and_breaks_ties_by_index():
    pool = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [-1.0, 0.0]])
    nb = knn(pool[0], pool, 3, exclude=0)
    assert nb.neighbor_indices.tolist() == [1, 2, 3]


def test_knn_errors():
    with pytest.raises(PoolTooSmall):
        knn([0.0], [[1.0], [2.0]], k=2, exclude=0)
    with pytest.raises(DimensionMismatch):
        knn([0.0, 1.0], [[1.0]], k=1)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_knn_permutation_equivariant(seed):
    rng = np.random.default_rng(seed)
    pool = rng.random((30, 3))
    query = rng.random(3)
    perm = rng.permutation(30)
    direct = knn(query, pool, 6).neighbor_indices
    permuted = knn(query, pool[perm], 6).neighbor_indices
    assert perm[permuted].tolist() == direct.tolist()


def test_interpolate_cases():
    p, q = np.array([0.0, 0.0]), np.array([2.0, 4.0])
    assert interpolate(p, q, 0.0).tolist() == [0.0, 0.0]
    assert interpolate(p, q, 1.0).tolist() == [2.0, 4.0]
    assert interpolate(p, q, 0.25).tolist() == [0.5, 1.0]
    with pytest.raises(DimensionMismatch):
        interpolate(p, [1.0], 0.5)


def between(rows, a, b, tol=1e-12):
    lo, hi = np.minimum(a, b), np.maximum(a, b)
    return np.all((rows >= lo - tol) & (rows <= hi + tol), axis=1)


def test_smote_rows_inside_parent_box(rng):
    x = rng.random((25, 3))
    out, parents = smote(x, SmoteConfig(k=5, amount=1000, seed=4), return_parents=True)
    assert out.shape == (1000, 3)
    assert between(out, x[parents[:, 0]], x[parents[:, 1]]).all()
    # every parent pair is a seed and one of its 5 minority neighbours
    for s, j in parents[:50]:
        assert j in knn(x[s], x, 5, exclude=s).neighbor_indices


def test_smote_round_robin_seeds(rng):
    x = rng.random((7, 2))
    _, parents = smote(x, SmoteConfig(k=3, amount=20, seed=1), return_parents=True)
    assert parents[:, 0].tolist() == [t % 7 for t in range(20)]


def test_smote_amount_zero_and_small_pool(rng):
    assert smote(rng.random((10, 2)), SmoteConfig(amount=0)).shape == (0, 2)
    with pytest.raises(PoolTooSmall):
        smote(rng.random((5, 2)), SmoteConfig(k=5, amount=3))


def test_smote_balances_ecoli(ecoli):
    minority, majority = class_partition(ecoli)
    amount = majority.n_samples - minority.n_samples
    out = smote(min_max_scale(ecoli)[0].features[ecoli.labels == 1], SmoteConfig(amount=amount, seed=0))
    assert out.shape == (amount, ecoli.n_features)
    assert minority.n_samples + len(out) == majority.n_samples


def test_smote_seed_fixes_output(rng):
    x = rng.random((12, 4))
    a = smote(x, SmoteConfig(amount=40, seed=9))
    b = smote(x, SmoteConfig(amount=40, seed=9))
    c = smote(x, SmoteConfig(amount=40, seed=10))
    assert a.tobytes() == b.tobytes()
    assert not np.array_equal(a, c)


# --- borderline labelling ---------------------------------------------------

def test_noise_point():
    centre = [0.5, 0.5]
    ring = [[0.5 + 0.01 * np.cos(t), 0.5 + 0.01 * np.sin(t)] for t in np.linspace(0, 6, 5)]
    far_minority = [[0.9, 0.9], [0.92, 0.9], [0.9, 0.92]]
    x = np.array([centre, *ring, *far_minority])
    y = np.array([1, 0, 0, 0, 0, 0, 1, 1, 1])
    ds = Dataset(x, y)
    labels = classify_minority(class_partition(ds)[0], ds, m=5)
    assert labels[0].kind is Borderline.NOISE and labels[0].m_prime == 5


def test_safe_point_with_no_majority_neighbours():
    x = np.array([[0.0, 0.0], [0.01, 0.0], [0.0, 0.01], [0.01, 0.01], [0.02, 0.0], [0.0, 0.02], [1.0, 1.0]])
    y = np.array([1, 1, 1, 1, 1, 1, 0])
    ds = Dataset(x, y)
    labels = classify_minority(class_partition(ds)[0], ds, m=5)
    assert labels[0].kind is Borderline.SAFE and labels[0].m_prime == 0


def test_label_bands():
    from bsgan.sampling import BorderlineLabel

    kinds = [BorderlineLabel.from_count(c, 5).kind for c in range(6)]
    assert kinds == [Borderline.SAFE] * 3 + [Borderline.DANGER] * 2 + [Borderline.NOISE]
    assert BorderlineLabel.from_count(2, 4).kind is Borderline.SAFE
    assert BorderlineLabel.from_count(3, 4).kind is Borderline.DANGER


def exhaustive_m_prime(x, y, m):
    out = []
    for i in np.flatnonzero(y == 1):
        d = sorted((math.dist(x[i], x[j]), j) for j in range(len(x)) if j != i)
        out.append(sum(y[j] == 0 for _, j in d[:m]))
    return out


def test_classify_matches_exhaustive_oracle(rng):
    ds = two_blobs(rng, n_major=80, n_minor=25, d=2, sep=0.2, spread=0.1)
    labels = classify_minority(class_partition(ds)[0], ds, m=5)
    assert [lab.m_prime for lab in labels] == exhaustive_m_prime(ds.features, ds.labels, 5)
    assert {lab.kind for lab in labels} >= {Borderline.SAFE, Borderline.DANGER}


# --- borderline SMOTE -------------------------------------------------------

def test_all_safe_raises(rng):
    ds = two_blobs(rng, n_major=40, n_minor=15, sep=0.8, spread=0.02)
    with pytest.raises(NoDangerPoints):
        borderline_smote(ds, SmoteConfig(amount=10))


def test_single_danger_point_forced_segment():
    d, n, n2, n3 = [0.5, 0.5], [0.5, 0.6], [0.5, 0.7], [0.45, 0.65]
    majority = [[0.45, 0.5], [0.55, 0.5], [0.9, 0.9], [0.1, 0.1], [0.9, 0.1]]
    ds = Dataset(np.array([d, n, n2, n3, *majority]), np.array([1, 1, 1, 1, 0, 0, 0, 0, 0]))
    assert danger_indices(ds, m=3).tolist() == [0]
    out = borderline_smote(ds, SmoteConfig(k=1, m=3, amount=50, seed=2))
    assert np.allclose(out[:, 0], 0.5)
    assert np.all((out[:, 1] >= 0.5) & (out[:, 1] <= 0.6))


def test_borderline_seeds_are_danger(rng):
    ds = two_blobs(rng, n_major=120, n_minor=30, d=3, sep=0.15, spread=0.1)
    out, parents = borderline_smote(ds, SmoteConfig(amount=500, seed=3), return_parents=True)
    danger = set(danger_indices(ds, 5).tolist())
    assert set(parents[:, 0].tolist()) <= danger
    x = class_partition(ds)[0].features
    assert between(out, x[parents[:, 0]], x[parents[:, 1]]).all()


def test_borderline_balances_ecoli_train(ecoli):
    split = stratified_split(ecoli, 0.2, seed=5)
    train, _ = min_max_scale(split.train)
    amount = train.n_majority - train.n_minority
    assert amount == 253 - 16
    out = borderline_smote(train, SmoteConfig(amount=amount, seed=0))
    assert len(out) == amount
    assert train.with_extra_minority(out).n_minority == train.n_majority
