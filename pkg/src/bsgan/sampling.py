"""Brute-force k-NN, SMOTE and Borderline-SMOTE."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .data import class_partition, features_of
from .errors import DimensionMismatch, NoDangerPoints, PoolTooSmall


@dataclass(frozen=True)
class NeighborIndex:
    query_index: int | None
    neighbor_indices: np.ndarray
    distances: np.ndarray


def _sq_distances(query, pool):
    diff = pool - query
    return np.einsum("ij,ij->i", diff, diff)


def knn(query, pool, k, exclude=None):
    """Return the ``k`` nearest rows of ``pool`` to ``query`` (Euclidean).

    Ties are broken by ascending row index. ``exclude`` drops one pool row
    from consideration, normally the query's own row.
    """
    pool = np.atleast_2d(np.asarray(pool, dtype=float))
    query = np.asarray(query, dtype=float).ravel()
    if query.shape[0] != pool.shape[1]:
        raise DimensionMismatch(f"query has {query.shape[0]} features, pool has {pool.shape[1]}")
    available = pool.shape[0] - (exclude is not None)
    if k < 1 or k > available:
        raise PoolTooSmall(f"need k={k} neighbours from a pool of {available}")
    d2 = _sq_distances(query, pool)
    if exclude is not None:
        d2[exclude] = np.inf
    order = np.argsort(d2, kind="stable")[:k]
    return NeighborIndex(exclude, order, np.sqrt(d2[order]))


def neighbor_table(x, k):
    """k nearest neighbours of every row of ``x`` within ``x`` itself (self excluded)."""
    x = np.asarray(x, dtype=float)
    if x.shape[0] < k + 1:
        raise PoolTooSmall(f"need at least k+1={k + 1} rows, got {x.shape[0]}")
    return np.stack([knn(x[i], x, k, exclude=i).neighbor_indices for i in range(x.shape[0])])


def interpolate(p_i, p_j, gap):
    """``p_i + gap * (p_j - p_i)``; gap in [0, 1] gives a point on the segment."""
    p_i = np.asarray(p_i, dtype=float)
    p_j = np.asarray(p_j, dtype=float)
    if p_i.shape != p_j.shape:
        raise DimensionMismatch(f"{p_i.shape} vs {p_j.shape}")
    if not 0.0 <= gap <= 1.0:
        raise ValueError(f"gap must lie in [0, 1], got {gap}")
    return p_i + gap * (p_j - p_i)


@dataclass(frozen=True)
class SmoteConfig:
    k: int = 5
    m: int = 5
    amount: int = 0
    seed: int = 0

    def __post_init__(self):
        if self.k < 1 or self.m < 1:
            raise ValueError(f"k and m must be >= 1 (got k={self.k}, m={self.m})")
        if self.amount < 0:
            raise ValueError(f"amount must be >= 0, got {self.amount}")

    @classmethod
    def from_percentage(cls, n_minority, percent, **kw):
        """Size from a percentage of the minority count: ``round(percent / 100 * n_minority)``."""
        return cls(amount=int(round(percent / 100.0 * n_minority)), **kw)


def _populate(points, pool, seeds, neighbors, amount, rng):
    """Round-robin over ``seeds``; each output joins a seed to one random neighbour."""
    out = np.empty((amount, pool.shape[1]))
    parents = np.empty((amount, 2), dtype=np.int64)
    k = neighbors.shape[1]
    for t in range(amount):
        s = t % len(seeds)
        j = neighbors[s, rng.integers(k)]
        gap = rng.random()
        out[t] = interpolate(points[s], pool[j], gap)
        parents[t] = seeds[s], j
    return out, parents


def smote(minority, cfg, return_parents=False):
    """Generate ``cfg.amount`` synthetic rows from the minority sample.

    Parameters
    ----------
    minority : Dataset or array of shape (P, d)
        Minority-class rows only.
    cfg : SmoteConfig
        ``k`` neighbours, output size ``amount`` and RNG ``seed``.
    return_parents : bool
        Also return an ``(amount, 2)`` array of (seed row, neighbour row)
        indices into ``minority``.
    """
    x = features_of(minority)
    if cfg.amount == 0:
        empty = np.empty((0, x.shape[1]))
        return (empty, np.empty((0, 2), dtype=np.int64)) if return_parents else empty
    neighbors = neighbor_table(x, cfg.k)
    rng = np.random.default_rng(cfg.seed)
    out, parents = _populate(x, x, np.arange(len(x)), neighbors, cfg.amount, rng)
    return (out, parents) if return_parents else out


class Borderline(enum.Enum):
    SAFE = "safe"
    DANGER = "danger"
    NOISE = "noise"


@dataclass(frozen=True)
class BorderlineLabel:
    kind: Borderline
    m_prime: int

    @classmethod
    def from_count(cls, m_prime, m):
        if m_prime == m:
            return cls(Borderline.NOISE, m_prime)
        if 2 * m_prime > m:
            return cls(Borderline.DANGER, m_prime)
        return cls(Borderline.SAFE, m_prime)


def _self_index(point, pool, labels):
    hits = np.flatnonzero((labels == 1) & np.all(pool == point, axis=1))
    return int(hits[0]) if len(hits) else None


def classify_minority(minority, full_train, m):
    """Label each minority row Safe, Danger or Noise from its ``m`` NNs in ``full_train``.

    A minority row's own copy in ``full_train`` is excluded from its
    neighbourhood; other identical rows still count.
    """
    x = features_of(minority)
    pool, labels = full_train.features, full_train.labels
    out = []
    for point in x:
        nb = knn(point, pool, m, exclude=_self_index(point, pool, labels))
        m_prime = int(np.sum(labels[nb.neighbor_indices] == 0))
        out.append(BorderlineLabel.from_count(m_prime, m))
    return out


def danger_indices(train, m):
    minority, _ = class_partition(train)
    labels = classify_minority(minority, train, m)
    return np.array([i for i, lab in enumerate(labels) if lab.kind is Borderline.DANGER], dtype=np.int64)


def borderline_smote(train, cfg, return_parents=False):
    """SMOTE seeded only from Danger minority points of ``train``.

    Neighbours for interpolation are the ``k`` nearest minority rows (any
    label band). Raises ``NoDangerPoints`` when the danger set is empty.
    Parent indices, when requested, refer to rows of the minority partition.
    """
    minority, _ = class_partition(train)
    x = minority.features
    if cfg.amount == 0:
        empty = np.empty((0, x.shape[1]))
        return (empty, np.empty((0, 2), dtype=np.int64)) if return_parents else empty
    danger = danger_indices(train, cfg.m)
    if len(danger) == 0:
        raise NoDangerPoints(f"no minority point has between {cfg.m / 2:g} and {cfg.m} majority neighbours")
    if x.shape[0] < cfg.k + 1:
        raise PoolTooSmall(f"need at least k+1={cfg.k + 1} minority rows, got {x.shape[0]}")
    neighbors = np.stack([knn(x[i], x, cfg.k, exclude=i).neighbor_indices for i in danger])
    rng = np.random.default_rng(cfg.seed)
    out, parents = _populate(x[danger], x, danger, neighbors, cfg.amount, rng)
    return (out, parents) if return_parents else out
