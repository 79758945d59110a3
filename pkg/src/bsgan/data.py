"""Dataset loading, preparation recipes, min-max scaling and stratified splits."""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import (
    ClassTooSmall,
    DimensionMismatch,
    EmptyClass,
    MissingFile,
    RecipeError,
    UnknownLabelValue,
    UnparseableCell,
)

BUNDLED_DATA_DIR = Path(__file__).parent / "datasets"
BUNDLED_RECIPE_DIR = Path(__file__).parent / "recipes"
DATA_DIR_ENV = "BSGAN_DATA_DIR"


def _frozen(a):
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Dataset:
    """Feature matrix with binary labels (1 = minority)."""

    features: np.ndarray
    labels: np.ndarray
    feature_names: tuple = ()

    def __post_init__(self):
        x = np.asarray(self.features, dtype=float)
        if x.ndim != 2:
            raise DimensionMismatch(f"features must be 2-D, got shape {x.shape}")
        y = np.asarray(self.labels).astype(np.int64)
        if y.shape != (x.shape[0],):
            raise DimensionMismatch(f"{x.shape[0]} rows but {y.shape} labels")
        if not np.all(np.isfinite(x)):
            raise ValueError("features contain NaN or infinite entries")
        if np.any((y != 0) & (y != 1)):
            raise ValueError("labels must be 0 or 1")
        names = tuple(self.feature_names) or tuple(f"x{i}" for i in range(x.shape[1]))
        if len(names) != x.shape[1]:
            raise DimensionMismatch(f"{len(names)} feature names for {x.shape[1]} columns")
        object.__setattr__(self, "features", _frozen(x))
        object.__setattr__(self, "labels", _frozen(y))
        object.__setattr__(self, "feature_names", names)

    @property
    def n_samples(self):
        return self.features.shape[0]

    @property
    def n_features(self):
        return self.features.shape[1]

    @property
    def n_minority(self):
        return int(self.labels.sum())

    @property
    def n_majority(self):
        return self.n_samples - self.n_minority

    def subset(self, rows):
        return Dataset(self.features[rows], self.labels[rows], self.feature_names)

    def with_extra_minority(self, rows):
        """Append synthetic minority rows (label 1) after the existing rows."""
        rows = np.asarray(rows, dtype=float).reshape(-1, self.n_features)
        return Dataset(
            np.vstack([self.features, rows]),
            np.concatenate([self.labels, np.ones(len(rows), dtype=np.int64)]),
            self.feature_names,
        )

    def equals(self, other):
        return (
            self.feature_names == other.feature_names
            and np.array_equal(self.features, other.features)
            and np.array_equal(self.labels, other.labels)
        )


@dataclass(frozen=True)
class PreparationRecipe:
    """How to turn a raw CSV into a binary-labelled :class:`Dataset`.

    Rows whose label is in neither value set are dropped when
    ``drop_unlisted`` is true, otherwise they raise ``UnknownLabelValue``.
    ``value_maps`` maps raw strings of a column to numbers (used for the
    abalone ``Sex`` column); ``expected`` holds the reference counts that
    ``validate_recipes`` checks.
    """

    id: str
    source_file: str
    label_column: str | int
    minority_values: frozenset
    majority_values: frozenset
    drop_columns: tuple = ()
    has_header: bool = True
    column_names: tuple = ()
    drop_unlisted: bool = True
    value_maps: dict = field(default_factory=dict)
    expected: dict = field(default_factory=dict)
    version: int = 1
    description: str = ""

    def __post_init__(self):
        mino = frozenset(str(v).strip() for v in self.minority_values)
        majo = frozenset(str(v).strip() for v in self.majority_values)
        if mino & majo:
            raise RecipeError(f"recipe {self.id!r}: label sets overlap on {sorted(mino & majo)}")
        if not mino or not majo:
            raise RecipeError(f"recipe {self.id!r}: both label sets must be nonempty")
        object.__setattr__(self, "minority_values", mino)
        object.__setattr__(self, "majority_values", majo)
        object.__setattr__(self, "drop_columns", tuple(self.drop_columns))
        object.__setattr__(self, "column_names", tuple(self.column_names))

    @classmethod
    def from_dict(cls, d):
        known = {
            "id", "source_file", "label_column", "minority_values", "majority_values",
            "drop_columns", "has_header", "column_names", "drop_unlisted", "value_maps",
            "expected", "version", "description",
        }
        unknown = set(d) - known
        if unknown:
            raise RecipeError(f"unknown recipe fields: {sorted(unknown)}")
        try:
            return cls(**d)
        except TypeError as exc:
            raise RecipeError(str(exc)) from None

    def to_dict(self):
        return {
            "id": self.id,
            "version": self.version,
            "description": self.description,
            "source_file": self.source_file,
            "has_header": self.has_header,
            "column_names": list(self.column_names),
            "label_column": self.label_column,
            "minority_values": sorted(self.minority_values),
            "majority_values": sorted(self.majority_values),
            "drop_columns": list(self.drop_columns),
            "drop_unlisted": self.drop_unlisted,
            "value_maps": self.value_maps,
            "expected": self.expected,
        }


def load_recipe(ref):
    """Load a recipe from a JSON path or a bundled recipe id (``"ecoli"``)."""
    path = Path(ref)
    if not path.suffix:
        path = BUNDLED_RECIPE_DIR / f"{ref}.json"
    if not path.is_file():
        raise MissingFile(f"no recipe at {path}")
    with open(path) as fh:
        return PreparationRecipe.from_dict(json.load(fh))


def bundled_recipe_ids():
    return sorted(p.stem for p in BUNDLED_RECIPE_DIR.glob("*.json"))


def resolve_source(recipe, data_dir=None):
    """Locate the raw file: absolute path, then ``data_dir``, ``$BSGAN_DATA_DIR``, bundled copies."""
    src = Path(recipe.source_file)
    if src.is_absolute():
        return src
    candidates = []
    for base in (data_dir, os.environ.get(DATA_DIR_ENV)):
        if base:
            candidates.append(Path(base) / src)
    candidates.append(BUNDLED_DATA_DIR / src)
    for c in candidates:
        if c.is_file():
            return c
    return candidates[0]


def load_csv(path, recipe):
    """Read ``path`` and apply ``recipe``; row order follows the file."""
    path = Path(path)
    if not path.is_file():
        raise MissingFile(f"dataset file not found: {path}")
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if recipe.has_header:
        if not rows:
            raise EmptyClass(f"{path} has no rows")
        header, rows = [c.strip() for c in rows[0]], rows[1:]
    elif recipe.column_names:
        header = list(recipe.column_names)
    else:
        header = [str(i) for i in range(len(rows[0]) if rows else 0)]

    label_idx = _column_index(header, recipe.label_column)
    drop = {_column_index(header, c) for c in recipe.drop_columns}
    feature_idx = [i for i in range(len(header)) if i != label_idx and i not in drop]
    maps = {_column_index(header, c): {str(k): float(v) for k, v in m.items()}
            for c, m in recipe.value_maps.items()}

    feats, labels = [], []
    for line_no, row in enumerate(rows, start=2 if recipe.has_header else 1):
        if len(row) != len(header):
            raise UnparseableCell(line_no, "<row>", ",".join(row))
        raw_label = row[label_idx].strip()
        if raw_label in recipe.minority_values:
            label = 1
        elif raw_label in recipe.majority_values:
            label = 0
        elif recipe.drop_unlisted:
            continue
        else:
            raise UnknownLabelValue(f"row {line_no}: label {raw_label!r} not in recipe {recipe.id!r}")
        values = []
        for i in feature_idx:
            cell = row[i].strip()
            if i in maps:
                if cell not in maps[i]:
                    raise UnparseableCell(line_no, header[i], cell)
                values.append(maps[i][cell])
                continue
            try:
                v = float(cell)
            except ValueError:
                raise UnparseableCell(line_no, header[i], cell) from None
            if not math.isfinite(v):
                raise UnparseableCell(line_no, header[i], cell)
            values.append(v)
        feats.append(values)
        labels.append(label)

    y = np.asarray(labels, dtype=np.int64)
    if y.sum() == 0 or y.sum() == len(y):
        raise EmptyClass(f"recipe {recipe.id!r} leaves a class empty "
                         f"({int(y.sum())} minority / {int(len(y) - y.sum())} majority)")
    x = np.asarray(feats, dtype=float).reshape(len(labels), len(feature_idx))
    return Dataset(x, y, tuple(header[i] for i in feature_idx))


def load_dataset(ref, data_dir=None):
    """Convenience: recipe reference -> (Dataset, recipe)."""
    recipe = ref if isinstance(ref, PreparationRecipe) else load_recipe(ref)
    return load_csv(resolve_source(recipe, data_dir), recipe), recipe


def _column_index(header, col):
    if isinstance(col, int):
        if not 0 <= col < len(header):
            raise RecipeError(f"column index {col} out of range for {len(header)} columns")
        return col
    try:
        return header.index(col)
    except ValueError:
        raise RecipeError(f"column {col!r} not found in {header}") from None


@dataclass(frozen=True, eq=False)
class ScaleParams:
    mins: np.ndarray
    maxs: np.ndarray

    def _span(self):
        span = self.maxs - self.mins
        return np.where(span > 0, span, 1.0)

    def transform(self, x):
        x = np.asarray(x, dtype=float)
        out = (x - self.mins) / self._span()
        const = self.maxs == self.mins
        if np.any(const):
            out[..., const] = 0.0
        return out

    def inverse_transform(self, x):
        x = np.asarray(x, dtype=float)
        const = self.maxs == self.mins
        out = x * (self.maxs - self.mins) + self.mins
        if np.any(const):
            out[..., const] = self.mins[const]
        return out

    def apply(self, d):
        return Dataset(self.transform(d.features), d.labels, d.feature_names)


def min_max_scale(d):
    """Scale every column to [0, 1]; constant columns become 0.

    Returns the scaled dataset and the per-column ``ScaleParams`` needed for
    ``inverse_transform`` or for scaling a held-out split with the same map.
    """
    mins = d.features.min(axis=0)
    maxs = d.features.max(axis=0)
    params = ScaleParams(_frozen(mins), _frozen(maxs))
    scaled = params.transform(d.features)
    np.clip(scaled, 0.0, 1.0, out=scaled)
    return Dataset(scaled, d.labels, d.feature_names), params


@dataclass(frozen=True, eq=False)
class Split:
    train: Dataset
    test: Dataset
    seed: int
    train_rows: np.ndarray
    test_rows: np.ndarray


def _round_half_up(x):
    return int(math.floor(x + 0.5))


def stratified_split(d, test_fraction=0.2, seed=0):
    """Per-class random split with ``round(test_fraction * n)`` test rows in total.

    Each class contributes ``floor(fraction * n_c)`` rows, and the leftover
    rows go to the classes with the largest remainders (lower label on ties).
    Rows keep their original relative order on both sides.
    """
    if not 0.0 < test_fraction < 1.0:
        raise ValueError(f"test_fraction must lie in (0, 1), got {test_fraction}")
    classes = [np.flatnonzero(d.labels == c) for c in (0, 1)]
    quota = [test_fraction * len(idx) for idx in classes]
    take = [int(math.floor(q)) for q in quota]
    leftover = _round_half_up(test_fraction * d.n_samples) - sum(take)
    for c in sorted((0, 1), key=lambda c: (-(quota[c] - take[c]), c))[:max(leftover, 0)]:
        take[c] += 1
    for c, idx in enumerate(classes):
        if not 1 <= take[c] <= len(idx) - 1:
            raise ClassTooSmall(
                f"class {c} has {len(idx)} rows; cannot place >=1 on each side of a "
                f"{test_fraction:.2f} split"
            )

    rng = np.random.default_rng(seed)
    test_rows = []
    for c, idx in enumerate(classes):
        test_rows.append(idx[rng.permutation(len(idx))[:take[c]]])
    test_rows = np.sort(np.concatenate(test_rows))
    mask = np.zeros(d.n_samples, dtype=bool)
    mask[test_rows] = True
    train_rows = np.flatnonzero(~mask)
    return Split(d.subset(train_rows), d.subset(test_rows), int(seed),
                 _frozen(train_rows), _frozen(test_rows))


def class_partition(d):
    """Return ``(minority, majority)`` sub-datasets, each in original row order."""
    minority = np.flatnonzero(d.labels == 1)
    majority = np.flatnonzero(d.labels == 0)
    if len(minority) == 0 or len(majority) == 0:
        raise EmptyClass(f"need both classes, got {len(minority)} minority / {len(majority)} majority")
    return d.subset(minority), d.subset(majority)


def features_of(x: Dataset | np.ndarray | Sequence) -> np.ndarray:
    if isinstance(x, Dataset):
        return x.features
    return np.atleast_2d(np.asarray(x, dtype=float))
