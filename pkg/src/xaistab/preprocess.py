"""Feature engineering, subject-level splitting and fold-local SMOTE."""
from __future__ import annotations

import csv
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .data import ClassLabel, ColumnKind, Dataset, DomainTag


class PreprocessError(ValueError):
    pass


class SplitError(ValueError):
    pass


@dataclass(frozen=True)
class PreprocessConfig:
    missing_threshold: float = 0.5
    cardinality_threshold: int = 50

    def __post_init__(self):
        if not 0 < self.missing_threshold <= 1:
            raise ValueError("missing_threshold must be in (0, 1]")
        if self.cardinality_threshold < 2:
            raise ValueError("cardinality_threshold must be >= 2")


@dataclass(frozen=True)
class NumericStats:
    median: float
    mean: float
    std: float


@dataclass(frozen=True)
class CategoricalStats:
    mode: str
    encoder: str  # "onehot" | "frequency"
    categories: tuple[str, ...]
    counts: tuple[int, ...]


@dataclass(frozen=True)
class FittedPreprocessor:
    kept_columns: tuple[str, ...]
    numeric: dict[str, NumericStats]
    categorical: dict[str, CategoricalStats]
    output_feature_names: tuple[str, ...]
    feature_sources: dict[str, str]  # output feature -> source column
    column_domains: dict[str, DomainTag]

    def feature_domains(self) -> dict[str, DomainTag]:
        return {f: self.column_domains[src] for f, src in self.feature_sources.items()}


@dataclass(frozen=True)
class FeatureMatrix:
    feature_names: tuple[str, ...]
    X: np.ndarray
    y: np.ndarray
    subject_id: np.ndarray
    synthetic: np.ndarray = None

    def __post_init__(self):
        X = np.asarray(self.X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != len(self.feature_names):
            raise ValueError("X shape does not match feature_names")
        if not np.isfinite(X).all():
            raise ValueError("FeatureMatrix cells must be finite")
        if len(set(self.feature_names)) != len(self.feature_names):
            raise ValueError("feature names must be unique")
        n = X.shape[0]
        y = np.asarray(self.y, dtype=np.int64)
        sid = np.array([str(s) for s in self.subject_id], dtype=object)
        syn = np.zeros(n, dtype=bool) if self.synthetic is None else np.asarray(self.synthetic, dtype=bool)
        if y.shape != (n,) or sid.shape != (n,) or syn.shape != (n,):
            raise ValueError("per-row arrays must match the number of rows")
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "subject_id", sid)
        object.__setattr__(self, "synthetic", syn)

    @property
    def n_rows(self) -> int:
        return self.X.shape[0]

    def take(self, idx) -> "FeatureMatrix":
        idx = np.asarray(idx, dtype=np.int64)
        return FeatureMatrix(self.feature_names, self.X[idx], self.y[idx],
                             self.subject_id[idx], self.synthetic[idx])

    def for_subjects(self, subjects) -> "FeatureMatrix":
        keep = np.isin(self.subject_id, np.array(list(subjects), dtype=object))
        return self.take(np.flatnonzero(keep))

    def label_counts(self) -> dict[int, int]:
        return dict(sorted(Counter(self.y.tolist()).items()))


def write_feature_matrix(m: FeatureMatrix, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(m.feature_names) + ["label", "subject_id", "synthetic"])
        for i in range(m.n_rows):
            w.writerow([repr(float(v)) for v in m.X[i]]
                       + [ClassLabel(m.y[i]).name, m.subject_id[i], int(m.synthetic[i])])


def read_feature_matrix(path) -> FeatureMatrix:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[-3:] != ["label", "subject_id", "synthetic"]:
            raise ValueError(f"{path}: header must end with label, subject_id, synthetic")
        X, y, sid, syn = [], [], [], []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise ValueError(f"{path}:{lineno}: expected {len(header)} fields")
            try:
                X.append([float(v) for v in row[:-3]])
                y.append(int(ClassLabel.parse(row[-3])))
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
            sid.append(row[-2])
            syn.append(row[-1] == "1")
    names = header[:-3]
    return FeatureMatrix(tuple(names), np.array(X, dtype=np.float64).reshape(-1, len(names)),
                         y, sid, syn)


def _mode(values: Sequence[str]) -> str:
    counts = Counter(values)
    top = max(counts.values())
    return min(v for v, c in counts.items() if c == top)


def fit_preprocessor(train: Dataset, cfg: PreprocessConfig = PreprocessConfig()) -> FittedPreprocessor:
    """Fit imputation, scaling and encoding statistics on ``train`` only."""
    if train.n_rows == 0:
        raise PreprocessError("cannot fit a preprocessor on an empty dataset")
    kept, numeric, categorical = [], {}, {}
    names, sources = [], {}
    for col in train.columns:
        miss = col.missing
        if miss.mean() > cfg.missing_threshold or miss.all():
            continue
        kept.append(col.name)
        if col.kind is ColumnKind.NUMERIC:
            vals = col.values[~miss]
            std = float(np.std(vals))
            numeric[col.name] = NumericStats(float(np.median(vals)), float(np.mean(vals)),
                                             std if std > 0 else 1.0)
            out = [f"scaler_{col.name}"]
        else:
            vals = [v for v in col.values if v is not None]
            counts = Counter(vals)
            cats = tuple(sorted(counts))
            enc = "frequency" if len(cats) > cfg.cardinality_threshold else "onehot"
            categorical[col.name] = CategoricalStats(_mode(vals), enc, cats,
                                                     tuple(counts[c] for c in cats))
            out = [f"freq_{col.name}"] if enc == "frequency" else [f"ohe_{col.name}_{c}" for c in cats]
        for f in out:
            if f in sources:
                raise PreprocessError(f"encoded feature name collision: {f}")
            sources[f] = col.name
        names.extend(out)
    return FittedPreprocessor(tuple(kept), numeric, categorical, tuple(names), sources,
                              train.domain_map())


def apply_preprocessor(p: FittedPreprocessor, d: Dataset) -> FeatureMatrix:
    """Impute, scale and encode ``d`` with statistics frozen in ``p``."""
    present = set(d.column_names)
    for name in p.kept_columns:
        if name not in present:
            raise PreprocessError(f"column {name!r} required by the preprocessor is missing")
    blocks = []
    for name in p.kept_columns:
        col = d.column(name)
        if name in p.numeric:
            st = p.numeric[name]
            vals = np.where(np.isnan(col.values), st.median, col.values)
            blocks.append(((vals - st.mean) / st.std)[:, None])
            continue
        st = p.categorical[name]
        vals = [st.mode if v is None else v for v in col.values]
        if st.encoder == "frequency":
            table = dict(zip(st.categories, st.counts))
            blocks.append(np.array([table.get(v, 0) for v in vals], dtype=np.float64)[:, None])
        else:
            index = {c: k for k, c in enumerate(st.categories)}
            block = np.zeros((d.n_rows, len(st.categories)))
            for i, v in enumerate(vals):
                k = index.get(v)
                if k is not None:
                    block[i, k] = 1.0
            blocks.append(block)
    X = np.hstack(blocks) if blocks else np.zeros((d.n_rows, 0))
    return FeatureMatrix(p.output_feature_names, X, d.label, d.subject_id)


@dataclass(frozen=True)
class SplitPlan:
    train_subjects: tuple[str, ...]
    test_subjects: tuple[str, ...]
    folds: tuple[tuple[tuple[str, ...], tuple[str, ...]], ...] = ()

    def with_folds(self, folds) -> "SplitPlan":
        return SplitPlan(self.train_subjects, self.test_subjects, tuple(folds))


def subject_split(d: Dataset, test_fraction: float = 0.2, seed: int = 0) -> SplitPlan:
    """Shuffle subjects and send the first ceil(fraction * n) to the test side."""
    if not 0 < test_fraction < 1:
        raise SplitError("test_fraction must be in (0, 1)")
    subjects = sorted(d.subjects())
    if len(subjects) < 2:
        raise SplitError("need at least 2 subjects to split")
    order = np.random.default_rng(seed).permutation(len(subjects))
    n_test = math.ceil(test_fraction * len(subjects))
    n_test = min(n_test, len(subjects) - 1)
    shuffled = [subjects[i] for i in order]
    return SplitPlan(tuple(sorted(shuffled[n_test:])), tuple(sorted(shuffled[:n_test])))


def kfold_subjects(train_subjects: Sequence[str], k: int = 10, seed: int = 0):
    """Partition subjects into ``k`` validation groups whose sizes differ by at most one.

    Returns a tuple of ``(fold_train_subjects, validation_subjects)`` pairs.
    """
    subjects = sorted(train_subjects)
    if k < 2:
        raise SplitError("k must be >= 2")
    if k > len(subjects):
        raise SplitError(f"k={k} exceeds the number of subjects ({len(subjects)})")
    order = np.random.default_rng(seed).permutation(len(subjects))
    groups = np.array_split(order, k)
    folds = []
    for g in groups:
        val = tuple(sorted(subjects[i] for i in g))
        vs = set(val)
        folds.append((tuple(s for s in subjects if s not in vs), val))
    return tuple(folds)


def _nearest_neighbors(P: np.ndarray, k: int, chunk: int = 64) -> np.ndarray:
    out = np.empty((P.shape[0], k), dtype=np.int64)
    for start in range(0, P.shape[0], chunk):
        stop = min(start + chunk, P.shape[0])
        d2 = ((P[start:stop, None, :] - P[None, :, :]) ** 2).sum(axis=2)
        d2[np.arange(stop - start), np.arange(start, stop)] = np.inf
        out[start:stop] = np.argsort(d2, axis=1, kind="stable")[:, :k]
    return out


def smote_oversample(m: FeatureMatrix, k_neighbors: int = 5, seed: int = 0) -> FeatureMatrix:
    """Oversample every non-majority label up to the majority count.

    Synthetic rows interpolate between a random minority row and one of its
    k nearest same-label neighbours (distance ties broken by row index).
    """
    counts = m.label_counts()
    if len(counts) < 2:
        raise PreprocessError("SMOTE needs at least 2 labels")
    majority = max(counts.values())
    rng = np.random.default_rng(seed)
    new_X, new_y, new_sid = [], [], []
    for label, count in counts.items():
        if count == majority:
            continue
        if count < 2:
            raise PreprocessError(f"label {ClassLabel(label).name} has a single row; SMOTE needs 2")
        idx = np.flatnonzero(m.y == label)
        P = m.X[idx]
        k = min(k_neighbors, count - 1)
        neigh = _nearest_neighbors(P, k)
        n_new = majority - count
        base = rng.integers(0, count, size=n_new)
        pick = rng.integers(0, k, size=n_new)
        lam = rng.uniform(0.0, 1.0, size=n_new)
        nn = neigh[base, pick]
        new_X.append(P[base] + lam[:, None] * (P[nn] - P[base]))
        new_y.append(np.full(n_new, label))
        name = ClassLabel(label).name
        new_sid.extend(f"__smote_{name}_{i}" for i in range(n_new))
    if not new_X:
        return m
    X = np.vstack([m.X] + new_X)
    y = np.concatenate([m.y] + new_y)
    sid = np.concatenate([m.subject_id, np.array(new_sid, dtype=object)])
    syn = np.concatenate([m.synthetic, np.ones(len(new_sid), dtype=bool)])
    return FeatureMatrix(m.feature_names, X, y, sid, syn)
