"""Interventional Shapley attributions: exact enumeration and permutation sampling."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import kernels
from .data import ClassLabel
from .preprocess import FeatureMatrix

MAX_EXACT_FEATURES = 20


class EnumerationLimitError(ValueError):
    pass


class FeatureMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class BackgroundSet:
    rows: np.ndarray
    feature_names: tuple[str, ...] = ()

    def __post_init__(self):
        rows = np.ascontiguousarray(np.atleast_2d(self.rows), dtype=np.float64)
        if rows.shape[0] < 1:
            raise ValueError("background set needs at least one row")
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "feature_names", tuple(self.feature_names))

    @property
    def size(self) -> int:
        return self.rows.shape[0]


def background_sample(m: FeatureMatrix, size: int = 100, seed: int = 0) -> BackgroundSet:
    """Deterministic sample of ``min(size, n)`` real (non-SMOTE) rows."""
    real = np.flatnonzero(~m.synthetic)
    if real.size == 0:
        raise ValueError("no real rows to draw a background from")
    k = min(size, real.size)
    pick = np.sort(np.random.default_rng(seed).choice(real, size=k, replace=False))
    return BackgroundSet(m.X[pick], m.feature_names)


@dataclass(frozen=True)
class AttributionMatrix:
    feature_names: tuple[str, ...]
    base_value: float
    values: np.ndarray  # (n_samples, n_features)
    target: str | None = None
    method: str = "exact"
    std_error: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.ndim != 2 or vals.shape[1] != len(self.feature_names):
            raise ValueError("values must be (n_samples, n_features)")
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        object.__setattr__(self, "base_value", float(self.base_value))

    @property
    def n_samples(self) -> int:
        return self.values.shape[0]

    def to_json(self) -> dict:
        out = {
            "feature_names": list(self.feature_names),
            "base_value": self.base_value,
            "target": self.target,
            "method": self.method,
            "values": self.values.tolist(),
        }
        if self.std_error is not None:
            se = np.asarray(self.std_error, dtype=float)
            out["std_error"] = [[None if math.isnan(v) else v for v in row] for row in se.tolist()]
        return out

    @classmethod
    def from_json(cls, obj) -> "AttributionMatrix":
        for key in ("feature_names", "base_value", "values"):
            if key not in obj:
                raise ValueError(f"attribution object is missing field {key!r}")
        names = obj["feature_names"]
        vals = np.array(obj["values"], dtype=float).reshape(-1, len(names))
        se = obj.get("std_error")
        if se is not None:
            se = np.array([[math.nan if v is None else v for v in row] for row in se], dtype=float)
        return cls(tuple(names), obj["base_value"], vals, obj.get("target"), obj.get("method", "external"), se)


@dataclass(frozen=True)
class ImportanceVector:
    feature_names: tuple[str, ...]
    scores: tuple[float, ...]
    source: str  # "FI" | "MeanAbsShap"
    signed_means: tuple[float, ...] | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        names = tuple(self.feature_names)
        scores = tuple(float(s) for s in self.scores)
        if len(names) != len(scores):
            raise ValueError("feature_names and scores differ in length")
        if len(set(names)) != len(names):
            raise ValueError("feature names must be unique")
        if not all(math.isfinite(s) for s in scores):
            raise ValueError("importance scores must be finite")
        if self.source not in ("FI", "MeanAbsShap"):
            raise ValueError(f"unknown importance source {self.source!r}")
        if self.source == "MeanAbsShap" and any(s < 0 for s in scores):
            raise ValueError("mean |SHAP| scores must be non-negative")
        signed = None if self.signed_means is None else tuple(float(v) for v in self.signed_means)
        if signed is not None and len(signed) != len(names):
            raise ValueError("signed_means length mismatch")
        object.__setattr__(self, "feature_names", names)
        object.__setattr__(self, "scores", scores)
        object.__setattr__(self, "signed_means", signed)

    def as_dict(self) -> dict[str, float]:
        return dict(zip(self.feature_names, self.scores))

    def to_json(self) -> dict:
        out = {"feature_names": list(self.feature_names), "scores": list(self.scores), "source": self.source}
        if self.signed_means is not None:
            out["signed_means"] = list(self.signed_means)
        out.update(self.meta)
        return out

    @classmethod
    def from_json(cls, obj) -> "ImportanceVector":
        for key in ("feature_names", "scores", "source"):
            if key not in obj:
                raise ValueError(f"importance object is missing field {key!r}")
        meta = {k: obj[k] for k in ("scenario", "task") if k in obj}
        return cls(tuple(obj["feature_names"]), tuple(obj["scores"]), obj["source"],
                   obj.get("signed_means"), meta)


# ---------------------------------------------------------------- value functions

def _target_columns(p, targets) -> tuple[Callable[[np.ndarray], np.ndarray], list]:
    """Return ``F(X) -> (n, T)`` and the list of explained target labels."""
    if not hasattr(p, "predict_proba"):
        fn = p
        return (lambda X: np.asarray(fn(X), dtype=np.float64).reshape(X.shape[0], 1)), [None]
    classes = list(p.classes)
    if targets is None:
        if len(classes) != 2:
            raise ValueError("multiclass predictors need explicit targets (see explain_targets)")
        targets = [classes[1]]
    cols = []
    for t in targets:
        t = int(ClassLabel.parse(t)) if isinstance(t, str) else int(t)
        if t not in classes:
            raise ValueError(f"target {t} is not one of the predictor classes {classes}")
        cols.append(classes.index(t))
    return (lambda X: p.predict_proba(X)[:, cols]), [classes[c] for c in cols]


def _target_name(t) -> str | None:
    if t is None:
        return None
    try:
        return ClassLabel(t).name
    except ValueError:
        return str(t)


def _weights(n: int) -> np.ndarray:
    # |S|! (n - |S| - 1)! / n!
    return np.array([1.0 / (n * math.comb(n - 1, s)) for s in range(n)])


def _exact_generic(F, X, bg, chunk_rows=2_000_000):
    n_rows, d = X.shape
    b = bg.shape[0]
    if d == 0:
        return np.zeros((n_rows, 0, 1))
    n_masks = 1 << d
    masks = ((np.arange(n_masks)[:, None] >> np.arange(d)[None, :]) & 1).astype(bool)
    sizes = masks.sum(axis=1)
    w = _weights(d)
    per_chunk = max(1, chunk_rows // b)
    out = None
    for i in range(n_rows):
        v = []
        for start in range(0, n_masks, per_chunk):
            mk = masks[start:start + per_chunk]
            comp = np.where(mk[:, None, :], X[i][None, None, :], bg[None, :, :]).reshape(-1, d)
            fv = F(comp)
            v.append(fv.reshape(mk.shape[0], b, -1).mean(axis=1))
        v = np.concatenate(v)  # (n_masks, T)
        if out is None:
            out = np.zeros((n_rows, d, v.shape[1]))
        for j in range(d):
            without = np.flatnonzero(~masks[:, j])
            out[i, j] = (w[sizes[without]][:, None] * (v[without | (1 << j)] - v[without])).sum(axis=0)
    return out


def _exact_trees(p, cols, X, bg):
    n_rows, d = X.shape
    out = np.zeros((n_rows, d, len(cols)))
    for weight, tree in p.members():
        for t, c in enumerate(cols):
            value = np.ascontiguousarray(tree.value[:, c])
            out[:, :, t] += weight * kernels.exact_tree_pairs(
                tree.feature, tree.threshold, tree.left, tree.right, value, X, bg)
    return out


def _check_features(p, names: Sequence[str]):
    pn = getattr(p, "feature_names", None)
    if pn is None:
        return
    if tuple(pn) != tuple(names):
        diff = sorted(set(pn) ^ set(names))
        raise FeatureMismatchError(
            f"feature mismatch between predictor and data: {diff if diff else 'same names, different order'}"
        )


def _exact_all(p, X, bg, targets):
    X = np.ascontiguousarray(np.atleast_2d(X), dtype=np.float64)
    bg_rows = bg.rows if isinstance(bg, BackgroundSet) else np.atleast_2d(np.asarray(bg, dtype=np.float64))
    d = X.shape[1]
    if d > MAX_EXACT_FEATURES:
        raise EnumerationLimitError(
            f"exact enumeration is limited to {MAX_EXACT_FEATURES} features (got {d}); use sampled_shapley"
        )
    F, labels = _target_columns(p, targets)
    base = F(bg_rows).mean(axis=0)
    if hasattr(p, "members") and hasattr(p, "classes"):
        cols = [list(p.classes).index(t) for t in labels]
        phi = _exact_trees(p, cols, X, bg_rows)
    else:
        phi = _exact_generic(F, X, bg_rows)
    return phi, base, labels


def exact_shapley(p, x, bg, target=None):
    """Exact Shapley values of one row by subset enumeration.

    ``p`` is a Predictor (the probability of ``target`` is explained; binary
    default is the second class) or a plain callable ``f(X) -> (n,)``.
    Returns ``(phi, base_value)``.
    """
    phi, base, _ = _exact_all(p, np.atleast_2d(x), bg, None if target is None else [target])
    return phi[0, :, 0], float(base[0])


def _sampled_plan(x, bg_rows, n_permutations, rng):
    """Antithetic walks: permutation 2k+1 reverses 2k and both share one background row.

    Reference rows cycle through the background from a seeded random offset, so
    every walk sees a uniformly drawn row and the estimate stays unbiased.
    """
    d = x.shape[0]
    b = bg_rows.shape[0]
    forward = np.argsort(rng.random(((n_permutations + 1) // 2, d)), axis=1)
    perms = np.empty((n_permutations, d), dtype=np.int64)
    perms[0::2] = forward
    perms[1::2] = forward[:n_permutations // 2, ::-1]
    ranks = np.argsort(perms, axis=1)
    offset = int(rng.integers(b))
    refs = bg_rows[(offset + np.arange(n_permutations) // 2) % b]
    steps = np.arange(d + 1)
    mask = ranks[:, None, :] < steps[None, :, None]  # (P, d+1, d)
    comp = np.where(mask, x[None, None, :], refs[:, None, :]).reshape(-1, d)
    return ranks, comp


def _sampled_credit(V, ranks):
    """Per-feature mean marginal credit and its standard error from walk outputs V (P, d+1, T).

    The standard error treats each antithetic pair as one draw.
    """
    n_permutations = V.shape[0]
    k = np.arange(n_permutations)[:, None]
    credits = V[k, ranks + 1] - V[k, ranks]  # (P, d, T)
    phi = credits.mean(axis=0)
    n_pairs = n_permutations // 2
    if n_pairs > 1:
        pairs = 0.5 * (credits[0:2 * n_pairs:2] + credits[1:2 * n_pairs:2])
        se = pairs.std(axis=0, ddof=1) / math.sqrt(n_pairs)
    else:
        se = np.full_like(phi, np.nan)
    return phi, se, V[0, -1]


def _correct(phi, residual):
    """Spread the additivity residual over features in proportion to |phi|."""
    mag = np.abs(phi)
    total = mag.sum(axis=0)
    out = phi.copy()
    for t in range(phi.shape[1]):
        if residual[t] == 0:
            continue
        if total[t] > 0:
            out[:, t] -= residual[t] * mag[:, t] / total[t]
        else:
            out[:, t] -= residual[t] / phi.shape[0]
    return out


def _sampled_all(p, X, bg, n_permutations, seed, targets, correct, row_seeds=None):
    if n_permutations < 1:
        raise ValueError("n_permutations must be >= 1")
    X = np.ascontiguousarray(np.atleast_2d(X), dtype=np.float64)
    bg_rows = bg.rows if isinstance(bg, BackgroundSet) else np.atleast_2d(np.asarray(bg, dtype=np.float64))
    F, labels = _target_columns(p, targets)
    base = F(bg_rows).mean(axis=0)
    n, d = X.shape
    phi = np.zeros((n, d, len(labels)))
    se = np.zeros_like(phi)
    rows_per_call = max(1, 200_000 // (n_permutations * (d + 1)))
    for start in range(0, n, rows_per_call):
        idx = range(start, min(n, start + rows_per_call))
        plans = [
            _sampled_plan(X[i], bg_rows, n_permutations,
                          np.random.default_rng(seed if row_seeds is None else row_seeds[i]))
            for i in idx
        ]
        V = F(np.concatenate([c for _, c in plans])).reshape(len(plans), n_permutations, d + 1, -1)
        for off, i in enumerate(idx):
            ph, s, fx = _sampled_credit(V[off], plans[off][0])
            if correct:
                ph = _correct(ph, base + ph.sum(axis=0) - fx)
            phi[i], se[i] = ph, s
    return phi, base, se, labels


def sampled_shapley(p, x, bg, n_permutations: int = 1000, seed: int = 0, target=None, correct: bool = True):
    """Monte-Carlo Shapley estimate of one row by random feature orderings.

    Orderings come in antithetic (forward, reversed) pairs; pair ``k`` is
    walked against background row ``(offset + k) mod b`` with a seeded random
    offset. Returns ``(phi, base_value, std_error)``.
    With ``correct`` the residual ``base + sum(phi) - f(x)`` is removed in
    proportion to ``|phi|``.
    """
    phi, base, se, _ = _sampled_all(p, np.atleast_2d(x), bg, n_permutations, seed,
                                    None if target is None else [target], correct)
    return phi[0, :, 0], float(base[0]), se[0, :, 0]


@dataclass(frozen=True)
class Exact:
    def describe(self) -> str:
        return "exact"


@dataclass(frozen=True)
class Sampled:
    n_permutations: int = 1000
    seed: int = 0
    correct: bool = True

    def describe(self) -> str:
        return f"sampled(n_permutations={self.n_permutations},seed={self.seed},correct={self.correct})"


def _row_seeds(seed: int, n: int) -> list[int]:
    return [int(np.random.SeedSequence([seed, i]).generate_state(1)[0]) for i in range(n)]


def explain_targets(p, m: FeatureMatrix, bg, method=Exact(), targets=None) -> list[AttributionMatrix]:
    """Attribute every row of ``m``; one matrix per explained target.

    Binary predictors explain the positive (second) class; multiclass ones
    explain every class unless ``targets`` is given.
    """
    _check_features(p, m.feature_names)
    if isinstance(bg, BackgroundSet) and bg.feature_names and bg.feature_names != m.feature_names:
        raise FeatureMismatchError("background feature order differs from the explained matrix")
    if targets is None and hasattr(p, "classes") and len(p.classes) > 2:
        targets = list(p.classes)
    if isinstance(method, Sampled):
        phi, base, se, labels = _sampled_all(p, m.X, bg, method.n_permutations, method.seed, targets,
                                             method.correct, _row_seeds(method.seed, m.n_rows))
    else:
        phi, base, labels = _exact_all(p, m.X, bg, targets)
        se = None
    return [
        AttributionMatrix(m.feature_names, float(base[t]), phi[:, :, t], _target_name(lbl),
                          method.describe(), None if se is None else se[:, :, t])
        for t, lbl in enumerate(labels)
    ]


def explain_dataset(p, m: FeatureMatrix, bg, method=Exact(), target=None) -> AttributionMatrix:
    """Attribution matrix of one target for every row of ``m``."""
    mats = explain_targets(p, m, bg, method, None if target is None else [target])
    if len(mats) != 1:
        raise ValueError("multiclass predictors need an explicit target; use explain_targets")
    return mats[0]


def summarize(a) -> ImportanceVector:
    """Mean |SHAP| and mean signed SHAP per feature.

    A sequence of matrices (multiclass) is averaged over targets.
    """
    mats = [a] if isinstance(a, AttributionMatrix) else list(a)
    if not mats or any(m.n_samples == 0 for m in mats):
        raise ValueError("cannot summarize an empty attribution matrix")
    names = mats[0].feature_names
    if any(m.feature_names != names for m in mats):
        raise FeatureMismatchError("attribution matrices disagree on features")
    scores = np.mean([np.abs(m.values).mean(axis=0) for m in mats], axis=0)
    signed = np.mean([m.values.mean(axis=0) for m in mats], axis=0)
    return ImportanceVector(names, tuple(scores.tolist()), "MeanAbsShap", tuple(signed.tolist()))


def write_attributions(path, mats: Sequence[AttributionMatrix], meta: dict | None = None) -> None:
    obj = dict(meta or {})
    if len(mats) == 1:
        obj.update(mats[0].to_json())
    else:
        obj["matrices"] = [m.to_json() for m in mats]
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, separators=(",", ":"))
        fh.write("\n")


def read_attributions(path) -> tuple[list[AttributionMatrix], dict]:
    """Read an attribution file: a single matrix object or ``{"matrices": [...]}``."""
    with open(path, encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}: line {exc.lineno}: {exc.msg}") from None
    meta = {k: obj[k] for k in ("scenario", "task") if k in obj}
    try:
        if "matrices" in obj:
            mats = [AttributionMatrix.from_json(o) for o in obj["matrices"]]
        else:
            mats = [AttributionMatrix.from_json(obj)]
    except (ValueError, TypeError) as exc:
        raise ValueError(f"{path}: {exc}") from None
    return mats, meta


def write_importance(path, v: ImportanceVector) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(v.to_json(), fh, separators=(",", ":"))
        fh.write("\n")


def read_importance(path) -> ImportanceVector:
    with open(path, encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}: line {exc.lineno}: {exc.msg}") from None
    try:
        return ImportanceVector.from_json(obj)
    except (ValueError, TypeError) as exc:
        raise ValueError(f"{path}: {exc}") from None
