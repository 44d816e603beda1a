"""Reference classifiers, evaluation metrics, model selection and permutation importance."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from functools import cached_property
from typing import Callable, Protocol, Sequence

import numpy as np

from . import kernels
from .data import ClassLabel
from .preprocess import FeatureMatrix, smote_oversample


class ModelError(ValueError):
    pass


class Predictor(Protocol):
    feature_names: tuple[str, ...]
    classes: tuple[int, ...]

    def predict_proba(self, X: np.ndarray) -> np.ndarray: ...


@dataclass
class FunctionPredictor:
    """Wrap ``fn(X) -> probabilities (n, n_classes)`` as a Predictor."""

    fn: Callable[[np.ndarray], np.ndarray]
    feature_names: tuple[str, ...]
    classes: tuple[int, ...] = (0, 1)

    def predict_proba(self, X):
        return np.asarray(self.fn(np.atleast_2d(np.asarray(X, dtype=np.float64))), dtype=np.float64)


@dataclass(frozen=True)
class Tree:
    """Flat binary tree. ``feature[i] == -1`` marks a leaf; rows with
    ``x[feature] <= threshold`` go left."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray  # (n_nodes, n_classes)

    def __post_init__(self):
        for name, dt in (("feature", np.int32), ("threshold", np.float64),
                         ("left", np.int32), ("right", np.int32), ("value", np.float64)):
            object.__setattr__(self, name, np.ascontiguousarray(getattr(self, name), dtype=dt))

    @property
    def n_nodes(self) -> int:
        return self.feature.shape[0]

    def depth(self) -> int:
        best, stack = 0, [(0, 0)]
        while stack:
            node, d = stack.pop()
            best = max(best, d)
            if self.feature[node] >= 0:
                stack += [(self.left[node], d + 1), (self.right[node], d + 1)]
        return best

    def used_features(self) -> np.ndarray:
        return np.unique(self.feature[self.feature >= 0])

    def apply(self, X) -> np.ndarray:
        X = np.ascontiguousarray(X, dtype=np.float64)
        return kernels.tree_apply(self.feature, self.threshold, self.left, self.right, X)

    def predict_proba(self, X) -> np.ndarray:
        return self.value[self.apply(X)]

    def to_json(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": [float(t) for t in self.threshold],
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
        }

    @classmethod
    def from_json(cls, obj) -> "Tree":
        return cls(np.array(obj["feature"]), np.array(obj["threshold"], dtype=float),
                   np.array(obj["left"]), np.array(obj["right"]), np.array(obj["value"], dtype=float))


@dataclass(frozen=True)
class TreeParams:
    max_depth: int = 6
    min_leaf: int = 1
    max_bins: int = 255

    def __post_init__(self):
        if self.max_depth < 0 or self.min_leaf < 1 or self.max_bins < 2:
            raise ValueError("invalid tree parameters")


@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 25
    max_depth: int = 6
    min_leaf: int = 1
    max_features: float = 0.6  # fraction of features drawn per tree
    bootstrap: bool = True
    max_bins: int = 255


def bin_features(X: np.ndarray, max_bins: int = 255):
    """Per-feature split thresholds and bin codes.

    Thresholds are midpoints between adjacent distinct values; when a feature
    has more than ``max_bins`` distinct values they are thinned to quantiles.
    Code ``b`` means ``thresholds[b-1] < x <= thresholds[b]``.
    """
    n, d = X.shape
    codes = np.empty((n, d), dtype=np.int32)
    thresholds, n_bins = [], np.empty(d, dtype=np.int32)
    for j in range(d):
        uniq = np.unique(X[:, j])
        mids = (uniq[:-1] + uniq[1:]) / 2.0
        if uniq.size > max_bins:
            qs = np.quantile(X[:, j], np.linspace(0, 1, max_bins + 1)[1:-1])
            mids = np.unique(mids[np.clip(np.searchsorted(uniq, qs, side="right") - 1, 0, mids.size - 1)])
        thresholds.append(mids)
        codes[:, j] = np.searchsorted(mids, X[:, j], side="left")
        n_bins[j] = mids.size + 1
    return codes, thresholds, n_bins


def _grow(codes, thresholds, n_bins, y, n_classes, rows, features, params) -> Tree:
    feature, threshold, left, right, value = [], [], [], [], []
    features = np.ascontiguousarray(features, dtype=np.int32)

    def new_node(rows):
        counts = np.bincount(y[rows], minlength=n_classes)
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(counts / counts.sum())
        return len(feature) - 1, counts

    root, counts = new_node(rows)
    stack = [(root, rows, 0, counts)]
    while stack:
        node, rows, depth, counts = stack.pop()
        if depth >= params.max_depth or rows.size < 2 * params.min_leaf or (counts > 0).sum() <= 1:
            continue
        f, b, score, parent = kernels.best_split(codes, rows, y, n_classes, features, n_bins,
                                                 params.min_leaf)
        # zero-gain splits are allowed so that XOR-like structure can be found
        if f < 0 or score < parent * (1 - 1e-12):
            continue
        go_left = codes[rows, f] <= b
        l_id, l_counts = new_node(rows[go_left])
        r_id, r_counts = new_node(rows[~go_left])
        feature[node] = f
        threshold[node] = float(thresholds[f][b])
        left[node], right[node] = l_id, r_id
        # right pushed first so the left subtree is numbered first
        stack.append((r_id, rows[~go_left], depth + 1, r_counts))
        stack.append((l_id, rows[go_left], depth + 1, l_counts))
    return Tree(np.array(feature), np.array(threshold), np.array(left), np.array(right),
                np.array(value).reshape(len(feature), n_classes))


def _classes_and_codes(m: FeatureMatrix, classes):
    if classes is None:
        classes = tuple(sorted(set(m.y.tolist())))
    classes = tuple(int(c) for c in classes)
    index = {c: k for k, c in enumerate(classes)}
    try:
        y = np.array([index[v] for v in m.y.tolist()], dtype=np.int32)
    except KeyError as exc:
        raise ModelError(f"training label {exc.args[0]} not among classes {classes}") from None
    return classes, y


@dataclass(frozen=True)
class TreeModel:
    tree: Tree
    feature_names: tuple[str, ...]
    classes: tuple[int, ...]
    params: TreeParams = TreeParams()

    def predict_proba(self, X) -> np.ndarray:
        return self.tree.predict_proba(X)

    def members(self):
        return [(1.0, self.tree)]

    def to_json(self) -> dict:
        return {"family": "tree", "params": asdict(self.params), "feature_names": list(self.feature_names),
                "classes": [ClassLabel(c).name for c in self.classes], "trees": [self.tree.to_json()]}


@dataclass(frozen=True)
class ForestModel:
    trees: tuple[Tree, ...]
    feature_names: tuple[str, ...]
    classes: tuple[int, ...]
    params: ForestParams = ForestParams()
    seeds: tuple[int, ...] = ()

    @cached_property
    def _packed(self):
        offsets = np.cumsum([0] + [t.n_nodes for t in self.trees[:-1]]).astype(np.int32)

        def shift(children, off):
            return np.where(children >= 0, children + off, -1)

        return (
            np.concatenate([t.feature for t in self.trees]).astype(np.int32),
            np.concatenate([t.threshold for t in self.trees]),
            np.concatenate([shift(t.left, o) for t, o in zip(self.trees, offsets)]).astype(np.int32),
            np.concatenate([shift(t.right, o) for t, o in zip(self.trees, offsets)]).astype(np.int32),
            np.ascontiguousarray(np.concatenate([t.value for t in self.trees])),
            offsets,
        )

    def predict_proba(self, X) -> np.ndarray:
        X = np.ascontiguousarray(X, dtype=np.float64)
        return kernels.forest_proba(*self._packed, X)

    def members(self):
        w = 1.0 / len(self.trees)
        return [(w, t) for t in self.trees]

    def to_json(self) -> dict:
        return {"family": "forest", "params": asdict(self.params), "feature_names": list(self.feature_names),
                "classes": [ClassLabel(c).name for c in self.classes], "seeds": list(self.seeds),
                "trees": [t.to_json() for t in self.trees]}


def train_tree(m: FeatureMatrix, params: TreeParams = TreeParams(), classes=None) -> TreeModel:
    """Greedy Gini CART over binned thresholds."""
    if m.n_rows == 0:
        raise ModelError("cannot train on an empty matrix")
    classes, y = _classes_and_codes(m, classes)
    codes, thresholds, n_bins = bin_features(m.X, params.max_bins)
    tree = _grow(codes, thresholds, n_bins, y, len(classes), np.arange(m.n_rows, dtype=np.int64),
                 np.arange(m.X.shape[1]), params)
    return TreeModel(tree, m.feature_names, classes, params)


def train_forest(m: FeatureMatrix, params: ForestParams = ForestParams(), seed: int = 0,
                 classes=None) -> ForestModel:
    """Bagged trees, each on a bootstrap sample and its own random feature subset."""
    if params.n_trees < 1:
        raise ModelError("a forest needs at least one tree")
    if m.n_rows == 0:
        raise ModelError("cannot train on an empty matrix")
    classes, y = _classes_and_codes(m, classes)
    codes, thresholds, n_bins = bin_features(m.X, params.max_bins)
    n, d = m.X.shape
    k = max(1, min(d, int(round(params.max_features * d))))
    tp = TreeParams(params.max_depth, params.min_leaf, params.max_bins)
    trees, seeds = [], []
    for t in range(params.n_trees):
        tree_seed = int(np.random.SeedSequence([seed, t]).generate_state(1)[0])
        rng = np.random.default_rng(tree_seed)
        rows = rng.integers(0, n, size=n) if params.bootstrap else np.arange(n)
        rows = np.sort(rows).astype(np.int64)
        feats = np.sort(rng.choice(d, size=k, replace=False)) if k < d else np.arange(d)
        trees.append(_grow(codes, thresholds, n_bins, y, len(classes), rows, feats, tp))
        seeds.append(tree_seed)
    return ForestModel(tuple(trees), m.feature_names, classes, params, tuple(seeds))


def model_from_json(obj: dict):
    classes = tuple(int(ClassLabel.parse(c)) for c in obj["classes"])
    names = tuple(obj["feature_names"])
    trees = tuple(Tree.from_json(t) for t in obj["trees"])
    if obj["family"] == "tree":
        return TreeModel(trees[0], names, classes, TreeParams(**obj["params"]))
    if obj["family"] == "forest":
        return ForestModel(trees, names, classes, ForestParams(**obj["params"]), tuple(obj.get("seeds", ())))
    raise ModelError(f"unknown model family {obj['family']!r}")


def save_model(model, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model.to_json(), fh, separators=(",", ":"))
        fh.write("\n")


def load_model(path):
    with open(path, encoding="utf-8") as fh:
        return model_from_json(json.load(fh))


# ---------------------------------------------------------------- evaluation

@dataclass(frozen=True)
class EvalMetrics:
    classes: tuple[int, ...]
    accuracy: float
    auc: float | None
    kappa: float
    precision: tuple[float, ...]
    recall: tuple[float, ...]
    f1: tuple[float, ...]
    macro_precision: float
    macro_recall: float
    macro_f1: float
    confusion: tuple[tuple[int, ...], ...]

    def to_json(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "auc": self.auc,
            "kappa": self.kappa,
            "classes": [
                {"label": ClassLabel(c).name, "precision": p, "recall": r, "f1": f}
                for c, p, r, f in zip(self.classes, self.precision, self.recall, self.f1)
            ],
            "macro": {"precision": self.macro_precision, "recall": self.macro_recall, "f1": self.macro_f1},
            "confusion": [list(r) for r in self.confusion],
        }

    @classmethod
    def from_json(cls, obj) -> "EvalMetrics":
        rows = obj["classes"]
        return cls(
            tuple(int(ClassLabel.parse(r["label"])) for r in rows), obj["accuracy"], obj["auc"], obj["kappa"],
            tuple(r["precision"] for r in rows), tuple(r["recall"] for r in rows), tuple(r["f1"] for r in rows),
            obj["macro"]["precision"], obj["macro"]["recall"], obj["macro"]["f1"],
            tuple(tuple(r) for r in obj["confusion"]),
        )


def _safe_div(a: float, b: float) -> float:
    return a / b if b else 0.0


def binary_auc(scores: np.ndarray, positive: np.ndarray) -> float | None:
    """Mann-Whitney AUC; tied (positive, negative) pairs count one half."""
    pos, neg = scores[positive], scores[~positive]
    if pos.size == 0 or neg.size == 0:
        return None
    allv = np.concatenate([pos, neg])
    order = np.argsort(allv, kind="stable")
    ranks = np.empty(allv.size)
    sorted_v = allv[order]
    i = 0
    while i < allv.size:
        j = i
        while j + 1 < allv.size and sorted_v[j + 1] == sorted_v[i]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    u = ranks[:pos.size].sum() - pos.size * (pos.size + 1) / 2.0
    return float(u / (pos.size * neg.size))


def hard_predictions(proba: np.ndarray) -> np.ndarray:
    # argmax returns the lowest index on ties
    return np.argmax(proba, axis=1)


def evaluate(p: Predictor, test: FeatureMatrix) -> EvalMetrics:
    """Accuracy, AUC, Cohen's kappa and per-label/macro precision, recall, F1."""
    if test.n_rows == 0:
        raise ModelError("cannot evaluate on an empty matrix")
    classes = tuple(p.classes)
    index = {c: k for k, c in enumerate(classes)}
    unknown = sorted(set(test.y.tolist()) - set(classes))
    if unknown:
        raise ModelError(f"test labels {unknown} were not seen in training")
    truth = np.array([index[v] for v in test.y.tolist()])
    proba = p.predict_proba(test.X)
    pred = hard_predictions(proba)
    k = len(classes)
    cm = np.zeros((k, k), dtype=np.int64)
    np.add.at(cm, (truth, pred), 1)
    n = cm.sum()
    p_o = np.trace(cm) / n
    p_e = float((cm.sum(axis=1) * cm.sum(axis=0)).sum()) / (n * n)
    kappa = (p_o - p_e) / (1 - p_e) if p_e < 1 else (1.0 if p_o == 1 else 0.0)
    prec, rec, f1 = [], [], []
    for c in range(k):
        tp = cm[c, c]
        pr = _safe_div(tp, cm[:, c].sum())
        rc = _safe_div(tp, cm[c, :].sum())
        prec.append(float(pr))
        rec.append(float(rc))
        f1.append(float(_safe_div(2 * pr * rc, pr + rc)))
    if k == 2:
        auc = binary_auc(proba[:, 1], truth == 1)
    else:
        per = [binary_auc(proba[:, c], truth == c) for c in range(k)]
        per = [a for a in per if a is not None]
        auc = float(np.mean(per)) if per else None
    return EvalMetrics(classes, float(p_o), auc, float(kappa), tuple(prec), tuple(rec), tuple(f1),
                       float(np.mean(prec)), float(np.mean(rec)), float(np.mean(f1)),
                       tuple(tuple(int(v) for v in r) for r in cm))


def accuracy(p: Predictor, m: FeatureMatrix) -> float:
    index = {c: k for k, c in enumerate(p.classes)}
    truth = np.array([index.get(v, -1) for v in m.y.tolist()])
    return float(np.mean(hard_predictions(p.predict_proba(m.X)) == truth))


# ---------------------------------------------------------------- selection

@dataclass(frozen=True)
class CandidateSpec:
    family: str  # "tree" | "forest"
    max_depth: int = 6
    n_trees: int = 1
    min_leaf: int = 1
    max_features: float = 1.0
    bootstrap: bool = True

    @property
    def label(self) -> str:
        if self.family == "tree":
            return f"tree(depth={self.max_depth})"
        return f"forest(trees={self.n_trees},depth={self.max_depth})"

    def fit(self, m: FeatureMatrix, seed: int, classes=None):
        if self.family == "tree":
            return train_tree(m, TreeParams(self.max_depth, self.min_leaf), classes)
        if self.family == "forest":
            params = ForestParams(self.n_trees, self.max_depth, self.min_leaf, self.max_features, self.bootstrap)
            return train_forest(m, params, seed, classes)
        raise ModelError(f"unknown model family {self.family!r}")

    def to_json(self) -> dict:
        return asdict(self)


def default_candidates() -> list[CandidateSpec]:
    out = []
    for size in (1, 25, 100):
        for depth in (3, 6, 10):
            if size == 1:
                out.append(CandidateSpec("tree", depth, 1, min_leaf=2))
            else:
                out.append(CandidateSpec("forest", depth, size, min_leaf=2, max_features=0.6))
    return out


@dataclass
class SelectionResult:
    winner: object
    winner_index: int
    candidate_scores: list[float]
    candidates: list[CandidateSpec]
    validation_synthetic_rows: int = 0
    test_metrics: EvalMetrics | None = None


def derive_seed(*keys) -> int:
    return int(np.random.SeedSequence([int(k) for k in keys]).generate_state(1)[0])


def select_best_model(train: FeatureMatrix, candidates: Sequence[CandidateSpec], folds, seed: int = 0,
                      smote_k: int = 5, classes=None, test: FeatureMatrix | None = None) -> SelectionResult:
    """Grouped k-fold CV with SMOTE inside each training fold; winner refit on all training rows."""
    if not candidates:
        raise ModelError("no candidate models")
    if not folds:
        raise ModelError("no cross-validation folds")
    if classes is None:
        classes = tuple(sorted(set(train.y.tolist())))
    real = train.take(np.flatnonzero(~train.synthetic))
    synthetic_in_validation = 0
    fold_data = []
    for fi, (fold_train, fold_val) in enumerate(folds):
        tr = real.for_subjects(fold_train)
        va = real.for_subjects(fold_val)
        if tr.n_rows == 0 or va.n_rows == 0:
            raise ModelError(f"fold {fi} has an empty side")
        tr = smote_oversample(tr, smote_k, derive_seed(seed, 1, fi))
        synthetic_in_validation += int(va.synthetic.sum())
        fold_data.append((tr, va))
    scores = []
    for ci, cand in enumerate(candidates):
        accs = [accuracy(cand.fit(tr, derive_seed(seed, 2, ci, fi), classes), va)
                for fi, (tr, va) in enumerate(fold_data)]
        scores.append(float(np.mean(accs)))
    best = int(np.argmax(scores))
    full = smote_oversample(real, smote_k, derive_seed(seed, 3))
    winner = candidates[best].fit(full, derive_seed(seed, 4, best), classes)
    metrics = evaluate(winner, test) if test is not None else None
    return SelectionResult(winner, best, scores, list(candidates), synthetic_in_validation, metrics)


# ---------------------------------------------------------------- importance

def permutation_importance(p: Predictor, m: FeatureMatrix, n_repeats: int = 5, seed: int = 0):
    """Mean accuracy drop when one column is shuffled, per feature."""
    from .shapley import ImportanceVector

    if m.n_rows == 0:
        raise ModelError("cannot compute importance on an empty matrix")
    if n_repeats < 1:
        raise ModelError("n_repeats must be >= 1")
    base = accuracy(p, m)
    scores = []
    for j in range(m.X.shape[1]):
        drops = []
        for r in range(n_repeats):
            perm = np.random.default_rng([seed, j, r]).permutation(m.n_rows)
            Xp = m.X.copy()
            Xp[:, j] = m.X[perm, j]
            drops.append(base - accuracy(p, FeatureMatrix(m.feature_names, Xp, m.y, m.subject_id)))
        scores.append(float(np.mean(drops)))
    return ImportanceVector(m.feature_names, tuple(scores), "FI")
