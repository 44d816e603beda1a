"""Compiled kernels against their numpy fallbacks."""
import json
import os
import subprocess
import sys

import numpy as np
import pytest

from conftest import make_matrix
from xaistab import _fallback, kernels
from xaistab.models import ForestParams, bin_features, train_forest

compiled = pytest.importorskip("xaistab._kernels")


@pytest.fixture(scope="module")
def forest():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(300, 6))
    y = ((X[:, 0] * X[:, 1] > 0) + (X[:, 2] > 1)).astype(int)
    return train_forest(make_matrix(X, y), ForestParams(n_trees=6, max_depth=5), seed=2), X


def test_selected_backend():
    assert kernels.BACKEND in ("compiled", "python")


def test_tree_apply(forest):
    model, X = forest
    for t in model.trees:
        args = (t.feature, t.threshold, t.left, t.right, X)
        np.testing.assert_array_equal(compiled.tree_apply(*args), _fallback.tree_apply(*args))


def test_forest_proba(forest):
    model, X = forest
    packed = model._packed
    np.testing.assert_allclose(compiled.forest_proba(*packed, X), _fallback.forest_proba(*packed, X),
                               rtol=0, atol=1e-15)


def test_best_split_identical():
    rng = np.random.default_rng(1)
    for _ in range(25):
        n, d = int(rng.integers(5, 80)), int(rng.integers(1, 6))
        X = np.round(rng.normal(size=(n, d)), 1)
        k = int(rng.integers(2, 4))
        y = rng.integers(0, k, n).astype(np.int32)
        codes, _, n_bins = bin_features(X)
        rows = np.sort(rng.choice(n, size=int(rng.integers(2, n + 1)), replace=False)).astype(np.int64)
        feats = np.arange(d, dtype=np.int32)
        min_leaf = int(rng.integers(1, 4))
        a = compiled.best_split(codes, rows, y, k, feats, n_bins, min_leaf)
        b = _fallback.best_split(codes, rows, y, k, feats, n_bins, min_leaf)
        assert a[:2] == b[:2]
        assert a[2] == pytest.approx(b[2], abs=1e-9) and a[3] == pytest.approx(b[3], abs=1e-9)


def test_exact_tree_pairs(forest):
    model, X = forest
    bg = X[100:120]
    for t in model.trees[:3]:
        value = np.ascontiguousarray(t.value[:, 1])
        args = (t.feature, t.threshold, t.left, t.right, value, X[:15], bg)
        np.testing.assert_allclose(compiled.exact_tree_pairs(*args), _fallback.exact_tree_pairs(*args),
                                   rtol=0, atol=1e-12)


_SCRIPT = """
import json, numpy as np
from xaistab import kernels
from xaistab.models import ForestParams, train_forest
from xaistab.preprocess import FeatureMatrix
rng = np.random.default_rng(5)
X = rng.normal(size=(120, 4))
y = (X[:, 0] + X[:, 1] > 0).astype(int)
m = FeatureMatrix(("a", "b", "c", "d"), X, y, [f"s{i}" for i in range(120)])
f = train_forest(m, ForestParams(n_trees=3, max_depth=4), seed=0)
print(kernels.BACKEND)
print(json.dumps(f.to_json(), sort_keys=True))
print(json.dumps(f.predict_proba(X).tolist()))
"""


def _run(env_value):
    env = dict(os.environ)
    env.pop("XAISTAB_PURE_PYTHON", None)
    if env_value is not None:
        env["XAISTAB_PURE_PYTHON"] = env_value
    res = subprocess.run([sys.executable, "-c", _SCRIPT], capture_output=True, text=True, env=env, check=True)
    return res.stdout.splitlines()


def test_environment_forces_fallback_with_identical_results():
    compiled_out = _run(None)
    pure_out = _run("1")
    assert compiled_out[0] == "compiled" and pure_out[0] == "python"
    assert compiled_out[1] == pure_out[1]
    np.testing.assert_allclose(json.loads(compiled_out[2]), json.loads(pure_out[2]), rtol=0, atol=1e-15)
