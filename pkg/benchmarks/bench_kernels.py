"""Time the compiled kernels against the numpy fallbacks.

    python3 benchmarks/bench_kernels.py [--repeat N]
"""
import argparse
import timeit

import numpy as np

from xaistab import _fallback
from xaistab.models import ForestParams, bin_features, train_forest
from xaistab.preprocess import FeatureMatrix

try:
    from xaistab import _kernels
except ImportError:
    _kernels = None


def _setup(seed=0):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(2000, 23))
    y = ((X[:, 0] + X[:, 1] * X[:, 2] > 0) + (X[:, 3] > 1)).astype(int)
    m = FeatureMatrix(tuple(f"f{j}" for j in range(23)), X, y, [f"s{i}" for i in range(2000)])
    forest = train_forest(m, ForestParams(n_trees=25, max_depth=6), seed=seed)
    codes, _, n_bins = bin_features(X)
    return X, y.astype(np.int32), forest, codes, n_bins


def cases(X, y, forest, codes, n_bins):
    t = forest.trees[0]
    rows = np.arange(X.shape[0], dtype=np.int64)
    feats = np.arange(X.shape[1], dtype=np.int32)
    value = np.ascontiguousarray(t.value[:, 1])
    return {
        "tree_apply (2000 rows)": lambda k: k.tree_apply(t.feature, t.threshold, t.left, t.right, X),
        "best_split (2000 rows x 23)": lambda k: k.best_split(codes, rows, y, 3, feats, n_bins, 2),
        "forest_proba (25 trees)": lambda k: k.forest_proba(*forest._packed, X),
        "exact_tree_pairs (20 x 20)": lambda k: k.exact_tree_pairs(t.feature, t.threshold, t.left, t.right,
                                                                   value, X[:20], X[100:120]),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    data = _setup()
    backends = [("python", _fallback)] + ([("compiled", _kernels)] if _kernels is not None else [])
    print(f"{'kernel':32s}" + "".join(f"{name:>14s}" for name, _ in backends) + f"{'speedup':>10s}")
    for label, fn in cases(*data).items():
        times = []
        for _, mod in backends:
            fn(mod)  # warm up
            n, total = timeit.Timer(lambda: fn(mod)).autorange()
            best = min(timeit.repeat(lambda: fn(mod), number=n, repeat=args.repeat)) / n
            times.append(best)
        cells = "".join(f"{t * 1e3:12.3f}ms" for t in times)
        speed = f"{times[0] / times[1]:9.1f}x" if len(times) == 2 else ""
        print(f"{label:32s}{cells}{speed}")


if __name__ == "__main__":
    main()
