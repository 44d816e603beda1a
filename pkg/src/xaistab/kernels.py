"""Kernel backend selection.

The compiled extension is used when it imports; ``XAISTAB_PURE_PYTHON=1``
forces the numpy fallback.
"""
import os

from . import _fallback

BACKEND = "python"
if os.environ.get("XAISTAB_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _impl

        BACKEND = "compiled"
    except ImportError:  # extension not built
        _impl = _fallback
else:
    _impl = _fallback

tree_apply = _impl.tree_apply
best_split = _impl.best_split
exact_tree_pairs = _impl.exact_tree_pairs
forest_proba = _impl.forest_proba

__all__ = ["BACKEND", "tree_apply", "best_split", "exact_tree_pairs", "forest_proba"]
