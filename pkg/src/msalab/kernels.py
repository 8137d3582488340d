"""
Kernel dispatch: compiled extension when available, pure Python otherwise.

Set ``MSALAB_PURE_PYTHON=1`` to force the fallback.
"""

import os

import numpy as np

from . import _pykernels

try:
    if os.environ.get("MSALAB_PURE_PYTHON", "") not in ("", "0"):
        raise ImportError("pure Python requested")
    from . import _ckernels as _impl
    BACKEND = "cython"
except ImportError:
    _impl = _pykernels
    BACKEND = "python"


def shell_max(f, lo, hi) -> np.ndarray:
    """Per-point max of ``f`` over the shell ``lo[x] <= ||w - x|| <= hi[x]``."""
    return _impl.shell_max(f, lo, hi)


def shell_min(f, lo, hi) -> np.ndarray:
    return -_impl.shell_max(-np.asarray(f, dtype=float), lo, hi)


def max_disjoint(centers, ell: int, cap: int) -> int:
    """Size of the largest pairwise disjoint family of ``ell``-cubes, capped."""
    return int(_impl.max_disjoint(centers, int(ell), int(cap)))
