import itertools
import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from msalab import _pykernels, kernels


def brute_shell_max(f, lo, hi):
    out = np.full(f.shape, -np.inf)
    idx = list(itertools.product(*[range(n) for n in f.shape]))
    for x in idx:
        for w in idx:
            r = max(abs(a - b) for a, b in zip(x, w))
            if lo[x] <= r <= hi[x]:
                out[x] = max(out[x], f[w])
    return out


def brute_max_disjoint(V, ell):
    for k in range(len(V), 0, -1):
        for sub in itertools.combinations(V, k):
            if all(np.max(np.abs(np.subtract(a, b))) > 2 * ell
                   for a, b in itertools.combinations(sub, 2)):
                return k
    return 0


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10**6), D=st.integers(1, 2), n=st.integers(3, 9))
def test_shell_max_brute_force(seed, D, n):
    rng = np.random.default_rng(seed)
    shape = (n,) * D
    f = rng.standard_normal(shape)
    lo = rng.integers(0, 4, shape)
    hi = lo + rng.integers(0, 3, shape)
    expected = brute_shell_max(f, lo, hi)
    for impl in {kernels, _pykernels}:
        assert np.array_equal(impl.shell_max(f, lo, hi), expected)


@settings(max_examples=40, deadline=None)
@given(pts=st.lists(st.tuples(st.integers(-8, 8), st.integers(-8, 8)), max_size=7),
       ell=st.integers(1, 3))
def test_max_disjoint_brute_force(pts, ell):
    V = np.array(pts, dtype=np.int64).reshape(-1, 2)
    k = brute_max_disjoint([tuple(p) for p in V], ell)
    assert kernels.max_disjoint(V, ell, 100) == k
    assert _pykernels.max_disjoint(V, ell, 100) == k
    assert kernels.max_disjoint(V, ell, 2) == min(k, 2)


def test_pure_python_switch():
    code = "from msalab import kernels; print(kernels.BACKEND)"
    env = dict(os.environ, MSALAB_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True)
    assert out.stdout.strip() == "python"


def test_compiled_backend_built():
    if kernels.BACKEND != "cython":
        pytest.skip("compiled extension not built in this environment")
    rng = np.random.default_rng(0)
    f = rng.standard_normal((21, 21))
    lo = rng.integers(0, 5, f.shape)
    hi = lo + 3
    assert np.array_equal(kernels.shell_max(f, lo, hi), _pykernels.shell_max(f, lo, hi))
