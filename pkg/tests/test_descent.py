import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from msalab.descent import (BudgetExceeded, build_singular_clusters, descent_depth,
                            radial_descent_bound, random_cluster_set, reference_radii,
                            singular_cluster_set, subharmonic_check, synthetic_subharmonic)
from msalab.disorder import AmplitudeField
from msalab.geometry import LatticeBox
from msalab.hamiltonian import Disorder
from msalab.msa import OperatorFactory
from msalab.oracles import brute_singular

BIG = LatticeBox((0,), 40)


def brute_subharmonic(f, q, ell, S=None, A=2.0):
    """Direct loop over points and shells."""
    L = (f.shape[0] - 1) // 2
    lo, hi, exempt = reference_radii(L, f.ndim, ell, S, A)
    bad = []
    for idx in itertools.product(range(f.shape[0]), repeat=f.ndim):
        if exempt[idx]:
            continue
        ref = max((f[w] for w in itertools.product(range(f.shape[0]), repeat=f.ndim)
                   if lo[idx] <= max(abs(a - b) for a, b in zip(w, idx)) <= hi[idx]),
                  default=-np.inf)
        if f[idx] > q * ref * (1 + 1e-12):
            bad.append(idx)
    return bad


def test_no_singular_boxes():
    S = build_singular_clusters(BIG, 4, [], 3)
    assert S.clusters == [] and S.W == 0


def test_single_singular_box():
    S = build_singular_clusters(BIG, 4, [(10,)], 3)
    assert len(S.clusters) == 1 and S.element_count == 1
    assert S.W <= 8


def test_two_sites_three_ell_apart():
    ell = 4
    S = build_singular_clusters(BIG, ell, [(0,), (12,)], 3)
    # boxes [-4, 4] and [8, 16] are not adjacent: two clusters
    assert len(S.clusters) == 2
    assert sorted((c.box.center, c.box.L) for c in S.clusters) == [((0,), 4), ((12,), 4)]
    # annuli [0, 4] and [8, 16] around the big box's center
    assert S.cover.radii == ((0, 4), (8, 16)) and S.W == 12
    # a spacing allowance of one ell chains them together
    chained = build_singular_clusters(BIG, ell, [(0,), (12,)], 3, b=1.0)
    assert len(chained.clusters) == 1 and chained.element_count == 2


def test_budget_exceeded():
    with pytest.raises(BudgetExceeded) as err:
        build_singular_clusters(BIG, 4, [(-20,), (0,), (20,)], 2)
    assert err.value.reason == "count"
    with pytest.raises(BudgetExceeded) as err:
        # a chain with 3 disjoint members whose cover spans radii [0, 28]
        build_singular_clusters(BIG, 4, [(r,) for r in range(0, 25, 4)], 3)
    assert err.value.reason == "width"


@settings(max_examples=60, deadline=None)
@given(pts=st.lists(st.tuples(st.integers(-9, 9), st.integers(-9, 9)), max_size=6),
       ell=st.integers(1, 3))
def test_cluster_invariants(pts, ell):
    big = LatticeBox((0, 0), 12, 1, 2)
    try:
        S = build_singular_clusters(big, ell, np.array(pts).reshape(-1, 2), 6)
    except BudgetExceeded:
        return
    boxes = [c.box for c in S.clusters]
    for a, b in itertools.combinations(boxes, 2):
        gap = np.abs(np.subtract(a.center, b.center))
        assert np.any(gap > a.L + b.L)
    for p in pts:
        assert any(bx.contains_box(big.sub(p, ell)) for bx in boxes)
    assert S.W <= 2 * 6 * ell


def test_subharmonic_constant():
    f = np.full(41, 2.0)
    assert subharmonic_check(f, 1.0, 3)
    rep = subharmonic_check(f, 0.5, 3)
    L, ell = 20, 3
    assert not rep and len(rep.violations) == 2 * (L - ell) + 1


@pytest.mark.parametrize("q", [0.1, 0.5, 0.74, 0.75, 1.0, 2.0, 3.0])
def test_subharmonic_exponential_direct(q):
    L, ell, mu = 30, 3, 0.1
    x = np.arange(-L, L + 1)
    f = np.exp(-mu * np.abs(x))
    rep = subharmonic_check(f, q, ell)
    bad = brute_subharmonic(f, q, ell)
    assert sorted(tuple(int(i) - L for i in b) for b in bad) == sorted(v[0] for v in rep.violations)
    # far from the peak the nearest shell point is ell closer to it
    far = [v for v in rep.violations if abs(v[0][0]) >= ell]
    assert (not far) == (q >= np.exp(-mu * ell))


def test_subharmonic_with_clusters_matches_direct(rng):
    big = LatticeBox((0, 0), 7, 1, 2)
    for _ in range(5):
        S = random_cluster_set(big, 2, 2, rng)
        f = rng.uniform(0, 1, (15, 15))
        for q in (0.5, 2.0, 5.0):
            rep = subharmonic_check(f, q, 2, S)
            bad = brute_subharmonic(f, q, 2, S)
            assert len(bad) == len(rep.violations)


def test_radial_bound_examples():
    assert radial_descent_bound(0.1, 100, 20, 10, 1.0) == pytest.approx(1e-5)
    with pytest.warns(RuntimeWarning):
        assert radial_descent_bound(0.3, 100, 70, 10, 4.0) == 4.0
    with pytest.raises(ValueError):
        radial_descent_bound(1.0, 100, 20, 10, 1.0)


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), L=st.integers(12, 30), ell=st.integers(2, 4),
       q=st.floats(0.05, 0.9), D=st.integers(1, 2))
def test_descent_bound_is_sound(seed, L, ell, q, D):
    if D == 2:
        L = min(L, 14)
    rng = np.random.default_rng(seed)
    big = LatticeBox((0,) * D, L, 1, D)
    S = random_cluster_set(big, ell, 2, rng)
    f = synthetic_subharmonic(L, D, ell, q, rng, S)
    assert subharmonic_check(f, q, ell, S)
    center = f[(L,) * D]
    depth = descent_depth(L, D, ell, S)
    assert center <= q ** depth[(L,) * D] * f.max() * (1 + 1e-9)
    if L - S.W - (2 * max(1, len(S.cover.radii)) + 1) * ell > 0:
        bound = radial_descent_bound(q, L, S.W, ell, f.max(), len(S.cover.radii))
        assert center <= bound * (1 + 1e-9)


def test_singular_cluster_set_matches_classification():
    ops = OperatorFactory(Disorder(AmplitudeField(3, 10.0)))
    big, ell, E, m = LatticeBox((0,), 20), 2, 1.0, 0.3
    S = singular_cluster_set(ops, big, ell, E, m, 10)
    truth = [v for v in range(-18, 19) if brute_singular(ops(big.sub((v,), ell)), E, m)]
    found = sorted(int(p[0]) for c in S.clusters for p in c.members)
    assert found == truth and truth
