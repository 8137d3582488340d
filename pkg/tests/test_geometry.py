import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from msalab.disorder import BumpProfile, covering_check
from msalab.geometry import (AnnularCover, GeometryError, LatticeBox, boundaries,
                             box_distance, is_interactive, out_layer, point_distance,
                             projections_disjoint)


def as_set(pts):
    return {tuple(int(c) for c in p) for p in pts}


def test_out_layer_one_dimensional():
    assert as_set(out_layer(LatticeBox((0,), 2))) == {(-2,), (-1,), (1,), (2,)}
    assert as_set(out_layer(LatticeBox((0,), 3))) == {(-3,), (-2,), (2,), (3,)}


def test_out_layer_two_dimensional_count():
    pts = out_layer(LatticeBox((0, 0), 2, 1, 2))
    assert len(pts) == 24
    assert (0, 0) not in as_set(pts)


def test_out_layer_rejects_small_box():
    with pytest.raises(GeometryError):
        out_layer(LatticeBox((0,), 1))


def test_boundaries_interval():
    inner, outer, pairs = boundaries(LatticeBox((0,), 2))
    assert as_set(inner) == {(-2,), (2,)}
    assert as_set(outer) == {(-3,), (3,)}
    assert {(int(a[0]), int(b[0])) for a, b in pairs} == {(-2, -3), (2, 3)}
    inner, outer, _ = boundaries(LatticeBox((0,), 1))
    assert as_set(inner) == {(-1,), (1,)}
    assert as_set(outer) == {(-2,), (2,)}


def test_boundaries_square():
    inner, outer, pairs = boundaries(LatticeBox((0, 0), 1, 1, 2))
    assert len(inner) == 8 and len(outer) == 16
    # every edge pair straddles the boundary at unit distance
    for x, y in pairs:
        assert point_distance(x, y) == 1
        assert point_distance(x, (0, 0)) == 1 and point_distance(y, (0, 0)) == 2


def test_box_distance_examples():
    assert box_distance(LatticeBox((0,), 2), LatticeBox((8,), 2)) == 4
    b = LatticeBox((3, -1), 2, 1, 2)
    assert box_distance(b, b) == 0
    assert box_distance(LatticeBox((0, 0), 2, 1, 2), LatticeBox((10, 3), 2, 1, 2)) == 6


def test_box_distance_matches_brute_force(rng):
    for _ in range(30):
        L1, L2 = rng.integers(1, 4, 2)
        c1, c2 = rng.integers(-8, 9, (2, 2))
        b1, b2 = LatticeBox(c1, L1, 1, 2), LatticeBox(c2, L2, 1, 2)
        p1, p2 = b1.points(), b2.points()
        brute = np.min(np.max(np.abs(p1[:, None] - p2[None]), axis=-1))
        assert box_distance(b1, b2) == int(brute)


def test_is_interactive_examples():
    assert not is_interactive(LatticeBox((0, 10), 2, 1, 2), 1.0)
    assert is_interactive(LatticeBox((0, 0), 5, 1, 2), 0.0)
    assert is_interactive(LatticeBox((0, 5), 2, 1, 2), 1.0)


def test_projections_disjoint_examples():
    b1 = LatticeBox((0, 0), 2, 1, 2)
    assert projections_disjoint(b1, LatticeBox((17, 17), 2, 1, 2))
    assert not projections_disjoint(b1, b1)
    assert not projections_disjoint(b1, LatticeBox((0, 30), 2, 1, 2))


@settings(max_examples=1000, deadline=None)
@given(L=st.integers(2, 16), r0=st.integers(0, 1), t1=st.integers(-50, 50),
       offset=st.tuples(st.integers(-200, 200), st.integers(-200, 200)))
def test_far_interactive_pairs_have_disjoint_projections(L, r0, t1, offset):
    # interactive boxes: particle centers within 2L + r0 of each other
    b1 = LatticeBox((t1, t1 + min(L, 2 * L + r0)), L, 1, 2)
    c2 = (t1 + offset[0], t1 + offset[0] + (offset[1] % (2 * L + r0 + 1)))
    b2 = LatticeBox(c2, L, 1, 2)
    if L <= r0 or not (is_interactive(b1, r0) and is_interactive(b2, r0)):
        return
    if box_distance(b1, b2) > 8 * L:
        assert projections_disjoint(b1, b2)


@settings(max_examples=200, deadline=None)
@given(c=st.tuples(st.integers(-20, 20), st.integers(-20, 20)),
       L=st.integers(1, 5), c2=st.tuples(st.integers(-20, 20), st.integers(-20, 20)),
       L2=st.integers(1, 5), x=st.tuples(st.integers(-30, 30), st.integers(-30, 30)))
def test_box_distance_symmetric_and_triangle(c, L, c2, L2, x):
    a, b = LatticeBox(c, L, 1, 2), LatticeBox(c2, L2, 1, 2)
    assert box_distance(a, b) == box_distance(b, a)
    # dist(A, B) <= dist(A, x) + dist(x, B) for a single point x
    px = LatticeBox(x, 1, 1, 2)
    da = max(0, point_distance(x, c) - L)
    db = max(0, point_distance(x, c2) - L2)
    assert box_distance(a, b) <= da + db
    assert box_distance(a, px) <= da


@settings(max_examples=50, deadline=None)
@given(L=st.integers(2, 6), D=st.integers(1, 2))
def test_out_layer_contains_inner_boundary(L, D):
    box = LatticeBox((0,) * D, L, D)
    ol = as_set(out_layer(box))
    assert as_set(boundaries(box)[0]) <= ol
    assert all(point_distance(p, box.center) > L - 2 for p in ol)


def test_cells_cover_the_box():
    # every real point of the cube lies in the closed cell of some lattice point
    for L in (1, 3):
        x = np.random.default_rng(L).uniform(-L, L, (500, 2))
        lattice = LatticeBox((0, 0), L, 1, 2).points()
        d = np.max(np.abs(x[:, None, :] - lattice[None]), axis=-1).min(axis=1)
        assert np.all(d <= 1.0)


def test_annular_cover_width_and_merge():
    c = AnnularCover.from_intervals([(0, 4), (5, 9), (20, 24)])
    assert c.radii == ((0, 9), (20, 24))
    assert c.width == 13
    assert AnnularCover.from_intervals([(3, 7)]).width == 4
    with pytest.raises(GeometryError):
        AnnularCover(((0, 4), (3, 8)))


def test_lattice_box_validation():
    with pytest.raises(GeometryError):
        LatticeBox((0, 0), 2, 1, 1)
    with pytest.raises(GeometryError):
        LatticeBox((0.5,), 2)
    with pytest.raises(GeometryError):
        LatticeBox((0,), 0)
    assert LatticeBox((1, 2), 3, 1, 2).factors() == (LatticeBox((1,), 3), LatticeBox((2,), 3))


def test_tent_partition_of_unity():
    assert covering_check(BumpProfile("tent"), 3).min_sum == pytest.approx(1.0)
    assert covering_check(BumpProfile("plateau"), 2).min_sum >= 1.0
