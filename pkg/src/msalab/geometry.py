"""
Lattice geometry in one- and two-particle configuration space.

All distances use the max-norm. Boxes are stored as (center, radius) and
point sets are generated on demand as integer arrays of shape (k, D).
"""

from dataclasses import dataclass
from itertools import product
from typing import Tuple

import numpy as np


class GeometryError(ValueError):
    pass


def _as_point(p) -> Tuple[int, ...]:
    arr = np.atleast_1d(np.asarray(p))
    if arr.ndim != 1:
        raise GeometryError(f"point must be one-dimensional, got shape {arr.shape}")
    if not np.all(np.equal(np.mod(arr, 1), 0)):
        raise GeometryError(f"lattice point must have integer coordinates: {p!r}")
    return tuple(int(x) for x in arr)


def max_norm(x) -> float:
    return float(np.max(np.abs(np.asarray(x, dtype=float))))


@dataclass(frozen=True)
class LatticeBox:
    """Cube of radius ``L`` (sidelength 2L) around a lattice point.

    ``center`` has ``particles * dim`` coordinates; for two particles the
    first ``dim`` belong to particle one.
    """

    center: Tuple[int, ...]
    L: int
    dim: int = 1
    particles: int = 1

    def __post_init__(self):
        object.__setattr__(self, "center", _as_point(self.center))
        if int(self.L) != self.L or self.L < 1:
            raise GeometryError(f"box radius must be a positive integer, got {self.L}")
        object.__setattr__(self, "L", int(self.L))
        if self.particles not in (1, 2):
            raise GeometryError(f"particles must be 1 or 2, got {self.particles}")
        if self.dim < 1:
            raise GeometryError(f"dim must be positive, got {self.dim}")
        if len(self.center) != self.D:
            raise GeometryError(
                f"center has {len(self.center)} coordinates, expected {self.D}")

    @property
    def D(self) -> int:
        """Configuration-space dimension."""
        return self.dim * self.particles

    @property
    def n_points(self) -> int:
        return (2 * self.L + 1) ** self.D

    def points(self) -> np.ndarray:
        return ball_points(self.center, self.L)

    def contains_point(self, x) -> bool:
        return point_distance(x, self.center) <= self.L

    def contains_box(self, other: "LatticeBox") -> bool:
        """True when ``other`` is a subset of this cube."""
        _check_same_dim(self, other)
        return point_distance(self.center, other.center) + other.L <= self.L

    def sub(self, center, L: int) -> "LatticeBox":
        return LatticeBox(tuple(center), L, self.dim, self.particles)

    def factors(self) -> Tuple["LatticeBox", "LatticeBox"]:
        """Single-particle cubes whose product is this two-particle cube."""
        if self.particles != 2:
            raise GeometryError("factors() requires a two-particle box")
        d = self.dim
        return (LatticeBox(self.center[:d], self.L, d, 1),
                LatticeBox(self.center[d:], self.L, d, 1))


@dataclass(frozen=True)
class UnitCell:
    center: Tuple[int, ...]

    RADIUS = 1

    def __post_init__(self):
        object.__setattr__(self, "center", _as_point(self.center))

    def contains(self, x) -> bool:
        return max_norm(np.asarray(x, dtype=float) - np.asarray(self.center)) <= 1.0


def point_distance(x, y) -> int:
    return int(np.max(np.abs(np.asarray(x) - np.asarray(y))))


def ball_points(center, radius: int) -> np.ndarray:
    c = np.asarray(center, dtype=np.int64)
    axis = np.arange(-radius, radius + 1, dtype=np.int64)
    grids = np.meshgrid(*([axis] * len(c)), indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1) + c


def shell_points(center, r_lo: int, r_hi: int) -> np.ndarray:
    """Lattice points with ``r_lo <= ||x - center|| <= r_hi``."""
    pts = ball_points(center, r_hi)
    dist = np.max(np.abs(pts - np.asarray(center)), axis=1) if len(pts) else pts
    return pts[dist >= r_lo]


def out_layer(box: LatticeBox) -> np.ndarray:
    """Points with ``L - 2 < ||v - u|| <= L``."""
    if box.L < 2:
        raise GeometryError(f"out-layer needs L >= 2, got L={box.L}")
    return shell_points(box.center, box.L - 1, box.L)


def boundaries(box: LatticeBox):
    """Inner boundary, outer boundary and straddling unit-distance pairs.

    Returns ``(inner, outer, pairs)``; ``pairs`` is an integer array of
    shape (k, 2, D) holding (x, x') with x in ``inner`` and x' in ``outer``.
    """
    inner = shell_points(box.center, box.L, box.L)
    outer = shell_points(box.center, box.L + 1, box.L + 1)
    steps = np.array([s for s in product((-1, 0, 1), repeat=box.D) if any(s)],
                     dtype=np.int64)
    c = np.asarray(box.center)
    pairs = []
    for x in inner:
        nbrs = x + steps
        nd = np.max(np.abs(nbrs - c), axis=1)
        for y in nbrs[nd == box.L + 1]:
            pairs.append((x, y))
    pairs_arr = np.array(pairs, dtype=np.int64).reshape(-1, 2, box.D)
    return inner, outer, pairs_arr


def _check_same_dim(b1: LatticeBox, b2: LatticeBox):
    if b1.D != b2.D:
        raise GeometryError(f"dimension mismatch: {b1.D} vs {b2.D}")


def box_distance(b1: LatticeBox, b2: LatticeBox) -> int:
    """Max-norm distance between the lattice point sets; 0 iff they meet."""
    _check_same_dim(b1, b2)
    gap = np.abs(np.asarray(b1.center) - np.asarray(b2.center)) - b1.L - b2.L
    return int(max(0, gap.max()))


def cube_distance(c1, L1, c2, L2) -> float:
    gap = np.abs(np.asarray(c1, dtype=float) - np.asarray(c2, dtype=float)) - L1 - L2
    return float(max(0.0, gap.max()))


def is_interactive(box: LatticeBox, r0: float) -> bool:
    """Whether the two particle cubes of ``box`` come within ``r0`` of each other."""
    if box.particles != 2:
        raise GeometryError("is_interactive requires a two-particle box")
    f1, f2 = box.factors()
    return cube_distance(f1.center, f1.L, f2.center, f2.L) <= r0


def projections_disjoint(b1: LatticeBox, b2: LatticeBox) -> bool:
    """Disjointness of the single-particle shadows of two two-particle boxes."""
    if b1.particles != 2 or b2.particles != 2:
        raise GeometryError("projections_disjoint requires two-particle boxes")
    if b1.L != b2.L:
        raise GeometryError("projections_disjoint requires equal radii")
    for f in b1.factors():
        for g in b2.factors():
            if point_distance(f.center, g.center) <= 2 * b1.L:
                return False
    return True


def cell_indices(coords: np.ndarray, v, h: float = 1.0) -> np.ndarray:
    """Indices of grid points lying in the closed unit cell around ``v``.

    ``coords`` are grid positions in units of ``h`` relative to the lattice
    (i.e. integer multiples); a point lies in C(v) when its max-norm
    distance to v is at most 1.
    """
    d = np.max(np.abs(coords * h - np.asarray(v, dtype=float)), axis=1)
    return np.flatnonzero(d <= 1.0 + 1e-12)


@dataclass(frozen=True)
class AnnularCover:
    """Concentric closed max-norm annuli ``a_i <= ||x - u|| <= b_i``.

    ``width`` is the radial measure ``sum(b_i - a_i)``, so a single cube of
    radius l contributes 2l.
    """

    radii: Tuple[Tuple[int, int], ...] = ()

    def __post_init__(self):
        radii = tuple((int(a), int(b)) for a, b in self.radii)
        prev = -1
        for a, b in radii:
            if not (a < b and a > prev):
                raise GeometryError(f"annuli must be strictly interleaved: {radii}")
            prev = b
        object.__setattr__(self, "radii", radii)

    @property
    def width(self) -> int:
        return sum(b - a for a, b in self.radii)

    def __len__(self):
        return len(self.radii)

    def contains_radius(self, r: float) -> bool:
        return any(a <= r <= b for a, b in self.radii)

    @classmethod
    def from_intervals(cls, intervals, lo: int = 0, hi=None) -> "AnnularCover":
        """Merge radial intervals that overlap or touch (``a <= b_prev + 1``)."""
        clipped = []
        for a, b in sorted(intervals):
            a = max(int(a), lo)
            if hi is not None:
                b = min(int(b), hi)
            if b > a:
                clipped.append([a, b])
        merged = []
        for a, b in clipped:
            if merged and a <= merged[-1][1] + 1:
                merged[-1][1] = max(merged[-1][1], b)
            else:
                merged.append([a, b])
        return cls(tuple((a, b) for a, b in merged))
