"""
Singular clusters, subharmonic functions and radial descent.

Functions here live on the lattice points of a cube ``B_L(u)`` and are
stored as dense arrays of shape ``(2L+1,)*D`` indexed by ``x - u + L``.
"""

import math
import warnings
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
from scipy import ndimage
from scipy.sparse.csgraph import connected_components

from . import kernels
from .geometry import AnnularCover, LatticeBox
from .msa import is_singular


class BudgetExceeded(Exception):
    """More singular structure than the cluster budget allows."""

    def __init__(self, reason: str, count: int, width: float):
        super().__init__(f"cluster budget exceeded ({reason}): count={count}, W={width}")
        self.reason = reason
        self.count = count
        self.width = width


@dataclass
class Cluster:
    members: np.ndarray           # (k, D) centers of singular l-boxes
    box: LatticeBox               # bounding cube of the members' boxes
    elements: int                 # max number of pairwise disjoint members


@dataclass
class SingularClusterSet:
    ell: int
    big: LatticeBox
    clusters: List[Cluster] = field(default_factory=list)
    cover: AnnularCover = field(default_factory=AnnularCover)

    @property
    def W(self) -> int:
        return self.cover.width

    @property
    def element_count(self) -> int:
        return sum(c.elements for c in self.clusters)

    def mask(self) -> np.ndarray:
        """Boolean array over ``B_L(u)``: points covered by singular boxes."""
        L, D = self.big.L, self.big.D
        m = np.zeros((2 * L + 1,) * D, dtype=bool)
        u = np.asarray(self.big.center)
        for c in self.clusters:
            for v in c.members:
                lo = np.maximum(v - u + L - self.ell, 0)
                hi = np.minimum(v - u + L + self.ell, 2 * L) + 1
                m[tuple(slice(a, b) for a, b in zip(lo, hi))] = True
        return m

    def labels(self) -> np.ndarray:
        """Cluster index per point (``-1`` outside S)."""
        L, D = self.big.L, self.big.D
        lab = np.full((2 * L + 1,) * D, -1, dtype=np.int64)
        u = np.asarray(self.big.center)
        for i, c in enumerate(self.clusters):
            for v in c.members:
                lo = np.maximum(v - u + L - self.ell, 0)
                hi = np.minimum(v - u + L + self.ell, 2 * L) + 1
                lab[tuple(slice(a, b) for a, b in zip(lo, hi))] = i
        return lab


def _bounding_cube(members: np.ndarray, ell: int, like: LatticeBox) -> LatticeBox:
    lo = members.min(axis=0) - ell
    hi = members.max(axis=0) + ell
    center = (lo + hi) // 2
    radius = int(np.max(np.maximum(hi - center, center - lo)))
    return like.sub(tuple(int(c) for c in center), max(radius, 1))


def build_singular_clusters(big: LatticeBox, ell: int, singular_centers, n: int,
                            b: float = 0.0) -> SingularClusterSet:
    """Group singular ``ell``-boxes of ``big`` into boxed clusters.

    Two singular boxes belong to the same chain when their distance is at
    most ``1 + b*ell``; clusters are the connected components, merged
    further until their bounding cubes are pairwise disjoint. Raises
    :class:`BudgetExceeded` when more than ``n`` pairwise disjoint singular
    boxes exist or the annular width exceeds ``2 n ell``.
    """
    if ell >= big.L:
        raise ValueError("cluster scale must be below the box scale")
    V = np.asarray(singular_centers, dtype=np.int64).reshape(-1, big.D)
    out = SingularClusterSet(ell, big)
    if len(V) == 0:
        return out
    u = np.asarray(big.center)
    if np.any(np.max(np.abs(V - u), axis=1) > big.L - ell):
        raise ValueError("singular boxes must lie inside the big box")
    reach = 2 * ell + 1 + b * ell
    d = np.max(np.abs(V[:, None, :] - V[None, :, :]), axis=-1)
    _, comp = _components(d <= reach)
    groups = [V[comp == k] for k in range(comp.max() + 1)]
    # merge groups whose bounding cubes meet
    while True:
        boxes = [_bounding_cube(g, ell, big) for g in groups]
        merged = False
        for i in range(len(groups)):
            for j in range(i + 1, len(groups)):
                gap = np.abs(np.asarray(boxes[i].center) - np.asarray(boxes[j].center))
                if np.all(gap <= boxes[i].L + boxes[j].L):
                    groups[i] = np.vstack([groups[i], groups[j]])
                    del groups[j]
                    merged = True
                    break
            if merged:
                break
        if not merged:
            break
    total = 0
    for g in groups:
        k = kernels.max_disjoint(g, ell, n + 1)
        total += k
        out.clusters.append(Cluster(g, _bounding_cube(g, ell, big), k))
    r = np.max(np.abs(V - u), axis=1)
    intervals = [(max(0, int(ri) - ell), int(ri) + ell) for ri in r]
    out.cover = AnnularCover.from_intervals(intervals, lo=0, hi=big.L)
    if total > n:
        raise BudgetExceeded("count", total, out.W)
    if out.W > 2 * n * ell:
        raise BudgetExceeded("width", total, out.W)
    return out


def singular_cluster_set(ops, big: LatticeBox, ell: int, E: float, m: float, n: int,
                         b: float = 0.0) -> SingularClusterSet:
    """Classify every ``ell``-sub-box of ``big`` at ``E`` and cluster the singular ones.

    ``ops`` maps a box to its operator (an ``OperatorFactory``).
    """
    r = big.L - ell
    centers = big.sub(big.center, r).points()
    V = [v for v in centers if is_singular(ops(big.sub(tuple(int(c) for c in v), ell)),
                                           E, m).singular]
    return build_singular_clusters(big, ell, np.array(V, dtype=np.int64).reshape(-1, big.D),
                                   n, b)


def _components(adj: np.ndarray):
    return connected_components(adj.astype(np.int8), directed=False)


# -- subharmonicity ------------------------------------------------------------

def reference_radii(L: int, D: int, ell: int, S: Optional[SingularClusterSet],
                    A: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-point reference shells ``lo <= ||w - x|| <= hi`` and exemption mask.

    Off S the shell is the out-layer of ``B_ell(x)``; on S it is
    ``[rho, rho + 2 ell - 1]`` with ``rho`` the distance needed to leave
    the singular set plus ``ell``, clamped to ``[ell, A ell]``.
    """
    shape = (2 * L + 1,) * D
    grids = np.meshgrid(*([np.arange(-L, L + 1)] * D), indexing="ij")
    r = np.max(np.abs(np.stack(grids)), axis=0)
    exempt = r > L - ell
    lo = np.full(shape, max(ell - 1, 0), dtype=np.int64)
    hi = np.full(shape, ell, dtype=np.int64)
    if S is not None and S.clusters:
        mask = S.mask()
        # chessboard distance to the nearest point outside S (beyond the box counts)
        exit_d = ndimage.distance_transform_cdt(np.pad(mask, 1), metric="chessboard")
        exit_d = exit_d[tuple(slice(1, -1) for _ in range(D))]
        rho = np.clip(exit_d + ell, ell, int(math.floor(A * ell)))
        lo = np.where(mask, rho, lo)
        hi = np.where(mask, rho + 2 * ell - 1, hi)
    return lo, hi, exempt


@dataclass
class SubharmonicReport:
    ok: bool
    violations: List[Tuple[Tuple[int, ...], float, float]]   # (x, f(x), q * max)

    def __bool__(self):
        return self.ok


def subharmonic_check(f: np.ndarray, q: float, ell: int, S: Optional[SingularClusterSet] = None,
                      A: float = 2.0, rtol: float = 1e-12) -> SubharmonicReport:
    """Check the two contraction inequalities at every non-exempt point."""
    f = np.asarray(f, dtype=float)
    D = f.ndim
    L = (f.shape[0] - 1) // 2
    lo, hi, exempt = reference_radii(L, D, ell, S, A)
    ref = kernels.shell_max(f, lo, hi)
    bad = (~exempt) & (f > q * ref * (1 + rtol))
    viol = [(tuple(int(i) - L for i in idx), float(f[idx]), float(q * ref[idx]))
            for idx in zip(*np.nonzero(bad))]
    return SubharmonicReport(not viol, viol)


def descent_depth(L: int, D: int, ell: int, S: Optional[SingularClusterSet] = None,
                  A: float = 2.0) -> np.ndarray:
    """Fewest descent steps from each point to the exempt boundary layer.

    For a subharmonic f, ``f(x) <= q^depth(x) max f``; this is the sharp
    certificate implied by the inequalities alone.
    """
    lo, hi, exempt = reference_radii(L, D, ell, S, A)
    depth = np.where(exempt, 0.0, np.inf)
    while True:
        new = np.where(exempt, 0.0, np.minimum(depth, kernels.shell_min(depth, lo, hi) + 1))
        if np.array_equal(new, depth):
            return depth
        depth = new


def radial_descent_exponent(L: int, W: float, ell: int, annuli: int = 1) -> float:
    """``(L - W - (2j + 1) l) / l`` for a cover with ``j`` annuli (j >= 1)."""
    j = max(1, annuli)
    return (L - W - (2 * j + 1) * ell) / ell


def radial_descent_bound(q: float, L: int, W: float, ell: int, max_f: float,
                         annuli: int = 1) -> float:
    """Upper bound ``q^((L - W - 3 l)/l) max f`` on the center value.

    Each extra annulus beyond the first costs another ``2 l`` of radius.
    A non-positive exponent returns ``max_f`` with a warning.
    """
    if not (0 < q < 1):
        raise ValueError("q must lie in (0, 1)")
    e = radial_descent_exponent(L, W, ell, annuli)
    if e <= 0:
        warnings.warn(f"box too small for radial descent (exponent {e:.3g})",
                      RuntimeWarning, stacklevel=2)
        return float(max_f)
    return float(q ** e * max_f)


def synthetic_subharmonic(L: int, D: int, ell: int, q: float, rng: np.random.Generator,
                          S: Optional[SingularClusterSet] = None, A: float = 2.0,
                          extremal: bool = False, tol: float = 1e-14) -> np.ndarray:
    """Random (q, l, S)-subharmonic function built from boundary-layer values.

    Exempt points get random values in (0, 1]; every other point solves
    ``f(x) = xi(x) q max_{ref(x)} f`` with random ``xi`` in (0, 1] (all ones
    when ``extremal``), found by monotone fixed-point iteration.
    """
    if not (0 < q < 1):
        raise ValueError("q must lie in (0, 1)")
    lo, hi, exempt = reference_radii(L, D, ell, S, A)
    shape = exempt.shape
    xi = np.ones(shape) if extremal else rng.uniform(1e-3, 1.0, shape)
    f = np.where(exempt, rng.uniform(1e-3, 1.0, shape), 0.0)
    while True:
        new = np.where(exempt, f, xi * q * kernels.shell_max(f, lo, hi))
        if np.max(np.abs(new - f)) <= tol * max(1.0, np.max(f)):
            return new
        f = new


def random_cluster_set(big: LatticeBox, ell: int, n: int, rng: np.random.Generator,
                       max_tries: int = 50) -> SingularClusterSet:
    """Random admissible cluster set (for property tests and benchmarks)."""
    r = big.L - ell
    for _ in range(max_tries):
        k = int(rng.integers(0, n + 1))
        V = rng.integers(-r, r + 1, size=(k, big.D)) + np.asarray(big.center)
        try:
            return build_singular_clusters(big, ell, V, n)
        except BudgetExceeded:
            continue
    return SingularClusterSet(ell, big)


def lattice_function(big: LatticeBox, values_by_point) -> np.ndarray:
    """Dense array over ``B_L(u)`` from a mapping ``point -> value``."""
    L, D = big.L, big.D
    f = np.zeros((2 * L + 1,) * D)
    u = np.asarray(big.center)
    for x, val in values_by_point.items():
        f[tuple(np.asarray(x) - u + L)] = val
    return f
