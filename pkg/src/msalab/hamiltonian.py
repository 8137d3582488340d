"""
Finite-volume Dirichlet Hamiltonians, their spectra and cell-block Green norms.

The kinetic term ``-1/2 Laplacian`` is discretised by second-order central
differences on a grid of spacing ``h`` that contains every lattice point, so
unit cells always align with the grid. With ``h = 1`` (tight-binding mode)
the grid is the lattice box itself.
"""

from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, Optional

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.linalg import lapack

from .disorder import AmplitudeField, BumpProfile, InteractionPotential, potential_values
from .geometry import LatticeBox
from .io import atomic_write_text

NEAR_SPECTRUM = 1e-12
DENSE_LIMIT = 400
SPARSE_LIMIT = 800
# below this size every energy is served from one full eigendecomposition
SPECTRAL_LIMIT = 64


class AssemblyError(ValueError):
    pass


class SolverError(RuntimeError):
    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = residuals


class NearSingularError(ArithmeticError):
    """Energy too close to the spectrum for a stable resolvent."""

    def __init__(self, E, distance):
        super().__init__(f"E={E!r} lies within {distance:.3g} of the spectrum")
        self.E = E
        self.distance = distance


@dataclass(frozen=True)
class Mesh:
    h: float = 1.0
    mode: str = "tight-binding"

    def __post_init__(self):
        if self.mode not in ("tight-binding", "continuum"):
            raise AssemblyError(f"unknown mesh mode {self.mode!r}")
        if self.mode == "tight-binding" and self.h != 1.0:
            raise AssemblyError("tight-binding mode uses h = 1")
        inv = 1.0 / self.h
        if self.h <= 0 or abs(inv - round(inv)) > 1e-12:
            raise AssemblyError(f"1/h must be a positive integer, got h={self.h}")

    @property
    def per_unit(self) -> int:
        return int(round(1.0 / self.h))

    def axis_offsets(self, L: int) -> np.ndarray:
        """Integer grid offsets (in units of h) along one axis of a radius-L cube."""
        k = L * self.per_unit
        if self.mode == "tight-binding":
            return np.arange(-k, k + 1)
        return np.arange(-k + 1, k)


TIGHT_BINDING = Mesh()


@dataclass(frozen=True)
class Disorder:
    """One realisation: amplitudes, bump profile and pair interaction."""

    field: AmplitudeField
    profile: BumpProfile = BumpProfile()
    interaction: Optional[InteractionPotential] = InteractionPotential()

    @classmethod
    def zero(cls, dim: int = 1, interaction=None) -> "Disorder":
        return cls(AmplitudeField(0, M=0.0, dim=dim), BumpProfile(), interaction)


@dataclass(eq=False)
class FiniteVolumeOperator:
    box: LatticeBox
    mesh: Mesh
    shape: tuple
    coords: np.ndarray          # grid positions in units of h, absolute
    potential: np.ndarray       # U + V per grid point
    _cache: Dict = field(default_factory=dict, repr=False)

    @property
    def N(self) -> int:
        return len(self.potential)

    @property
    def positions(self) -> np.ndarray:
        return self.coords * self.mesh.h

    @cached_property
    def bandwidth(self) -> int:
        return int(np.prod(self.shape[1:])) if len(self.shape) > 1 else 1

    @cached_property
    def matrix(self) -> sp.csr_matrix:
        h2 = self.mesh.h ** 2
        D = len(self.shape)
        diag = D / h2 + self.potential
        idx = np.arange(self.N).reshape(self.shape)
        rows, cols = [], []
        for ax in range(D):
            sl_a = [slice(None)] * D
            sl_b = [slice(None)] * D
            sl_a[ax] = slice(0, -1)
            sl_b[ax] = slice(1, None)
            a = idx[tuple(sl_a)].ravel()
            b = idx[tuple(sl_b)].ravel()
            rows += [a, b]
            cols += [b, a]
        rows = np.concatenate(rows + [np.arange(self.N)])
        cols = np.concatenate(cols + [np.arange(self.N)])
        vals = np.concatenate([np.full(len(rows) - self.N, -0.5 / h2), diag])
        m = sp.csr_matrix((vals, (rows, cols)), shape=(self.N, self.N))
        m.sort_indices()
        return m

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()

    @cached_property
    def _band(self) -> np.ndarray:
        """Lower banded storage for LAPACK symmetric band routines."""
        bw = self.bandwidth
        ab = np.zeros((bw + 1, self.N))
        m = self.matrix.tocoo()
        low = m.row >= m.col
        ab[m.row[low] - m.col[low], m.col[low]] = m.data[low]
        return ab

    @cached_property
    def _gb_band(self) -> np.ndarray:
        """General band storage with room for LU fill-in (LAPACK ``gbtrf``)."""
        bw = self.bandwidth
        ab = np.zeros((3 * bw + 1, self.N))
        m = self.matrix.tocoo()
        ab[2 * bw + m.row - m.col, m.col] = m.data
        return ab

    @cached_property
    def norm_bound(self) -> float:
        """Gershgorin upper bound on the operator norm."""
        m = abs(self.matrix)
        return float(np.max(np.asarray(m.sum(axis=1)).ravel()))

    @cached_property
    def gershgorin_lower(self) -> float:
        m = self.matrix
        off = np.asarray(abs(m).sum(axis=1)).ravel() - np.abs(m.diagonal())
        return float(np.min(m.diagonal() - off))

    # -- spectra -------------------------------------------------------

    def eigenvalues_in(self, lo: float, hi: float) -> np.ndarray:
        key = ("window", float(lo), float(hi))
        if key not in self._cache:
            # reuse any cached window that covers [lo, hi]
            for k, w in list(self._cache.items()):
                if k[0] == "window" and k[1] <= lo and hi <= k[2]:
                    self._cache[key] = w[(w >= lo) & (w <= hi)]
                    return self._cache[key]
            if hi < self.gershgorin_lower:
                w = np.empty(0)
            elif self.N <= SPECTRAL_LIMIT:
                w = self.full_eigh[0]
                w = w[(w >= lo) & (w <= hi)]
            elif self.N > SPARSE_LIMIT:
                w = self._shift_invert_window(lo, hi)
            else:
                w = sla.eig_banded(self._band, lower=True, eigvals_only=True,
                                   select="v", select_range=(lo, hi))
            self._cache[key] = np.sort(w)
        return self._cache[key]

    def _shift_invert_window(self, lo: float, hi: float) -> np.ndarray:
        """Eigenvalues in ``[lo, hi]`` by shift-invert Lanczos about the midpoint.

        The k eigenvalues nearest the shift are requested with k doubling
        until the farthest of them lies outside the window, which certifies
        that none inside was missed.
        """
        sigma = 0.5 * (lo + hi)
        half = 0.5 * (hi - lo)
        A = (self.matrix - sigma * sp.identity(self.N, format="csr")).tocsc()
        try:
            lu = spla.splu(A)
        except RuntimeError:
            # shift sits on an eigenvalue; fall back to the band solver
            return sla.eig_banded(self._band, lower=True, eigvals_only=True,
                                  select="v", select_range=(lo, hi))
        op = spla.LinearOperator(A.shape, matvec=lu.solve, dtype=float)
        # a generic start vector reaches every symmetry sector
        v0 = np.random.default_rng(0).standard_normal(self.N)
        k = 8
        while 4 * k < self.N:
            mu = spla.eigsh(op, k=k, which="LM", v0=v0, tol=0,
                            return_eigenvectors=False)
            lam = sigma + 1.0 / mu
            if np.max(np.abs(lam - sigma)) > half:
                return lam[(lam >= lo) & (lam <= hi)]
            k *= 2
        return sla.eig_banded(self._band, lower=True, eigvals_only=True,
                              select="v", select_range=(lo, hi))

    def distance_to_spectrum(self, E: float, window: float = 1.0) -> float:
        """``dist(E, spectrum)``, exact when below ``window``, else ``>= window``."""
        w = self.eigenvalues_in(E - window, E + window)
        if len(w) == 0:
            return float(window)
        return float(np.min(np.abs(w - E)))

    def distances(self, energies, window: float = 1.0) -> np.ndarray:
        """Vectorised :meth:`distance_to_spectrum` over an energy grid."""
        energies = np.atleast_1d(np.asarray(energies, dtype=float))
        if len(energies) == 0:
            return np.empty(0)
        # cheap exit: the whole window lies below the spectrum
        if self.N > 1 and self.is_above(energies.max() + window + 1e-9):
            return np.full(len(energies), float(window))
        w = self.eigenvalues_in(energies.min() - window, energies.max() + window)
        if len(w) == 0:
            return np.full(len(energies), float(window))
        d = np.min(np.abs(w[None, :] - energies[:, None]), axis=1)
        return np.minimum(d, window)

    def spectrum(self, k: int, vectors: bool = False, check: bool = True):
        """The ``k`` smallest eigenvalues (and unit eigenvectors)."""
        if not (1 <= k <= self.N):
            raise ValueError(f"k must lie in [1, {self.N}], got {k}")
        if self.N == 1:
            w = np.array([self.potential[0] + len(self.shape) / self.mesh.h ** 2])
            v = np.ones((1, 1))
        else:
            out = sla.eig_banded(self._band, lower=True, eigvals_only=not vectors,
                                 select="i", select_range=(0, k - 1))
            w, v = (out if vectors else (out, None))
        if vectors and check:
            self._check_residuals(w, v)
        return (w, v) if vectors else w

    def eigenpairs_in(self, lo: float, hi: float):
        if self.N == 1:
            a = self.potential[0] + len(self.shape) / self.mesh.h ** 2
            if lo <= a <= hi:
                return np.array([a]), np.ones((1, 1))
            return np.empty(0), np.empty((1, 0))
        w, v = sla.eig_banded(self._band, lower=True, select="v", select_range=(lo, hi))
        self._check_residuals(w, v)
        return w, v

    def _check_residuals(self, w, v):
        if v is None or v.size == 0:
            return
        res = np.linalg.norm(self.matrix @ v - v * w, axis=0)
        tol = 1e-8 * self.norm_bound
        if np.any(res > tol):
            raise SolverError(f"eigenpair residuals exceed {tol:.3g}", residuals=res)

    def is_above(self, E: float) -> bool:
        """True when ``H - E`` is positive definite, i.e. ``E < lambda_min``."""
        ab = self._band.copy()
        ab[0] -= E
        try:
            sla.cholesky_banded(ab, lower=True, check_finite=False)
        except np.linalg.LinAlgError:
            return False
        return True

    def restrict(self, sub: LatticeBox) -> "FiniteVolumeOperator":
        """Operator on a sub-box: a principal submatrix of this one."""
        if not self.box.contains_box(sub):
            raise AssemblyError(f"{sub} is not contained in {self.box}")
        offs = self.mesh.axis_offsets(sub.L)
        D = len(self.shape)
        shape = (len(offs),) * D
        grids = np.meshgrid(*([offs] * D), indexing="ij")
        rel = np.stack([g.ravel() for g in grids], axis=1)
        coords = rel + np.asarray(sub.center, dtype=np.int64) * self.mesh.per_unit
        idx = np.ravel_multi_index(tuple((coords - self.coords[0]).T), self.shape)
        return FiniteVolumeOperator(sub, self.mesh, shape, coords, self.potential[idx])

    @cached_property
    def full_eigh(self):
        """Complete eigendecomposition; only for small operators."""
        return np.linalg.eigh(self.dense())

    def spectral_norms_from(self, u, targets, energies):
        """``R(u, w; E)`` for many energies from the full eigendecomposition.

        Returns ``(norms, dist)`` with ``norms`` of shape ``(len(energies),
        len(targets))`` and ``dist`` the distance of each energy to the
        spectrum. Rows with ``dist < NEAR_SPECTRUM`` are set to ``inf``.
        Meant for small operators only.
        """
        energies = np.atleast_1d(np.asarray(energies, dtype=float))
        w, V = self.full_eigh
        gap = w[None, :] - energies[:, None]
        dist = np.min(np.abs(gap), axis=1)
        safe = dist >= NEAR_SPECTRUM
        coef = np.zeros_like(gap)
        coef[safe] = 1.0 / gap[safe]
        Vu = V[self.cell(u)]
        padded = np.vstack([V, np.zeros((1, self.N))])[self.cell_matrix(targets)]
        # blocks[e, t, i, j] = sum_a V[w_t,i; a] V[u_j; a] / (lambda_a - E_e)
        blocks = np.einsum("tia,ea,ja->etij", padded, coef, Vu, optimize=True)
        if blocks.size == 0:
            norms = np.zeros((len(energies), len(padded)))
        else:
            norms = np.linalg.norm(blocks, ord=2, axis=(2, 3))
        norms[~safe] = np.inf
        return norms, dist

    # -- resolvent -----------------------------------------------------

    def green(self, E: float, check: bool = True) -> "GreenSolver":
        key = ("green", float(E))
        g = self._cache.get(key)
        if g is None:
            g = GreenSolver(self, float(E), check=check)
            self._cache[key] = g
        return g

    def cell(self, v) -> np.ndarray:
        """Grid indices inside the closed unit cell C(v), clipped to the box."""
        key = ("cell", tuple(int(c) for c in v))
        idx = self._cache.get(key)
        if idx is None:
            pu = self.mesh.per_unit
            rel = np.asarray(key[1], dtype=np.int64) * pu - self.coords[0]
            n = np.array(self.shape)
            lo = np.clip(rel - pu, 0, n)
            hi = np.clip(rel + pu + 1, 0, n)
            if np.any(hi <= lo):
                idx = np.empty(0, dtype=np.int64)
            else:
                axes = [np.arange(a, b) for a, b in zip(lo, hi)]
                grids = np.meshgrid(*axes, indexing="ij")
                idx = np.ravel_multi_index(tuple(g.ravel() for g in grids), self.shape)
            self._cache[key] = idx
        return idx

    def cell_matrix(self, targets) -> np.ndarray:
        """Cell index lists of ``targets`` stacked into a rectangle.

        Short rows are padded with ``N`` (one past the last grid index).
        """
        targets = np.asarray(targets, dtype=np.int64).reshape(-1, len(self.shape))
        key = ("cells", targets.tobytes())
        out = self._cache.get(key)
        if out is None:
            cells = [self.cell(w) for w in targets]
            width = max((len(c) for c in cells), default=0)
            out = np.full((len(cells), width), self.N, dtype=np.int64)
            for i, c in enumerate(cells):
                out[i, :len(c)] = c
            self._cache[key] = out
        return out

    def index_of(self, x) -> int:
        """Grid index of a lattice or grid position (in physical units)."""
        g = np.rint(np.asarray(x, dtype=float) / self.mesh.h).astype(np.int64)
        rel = g - self.coords[0]
        if np.any(rel < 0) or np.any(rel >= np.array(self.shape)):
            raise IndexError(f"{x} outside grid")
        return int(np.ravel_multi_index(tuple(rel), self.shape))

    def dump_coordinate(self, path) -> None:
        """Write ``row col value`` lines (1-based, 17 significant digits)."""
        m = self.matrix.tocoo()
        order = np.lexsort((m.col, m.row))
        lines = [f"{self.N} {self.N} {m.nnz}"]
        lines += [f"{m.row[i] + 1} {m.col[i] + 1} {m.data[i]:.17g}" for i in order]
        atomic_write_text(path, "\n".join(lines) + "\n")


class GreenSolver:
    """Factorised ``H - E`` giving cell-block norms of the resolvent.

    Small operators are inverted densely; larger ones use a banded LU
    factorisation with one step of iterative refinement per solve.
    """

    def __init__(self, op: FiniteVolumeOperator, E: float, check: bool = True):
        self.op = op
        self.E = E
        self.distance = None
        # below the spectrum a Cholesky factorisation certifies the gap cheaply
        if check and not (op.N > 1 and op.is_above(E + NEAR_SPECTRUM)):
            dist = op.distance_to_spectrum(E)
            if dist < NEAR_SPECTRUM:
                raise NearSingularError(E, dist)
            self.distance = dist
        if op.N <= DENSE_LIMIT:
            self._inv = np.linalg.inv(op.dense() - E * np.eye(op.N))
        else:
            self._inv = None
            bw = op.bandwidth
            ab = op._gb_band.copy()
            ab[2 * bw] -= E
            self._lu, self._piv, info = lapack.dgbtrf(ab, bw, bw)
            if info > 0:
                raise NearSingularError(E, 0.0)
        self._cols: Dict[int, np.ndarray] = {}

    def _solve(self, rhs: np.ndarray) -> np.ndarray:
        bw = self.op.bandwidth
        x, info = lapack.dgbtrs(self._lu, bw, bw, rhs, self._piv)
        if info != 0:
            raise SolverError(f"banded solve failed (info={info})")
        return x

    def columns(self, idx: np.ndarray) -> np.ndarray:
        """Resolvent columns ``G[:, idx]``."""
        idx = np.asarray(idx, dtype=np.int64)
        if self._inv is not None:
            return self._inv[:, idx]
        missing = [int(i) for i in idx if int(i) not in self._cols]
        if missing:
            rhs = np.zeros((self.op.N, len(missing)))
            rhs[missing, np.arange(len(missing))] = 1.0
            sol = self._solve(rhs)
            # one step of iterative refinement
            r = rhs - (self.op.matrix @ sol - self.E * sol)
            sol += self._solve(r)
            for j, i in enumerate(missing):
                self._cols[i] = sol[:, j]
        return np.stack([self._cols[int(i)] for i in idx], axis=1)

    def block(self, u, v) -> np.ndarray:
        """``1_C(u) G 1_C(v)`` as a matrix (rows in C(u), columns in C(v))."""
        cu = self.op.cell(u)
        cv = self.op.cell(v)
        return self.columns(cv)[cu, :]

    def norm(self, u, v) -> float:
        b = self.block(u, v)
        if b.size == 0:
            return 0.0
        return float(np.linalg.norm(b, 2))

    def norms_from(self, u, targets) -> np.ndarray:
        """``R(u, w)`` for every ``w`` in ``targets`` using columns of C(u)."""
        cols = self.columns(self.op.cell(u))
        idx = self.op.cell_matrix(targets)
        # padded rows point at an appended zero row and leave norms unchanged
        padded = np.vstack([cols, np.zeros((1, cols.shape[1]))])
        blocks = padded[idx]
        if blocks.size == 0:
            return np.zeros(len(idx))
        return np.linalg.norm(blocks, ord=2, axis=(1, 2))


def assemble(box: LatticeBox, disorder: Disorder, mesh: Mesh = TIGHT_BINDING
             ) -> FiniteVolumeOperator:
    """Dirichlet finite-difference Hamiltonian ``-1/2 Lap + U + V`` on ``box``."""
    offs = mesh.axis_offsets(box.L)
    if len(offs) == 0:
        raise AssemblyError(f"empty grid for L={box.L}, h={mesh.h}")
    D = box.D
    shape = (len(offs),) * D
    grids = np.meshgrid(*([offs] * D), indexing="ij")
    rel = np.stack([g.ravel() for g in grids], axis=1)
    coords = rel + np.asarray(box.center, dtype=np.int64) * mesh.per_unit
    pos = coords * mesh.h
    d = box.dim
    pot = np.zeros(len(pos))
    for p in range(box.particles):
        pot += potential_values(disorder.field, disorder.profile, pos[:, p * d:(p + 1) * d])
    if box.particles == 2 and disorder.interaction is not None:
        pot += disorder.interaction(pos[:, :d], pos[:, d:])
    return FiniteVolumeOperator(box, mesh, shape, coords, pot)


def green_block(op: FiniteVolumeOperator, E: float, u, v) -> float:
    """``|| 1_C(u) (H - E)^{-1} 1_C(v) ||``."""
    return op.green(E).norm(u, v)


def dense_green_block(op: FiniteVolumeOperator, E: float, u, v) -> float:
    """Reference value via explicit inversion (small operators only)."""
    G = np.linalg.inv(op.dense() - E * np.eye(op.N))
    b = G[np.ix_(op.cell(u), op.cell(v))]
    return float(np.linalg.norm(b, 2)) if b.size else 0.0


def cell_norm_profile(psi: np.ndarray, op: FiniteVolumeOperator) -> Dict[tuple, float]:
    """``v -> ||1_C(v) psi||`` over lattice points of the box.

    ``psi`` holds grid values of an L2-normalised function (quadrature
    weight ``h^D`` per grid point).
    """
    w = op.mesh.h ** op.box.D
    mass = w * np.asarray(psi, dtype=float) ** 2
    out = {}
    for v in op.box.points():
        out[tuple(int(c) for c in v)] = float(np.sqrt(mass[op.cell(v)].sum()))
    return out


def grid_function(eigvec: np.ndarray, op: FiniteVolumeOperator) -> np.ndarray:
    """Rescale a unit eigenvector to an L2-normalised grid function."""
    return np.asarray(eigvec) / op.mesh.h ** (op.box.D / 2)


def closed_form_dirichlet(N: int, h: float = 1.0) -> np.ndarray:
    k = np.arange(1, N + 1)
    return (1.0 - np.cos(np.pi * k / (N + 1))) / h ** 2
