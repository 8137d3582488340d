"""
Box classification for the multi-scale analysis.

A box is *resonant* at energy E when some sub-cube has an eigenvalue
closer to E than ``exp(-sqrt(l))``; it is *(E, m)-singular* when the
Green norm from its center cell to an out-layer cell exceeds
``exp(-gamma(m, L))``. Both predicates are evaluated on whole energy
grids at once because every Monte Carlo event quantifies over E.
"""

import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from .geometry import (GeometryError, LatticeBox, box_distance, is_interactive,
                       out_layer, shell_points)
from .hamiltonian import (TIGHT_BINDING, Disorder, FiniteVolumeOperator, Mesh,
                          NEAR_SPECTRUM, SPECTRAL_LIMIT, NearSingularError,
                          assemble)

ALPHA = 1.5
BETA = 0.5


class ClassificationError(ValueError):
    pass


# -- scalar formulas ---------------------------------------------------------

def gamma(m: float, L: float) -> float:
    """Decay exponent ``m L (1 + L^(-1/4))``."""
    if m < 0 or L < 1:
        raise ValueError(f"gamma needs m >= 0 and L >= 1, got m={m}, L={L}")
    return m * L * (1.0 + L ** -0.25)


@dataclass(frozen=True)
class MassRescalingReport:
    """Per-unit-length comparison of decay rates across one scale step.

    ``lhs`` is ``m (1 + L^-1/4)(1 - L^-1/2)`` expanded exactly, ``rhs`` is
    ``m (1 + L_next^-1/4)``; ``lhs_printed`` uses a fourth term
    ``L^-1/8`` in place of the correct ``L^-3/4``.
    """

    holds: bool
    lhs: float
    rhs: float
    lhs_printed: float
    holds_printed: bool

    def __bool__(self):
        return self.holds


def mass_rescaling_check(m_k: float, L_k: float, L_next: float) -> MassRescalingReport:
    if L_next <= L_k:
        raise ValueError("L_next must exceed L_k")
    a, b, c = L_k ** -0.25, L_k ** -0.5, L_k ** -0.75
    lhs = m_k * (1.0 + a - b - c)
    printed = m_k * (1.0 + a - b - L_k ** -0.125)
    rhs = m_k * (1.0 + L_next ** -0.25)
    return MassRescalingReport(lhs > rhs, lhs, rhs, printed, printed > rhs)


def resonance_threshold(ell: int) -> float:
    return math.exp(-ell ** BETA)


def min_subscale(L: int, alpha: float = ALPHA) -> int:
    # guard against 27 ** (2/3) = 8.999999
    return int(math.ceil(L ** (1.0 / alpha) - 1e-9))


def q_coefficient(m: float, ell: int, n: int, d: int, C_prime: float) -> float:
    """Contraction factor ``exp(-gamma(m,l) + l^beta) C' (n l)^(d-1)``."""
    if ell < 1:
        raise ValueError("ell must be >= 1")
    return math.exp(-gamma(m, ell) + ell ** BETA) * C_prime * (n * ell) ** (d - 1)


# -- classification record ---------------------------------------------------

@dataclass
class Classification:
    box: LatticeBox
    E: float
    resonant: Optional[bool] = None
    singular: Optional[bool] = None
    tunneling: Optional[bool] = None
    witness: Dict = field(default_factory=dict)

    def record(self, params: Optional[dict] = None) -> dict:
        """Flat JSON-ready audit record."""
        p = json.dumps(params or {}, sort_keys=True)
        return {
            "center": list(self.box.center),
            "L": self.box.L,
            "E": self.E,
            "resonant": self.resonant,
            "singular": self.singular,
            "tunneling": self.tunneling,
            "witness": self.witness,
            "params_hash": hashlib.sha256(p.encode()).hexdigest()[:16],
        }


class OperatorFactory:
    """Assembles (and caches) operators of one disorder realisation.

    Sub-boxes of a registered parent are cut out as principal submatrices,
    which is exact because the potential is a pointwise function.
    """

    def __init__(self, disorder: Disorder, mesh: Mesh = TIGHT_BINDING):
        self.disorder = disorder
        self.mesh = mesh
        self._ops: Dict[LatticeBox, FiniteVolumeOperator] = {}
        self._parents: List[FiniteVolumeOperator] = []

    def __call__(self, box: LatticeBox) -> FiniteVolumeOperator:
        op = self._ops.get(box)
        if op is None:
            parent = next((p for p in self._parents
                           if p.box.D == box.D and p.box.contains_box(box)), None)
            if parent is not None:
                op = parent.restrict(box)
            else:
                op = assemble(box, self.disorder, self.mesh)
                self._parents.append(op)
            self._ops[box] = op
        return op


# -- resonance ---------------------------------------------------------------

def subcube_radii(L: int, alpha: float = ALPHA, exhaustive: bool = False) -> List[int]:
    lo = min(min_subscale(L, alpha), L)
    if exhaustive:
        return list(range(lo, L + 1))
    radii, ell = [], lo
    while ell < L:
        radii.append(ell)
        ell *= 2
    radii.append(L)
    return radii


def subcube_offsets(L: int, ell: int, exhaustive: bool = False) -> np.ndarray:
    """Per-axis center offsets of radius-``ell`` cubes inside a radius-``L`` cube."""
    r = L - ell
    if exhaustive or r == 0:
        return np.arange(-r, r + 1)
    stride = int(math.ceil(ell / 2))
    return np.unique(np.concatenate([np.arange(-r, r + 1, stride), [0, r]]))


def subcubes(box: LatticeBox, alpha: float = ALPHA, exhaustive: bool = False):
    for ell in subcube_radii(box.L, alpha, exhaustive):
        offs = subcube_offsets(box.L, ell, exhaustive)
        grids = np.meshgrid(*([offs] * box.D), indexing="ij")
        for rel in zip(*(g.ravel() for g in grids)):
            yield box.sub(tuple(int(c) + u for c, u in zip(rel, box.center)), ell)


def resonance_scan(ops: OperatorFactory, box: LatticeBox, energies, alpha: float = ALPHA,
                   exhaustive: bool = False):
    """Per-energy resonance flags with witnesses.

    Returns ``(flags, witnesses)``; each witness is ``None`` or a dict
    ``{v, ell, distance}`` naming the first resonant sub-cube in
    enumeration order. An energy stops being scanned once flagged.
    """
    energies = np.atleast_1d(np.asarray(energies, dtype=float))
    n = len(energies)
    flags = np.zeros(n, dtype=bool)
    wit: List[Optional[dict]] = [None] * n
    if n == 0:
        return flags, wit
    radii = subcube_radii(box.L, alpha, exhaustive)
    parent = ops(box)
    # interlacing: sub-cube spectra lie above the parent's lowest eigenvalue
    if parent.is_above(energies.max() + resonance_threshold(radii[0]) + 1e-9):
        return flags, wit
    for sub in subcubes(box, alpha, exhaustive):
        pending = np.flatnonzero(~flags)
        if len(pending) == 0:
            break
        thr = resonance_threshold(sub.L)
        op = ops(sub)
        if op.N > 1 and op.is_above(energies[pending].max() + thr + 1e-9):
            continue
        d = op.distances(energies[pending], window=thr)
        for i, di in zip(pending, d):
            if di < thr:
                flags[i] = True
                wit[i] = {"v": list(sub.center), "ell": sub.L, "distance": float(di)}
    return flags, wit


def is_resonant(ops: OperatorFactory, box: LatticeBox, E: float, alpha: float = ALPHA,
                exhaustive: bool = False) -> Classification:
    if box.L < 2:
        raise GeometryError("resonance test needs L >= 2")
    flags, wit = resonance_scan(ops, box, [E], alpha, exhaustive)
    return Classification(box, float(E), resonant=bool(flags[0]),
                          witness=wit[0] or {})


# -- singularity -------------------------------------------------------------

def center_norms(op: FiniteVolumeOperator, E: float, targets=None):
    """``R(u, w; E)`` from the center cell to each out-layer cell ``w``."""
    if targets is None:
        targets = out_layer(op.box)
    return op.green(E).norms_from(op.box.center, targets), targets


def _singular_at(op, E, threshold, targets):
    try:
        norms, _ = center_norms(op, E, targets)
    except NearSingularError as exc:
        return True, {"w": None, "norm": math.inf, "near_singular": exc.distance}
    i = int(np.argmax(norms))
    return bool(norms[i] > threshold), {"w": [int(c) for c in targets[i]],
                                        "norm": float(norms[i])}


def singular_scan(op: FiniteVolumeOperator, energies, m: float, bisect: bool = True):
    """Per-energy ``(E, m)``-singularity flags and witnesses for one box.

    Below the bottom of the spectrum ``H - E`` is an M-matrix, so the
    resolvent is entrywise positive and increasing in E; the flags then
    form an up-set in E and are located by bisection.
    """
    energies = np.atleast_1d(np.asarray(energies, dtype=float))
    n = len(energies)
    flags = np.zeros(n, dtype=bool)
    wit: List[Optional[dict]] = [None] * n
    if n == 0:
        return flags, wit
    threshold = math.exp(-gamma(m, op.box.L))
    targets = out_layer(op.box)
    order = np.argsort(energies, kind="stable")
    # sorted energies below lambda_min form a prefix of length k
    k = 0
    if bisect:
        lo, hi = 0, n
        while lo < hi:
            mid = (lo + hi) // 2
            if op.is_above(energies[order[mid]]):
                lo = mid + 1
            else:
                hi = mid
        k = lo
    lo, hi = 0, k
    # find the first index in [0, k) that is singular
    while lo < hi:
        mid = (lo + hi) // 2
        i = order[mid]
        s, w = _singular_at(op, energies[i], threshold, targets)
        wit[i] = w
        if s:
            hi = mid
        else:
            lo = mid + 1
    for j in range(k):
        i = order[j]
        flags[i] = j >= lo
        if wit[i] is None:
            wit[i] = {"w": None, "norm": None, "monotone": True}
    if k < n and op.N <= SPECTRAL_LIMIT:
        rest = order[k:]
        norms, dist = op.spectral_norms_from(op.box.center, targets, energies[rest])
        for r, i in enumerate(rest):
            if dist[r] < NEAR_SPECTRUM:
                flags[i] = True
                wit[i] = {"w": None, "norm": math.inf, "near_singular": float(dist[r])}
            else:
                t = int(np.argmax(norms[r]))
                flags[i] = bool(norms[r, t] > threshold)
                wit[i] = {"w": [int(c) for c in targets[t]], "norm": float(norms[r, t])}
        return flags, wit
    if k < n:
        # one spectral window serves every energy above the bottom
        op.eigenvalues_in(energies[order[k]] - 1.0, energies[order[-1]] + 1.0)
    for j in range(k, n):
        i = order[j]
        flags[i], wit[i] = _singular_at(op, energies[i], threshold, targets)
    return flags, wit


def is_singular(op: FiniteVolumeOperator, E: float, m: float) -> Classification:
    if op.box.L < 2:
        raise GeometryError("singularity test needs L >= 2")
    threshold = math.exp(-gamma(m, op.box.L))
    s, w = _singular_at(op, float(E), threshold, out_layer(op.box))
    w["threshold"] = threshold
    return Classification(op.box, float(E), singular=s, witness=w)


# -- tunneling ---------------------------------------------------------------

def tunneling_scan(ops: OperatorFactory, box: LatticeBox, energies, m: float,
                   L_prev: int):
    """Single-particle tunneling on an energy grid.

    Returns ``(tunneling, witness)``; the witness names the first grid
    energy carrying two disjoint singular sub-boxes of radius ``L_prev``.
    """
    if box.particles != 1:
        raise ClassificationError("tunneling_scan expects a single-particle box")
    if L_prev >= box.L:
        raise ClassificationError("sub-scale must be smaller than the box")
    energies = np.atleast_1d(np.asarray(energies, dtype=float))
    if len(energies) == 0 or box.L - L_prev < L_prev + 1:
        # fewer than two disjoint placements fit
        return False, {}
    r = box.L - L_prev
    offs = np.arange(-r, r + 1)
    grids = np.meshgrid(*([offs] * box.dim), indexing="ij")
    centers = np.stack([g.ravel() for g in grids], axis=1) + np.asarray(box.center)
    table = np.zeros((len(centers), len(energies)), dtype=bool)
    for j, c in enumerate(centers):
        table[j], _ = singular_scan(ops(box.sub(c, L_prev)), energies, m)
    for i in range(len(energies)):
        s = centers[table[:, i]]
        if len(s) < 2:
            continue
        # disjoint iff max-norm center distance exceeds 2 L_prev
        d = np.max(np.abs(s[:, None, :] - s[None, :, :]), axis=-1)
        a, b = np.unravel_index(np.argmax(d), d.shape)
        if d[a, b] > 2 * L_prev:
            return True, {"E": float(energies[i]), "v1": s[a].tolist(), "v2": s[b].tolist()}
    return False, {}


def is_tunneling(ops: OperatorFactory, box: LatticeBox, m: float, energies,
                 L_prev: int) -> Classification:
    """Tunneling flag; a two-particle box delegates to its two factors."""
    factors = box.factors() if box.particles == 2 else (box,)
    for f in factors:
        t, w = tunneling_scan(ops, f, energies, m, L_prev)
        if t:
            return Classification(box, math.nan, tunneling=True,
                                  witness=dict(w, factor=list(f.center)))
    return Classification(box, math.nan, tunneling=False)


# -- lattice geometric resolvent inequality ---------------------------------

@dataclass(frozen=True)
class LgriResult:
    lhs: float
    rhs: float        # the sum with C_geom = 1

    @property
    def ratio(self) -> float:
        if self.rhs == 0.0:
            return 0.0 if self.lhs == 0.0 else math.inf
        return self.lhs / self.rhs

    def holds(self, C_geom: float, rtol: float = 1e-10) -> bool:
        return self.lhs <= C_geom * self.rhs * (1 + rtol) + 1e-300


def lgri_residual(outer: FiniteVolumeOperator, inner: FiniteVolumeOperator, E: float,
                  u, w) -> LgriResult:
    """Both sides of ``R_out(u,w) <= C sum_v R_in(u,v) R_out(v,w)``.

    ``v`` runs over the out-layer of the inner box, ``w`` must lie in the
    out-layer of the outer box and the inner box inside the outer one
    shrunk by 3.
    """
    B, Bt = inner.box, outer.box
    if Bt.L < 4 or not Bt.sub(Bt.center, Bt.L - 3).contains_box(B):
        raise GeometryError("inner box must lie in the outer box shrunk by 3")
    u = np.asarray(u)
    if not B.contains_point(u):
        raise GeometryError("u must lie in the inner box")
    dw = int(np.max(np.abs(np.asarray(w) - np.asarray(Bt.center))))
    if not (Bt.L - 2 < dw <= Bt.L):
        raise GeometryError("w must lie in the out-layer of the outer box")
    vs = out_layer(B)
    g_in = inner.green(E)
    g_out = outer.green(E)
    lhs = g_out.norm(u, w)
    r_in = g_in.norms_from(u, vs)
    r_out = g_out.norms_from(w, vs)
    return LgriResult(lhs, float(np.dot(r_in, r_out)))


# -- NITRoNS audit -----------------------------------------------------------

@dataclass
class NitronsOutcome:
    status: str               # "holds", "counterexample", "skipped-interactive",
                              # "skipped-resonant", "skipped-tunneling"
    classification: Classification

    @property
    def counterexample(self) -> bool:
        return self.status == "counterexample"


def nitrons_check(ops: OperatorFactory, box: LatticeBox, E: float, m: float, L_prev: int,
                  tunnel_energies, r0: float, alpha: float = ALPHA) -> NitronsOutcome:
    """Audit: non-interactive, non-resonant, non-tunneling implies non-singular."""
    c = Classification(box, float(E))
    if box.particles != 2:
        raise ClassificationError("nitrons_check needs a two-particle box")
    if is_interactive(box, r0):
        return NitronsOutcome("skipped-interactive", c)
    res = is_resonant(ops, box, E, alpha)
    c.resonant = res.resonant
    if res.resonant:
        c.witness["resonance"] = res.witness
        return NitronsOutcome("skipped-resonant", c)
    tun = is_tunneling(ops, box, m, tunnel_energies, L_prev)
    c.tunneling = tun.tunneling
    if tun.tunneling:
        c.witness["tunneling"] = tun.witness
        return NitronsOutcome("skipped-tunneling", c)
    sing = is_singular(ops(box), E, m)
    c.singular = sing.singular
    c.witness["singular"] = sing.witness
    return NitronsOutcome("counterexample" if sing.singular else "holds", c)


def boxes_disjoint(b1: LatticeBox, b2: LatticeBox) -> bool:
    return box_distance(b1, b2) > 0


def out_layer_size(D: int, ell: int) -> int:
    return len(shell_points(np.zeros(D, dtype=int), ell - 1, ell))


def audit_lines(records: Sequence[Classification], params: Optional[dict] = None) -> str:
    """Line-delimited JSON, one record per classification."""
    return "".join(json.dumps(r.record(params), sort_keys=True) + "\n" for r in records)
