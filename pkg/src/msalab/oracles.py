"""
Brute-force references for the classifiers.

Every sub-cube is diagonalised densely and every resolvent is an explicit
inverse, so these are slow and only meant for small boxes.
"""

import math

import numpy as np

from .geometry import LatticeBox, ball_points, out_layer
from .hamiltonian import NEAR_SPECTRUM, FiniteVolumeOperator, assemble
from .msa import ALPHA, OperatorFactory, gamma, resonance_threshold, subcube_radii


def all_subcubes(box: LatticeBox, alpha: float = ALPHA):
    """Every sub-cube with radius between the minimal sub-scale and ``L``."""
    for ell in subcube_radii(box.L, alpha, exhaustive=True):
        for c in ball_points(box.center, box.L - ell):
            yield box.sub(tuple(int(x) for x in c), ell)


def brute_resonant(ops: OperatorFactory, box: LatticeBox, E: float,
                   alpha: float = ALPHA) -> bool:
    for sub in all_subcubes(box, alpha):
        # assembled from scratch rather than cut out of the parent
        w = np.linalg.eigvalsh(assemble(sub, ops.disorder, ops.mesh).dense())
        if np.min(np.abs(w - E)) < resonance_threshold(sub.L):
            return True
    return False


def brute_singular(op: FiniteVolumeOperator, E: float, m: float) -> bool:
    w = np.linalg.eigvalsh(op.dense())
    if np.min(np.abs(w - E)) < NEAR_SPECTRUM:
        return True
    G = np.linalg.inv(op.dense() - E * np.eye(op.N))
    cu = op.cell(op.box.center)
    best = 0.0
    for v in out_layer(op.box):
        b = G[np.ix_(cu, op.cell(v))]
        if b.size:
            best = max(best, float(np.linalg.norm(b, 2)))
    return best > math.exp(-gamma(m, op.box.L))
