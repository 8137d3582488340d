"""
Green blocks of non-interactive two-particle boxes from one-particle data.

Without interaction the two-particle operator is ``H' x 1 + 1 x H''``, so

    G(E) = sum_a  phi_a phi_a^T  x  (H'' - (E - lambda_a))^{-1}

over the eigenpairs of ``H'``. Modes with ``lambda_a > E + m_star`` are
dropped; each dropped term is bounded in norm by
``|phi_a(C x')| |phi_a(C y')| / (lambda_a - E + g'')`` where ``g''`` is a
Gershgorin lower bound for ``H''``.
"""

import math
from dataclasses import dataclass

import numpy as np

from .geometry import LatticeBox
from .hamiltonian import FiniteVolumeOperator


@dataclass(frozen=True)
class SeparableResult:
    value: float          # sigma_max of the truncated block
    tail: float           # certified bound on the norm of the dropped part
    retained: int
    expanded: int         # 0: modes of the first factor, 1: of the second


def _expand(opa: FiniteVolumeOperator, opb: FiniteVolumeOperator, E: float,
            xa, ya, xb, yb, m_star: float, swap: bool):
    w, V = opa.full_eigh
    keep = w <= E + m_star
    ca, da = opa.cell(xa), opa.cell(ya)
    cb, db = opb.cell(xb), opb.cell(yb)
    block = np.zeros((len(ca) * len(cb), len(da) * len(db)))
    for a in np.flatnonzero(keep):
        outer = np.outer(V[ca, a], V[da, a])
        # raises NearSingularError when E - lambda_a hits the other spectrum
        gb = opb.green(E - w[a]).block(xb, yb)
        block += _kron(outer, gb, swap)
    tail = 0.0
    gap0 = opb.gershgorin_lower
    for a in np.flatnonzero(~keep):
        gap = w[a] - E + gap0
        if gap <= 0:
            raise ValueError("cutoff too small to certify the dropped modes")
        tail += np.linalg.norm(V[ca, a]) * np.linalg.norm(V[da, a]) / gap
    value = float(np.linalg.norm(block, 2)) if block.size else 0.0
    return value, float(tail), int(keep.sum())


def _kron(outer, gb, swap):
    # rows of the two-particle block are ordered with particle one outermost
    if not swap:
        return np.kron(outer, gb)
    return np.kron(gb, outer)


def retained_modes(op: FiniteVolumeOperator, E: float, m_star: float) -> int:
    return int(np.sum(op.full_eigh[0] <= E + m_star))


def separable_green(op1: FiniteVolumeOperator, op2: FiniteVolumeOperator, E: float,
                    x, y, m_star: float = math.inf, expand: str = "auto"
                    ) -> SeparableResult:
    """Truncated separable expansion of ``R(x, y; E)`` on ``Lambda' x Lambda''``.

    Parameters
    ----------
    op1, op2
        One-particle operators of the two factors.
    x, y
        Two-particle lattice points ``(x', x'')`` and ``(y', y'')``.
    m_star
        Keep modes with ``E - lambda_a >= -m_star``; ``inf`` keeps all.
    expand
        ``"first"``, ``"second"`` or ``"auto"`` (the factor keeping fewer
        modes).
    """
    d = op1.box.D
    x = tuple(int(c) for c in x)
    y = tuple(int(c) for c in y)
    if len(x) != 2 * d or len(y) != 2 * d:
        raise ValueError("x and y must be two-particle points")
    x1, x2, y1, y2 = x[:d], x[d:], y[:d], y[d:]
    if expand == "auto":
        n1 = retained_modes(op1, E, m_star)
        n2 = retained_modes(op2, E, m_star)
        expand = "first" if n1 <= n2 else "second"
    if expand == "first":
        v, t, k = _expand(op1, op2, E, x1, y1, x2, y2, m_star, swap=False)
        return SeparableResult(v, t, k, 0)
    if expand == "second":
        v, t, k = _expand(op2, op1, E, x2, y2, x1, y1, m_star, swap=True)
        return SeparableResult(v, t, k, 1)
    raise ValueError(f"unknown expansion {expand!r}")


def factor_operators(ops, box: LatticeBox):
    """One-particle operators on the two factors of a two-particle box."""
    f1, f2 = box.factors()
    return ops(f1), ops(f2)
