"""
Alloy-type random potential, bump profiles and the pair interaction.

Amplitudes are counter-based: the value at site ``s`` depends only on
``(seed, s)``, so any two regions see consistent values and disjoint
regions use independent Philox streams.
"""

from dataclasses import dataclass, field
from typing import Dict, Tuple

import numpy as np


class DisorderError(ValueError):
    pass


class CoveringViolation(DisorderError):
    def __init__(self, x, value, report):
        super().__init__(f"covering sum {value:.6g} < 1 at x={x}")
        self.x = x
        self.value = value
        self.report = report


_MASK21 = (1 << 21) - 1


def _site_code(site) -> int:
    code = 0
    for c in site:
        z = (2 * c) if c >= 0 else (-2 * c - 1)
        if z > _MASK21:
            raise DisorderError(f"site coordinate out of range: {site}")
        code = (code << 21) | z
    return code


@dataclass(frozen=True)
class BumpProfile:
    """Single-site bump ``phi``; ``tent`` is the multilinear hat of radius R."""

    kind: str = "tent"
    radius: float = 1.0
    scale: float = 1.0

    def __post_init__(self):
        if self.kind not in ("tent", "plateau"):
            raise DisorderError(f"unknown bump kind {self.kind!r}")
        if self.radius <= 0:
            raise DisorderError("bump radius must be positive")
        if self.scale < 0:
            raise DisorderError("bump scale must be non-negative")

    def __call__(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        if y.ndim == 1:
            y = y[:, None]
        a = np.abs(y)
        if self.kind == "tent":
            return self.scale * np.prod(np.clip(1.0 - a / self.radius, 0.0, None), axis=-1)
        return self.scale * (np.max(a, axis=-1) <= self.radius).astype(float)


@dataclass
class AmplitudeField:
    """Lazily sampled amplitudes ``V_s`` on ``Z^dim`` taking values in [0, M]."""

    seed: int
    M: float = 10.0
    law: str = "uniform"
    b: float = 1.0
    dim: int = 1
    _cache: Dict[Tuple[int, ...], float] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.law not in ("uniform", "hoelder"):
            raise DisorderError(f"unknown amplitude law {self.law!r}")
        if self.M < 0:
            raise DisorderError("amplitude bound M must be non-negative")
        if not (0 < self.b <= 1):
            raise DisorderError("Hoelder exponent b must lie in (0, 1]")
        self.seed = int(self.seed) % (1 << 64)

    def _draw(self, site) -> float:
        bg = np.random.Philox(key=np.array([self.seed, _site_code(site)], dtype=np.uint64))
        u = np.random.Generator(bg).random()
        if self.law == "hoelder":
            u = u ** (1.0 / self.b)
        return self.M * u

    def value(self, site) -> float:
        site = tuple(int(c) for c in np.atleast_1d(site))
        v = self._cache.get(site)
        if v is None:
            v = self._draw(site)
            self._cache[site] = v
        return v

    def values(self, sites) -> np.ndarray:
        sites = np.asarray(sites, dtype=np.int64).reshape(-1, self.dim)
        return np.array([self.value(s) for s in sites])

    def with_strength(self, M: float) -> "AmplitudeField":
        """Coupled field: same uniforms, rescaled bound."""
        return AmplitudeField(self.seed, M, self.law, self.b, self.dim)


@dataclass(frozen=True)
class InteractionPotential:
    kind: str = "step"
    c: float = 4.0
    r0: float = 1.0

    def __post_init__(self):
        if self.kind not in ("step", "tent"):
            raise DisorderError(f"unknown interaction kind {self.kind!r}")
        if self.c < 0 or self.r0 < 0:
            raise DisorderError("interaction strength and range must be non-negative")
        if self.kind == "tent" and self.r0 == 0:
            raise DisorderError("tent interaction needs a positive range r0")

    def __call__(self, x1, x2) -> np.ndarray:
        # points along the last axis: (d,) for one pair, (k, d) for k pairs
        diff = np.abs(np.atleast_1d(np.asarray(x1, dtype=float))
                      - np.atleast_1d(np.asarray(x2, dtype=float)))
        r = diff.max(axis=-1)
        if self.kind == "step":
            return self.c * (r <= self.r0 + 1e-12)
        return self.c * np.clip(1.0 - r / self.r0, 0.0, None)


def interaction_value(U: InteractionPotential, x1, x2) -> float:
    return float(U(x1, x2))


def potential_values(field: AmplitudeField, profile: BumpProfile, x) -> np.ndarray:
    """Alloy potential at an array of points of shape (k, dim) or (k,)."""
    x = np.asarray(x, dtype=float).reshape(-1, field.dim)
    R = profile.radius
    out = np.zeros(len(x))
    if len(x) == 0:
        return out
    lo = np.floor(x.min(axis=0) - R).astype(int)
    hi = np.ceil(x.max(axis=0) + R).astype(int)
    axes = [np.arange(a, b + 1) for a, b in zip(lo, hi)]
    sites = np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=1)
    amps = field.values(sites)
    keep = amps != 0
    for s, a in zip(sites[keep], amps[keep]):
        out += a * profile(x - s)
    return out


def potential_value(field: AmplitudeField, profile: BumpProfile, x) -> float:
    return float(potential_values(field, profile, np.atleast_1d(x))[0])


def two_particle_potential(field: AmplitudeField, profile: BumpProfile, x1, x2) -> float:
    return potential_value(field, profile, x1) + potential_value(field, profile, x2)


@dataclass
class CoveringReport:
    min_sum: float
    argmin: Tuple[float, ...]
    samples: int
    passed: bool


def covering_check(profile: BumpProfile, L: int, samples: int = 401, dim: int = 1,
                   tol: float = 1e-12) -> CoveringReport:
    """Minimum over a uniform sample of the cube of the bump partition sum.

    Raises :class:`CoveringViolation` when the minimum is below ``1 - tol``.
    """
    if L < 1:
        raise DisorderError("covering check needs L >= 1")
    axis = np.linspace(-L, L, samples)
    grids = np.meshgrid(*([axis] * dim), indexing="ij")
    x = np.stack([g.ravel() for g in grids], axis=1)
    total = np.zeros(len(x))
    site_axis = np.arange(-L, L + 1)
    for s in np.stack([g.ravel() for g in np.meshgrid(*([site_axis] * dim),
                                                      indexing="ij")], axis=1):
        total += profile(x - s)
    i = int(np.argmin(total))
    report = CoveringReport(float(total[i]), tuple(float(c) for c in x[i]),
                            len(x), bool(total[i] >= 1 - tol))
    if not report.passed:
        raise CoveringViolation(report.argmin, report.min_sum, report)
    return report
