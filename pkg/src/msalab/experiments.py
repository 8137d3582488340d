"""
Monte Carlo estimation of the pair events S, T and R across scales, plus
the calibration runs and the eigenfunction-decay experiment.

Every trial derives its own disorder seed from ``(root seed, tag, ...)``
so results do not depend on the order or the number of worker processes
that evaluate the trials.
"""

import math
import statistics
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from . import descent
from .config import RunConfig
from .geometry import LatticeBox, boundaries, is_interactive, out_layer
from .hamiltonian import assemble, cell_norm_profile, grid_function
from .msa import (OperatorFactory, is_tunneling, lgri_residual, min_subscale, nitrons_check,
                  out_layer_size, q_coefficient, resonance_scan, singular_scan)

CATEGORIES = ("I", "II", "III")
_Z95 = statistics.NormalDist().inv_cdf(0.975)

# seed-derivation tags keep unrelated experiments on disjoint streams
TAG_PAIRS, TAG_E1, TAG_LGRI, TAG_DECAY, TAG_INITIAL, TAG_DESCENT, TAG_NITRONS = range(7)


def derive_seed(root: int, *path: int) -> int:
    """64-bit seed determined by the root seed and an integer path."""
    ss = np.random.SeedSequence([int(root) % (1 << 64)] + [int(p) for p in path])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


# -- schedules ---------------------------------------------------------------

@dataclass(frozen=True)
class ScaleSchedule:
    L0: int
    alpha: float
    scales: Tuple[int, ...]
    masses: Tuple[float, ...]

    def L(self, k: int) -> int:
        return self.scales[k]

    def m(self, k: int) -> float:
        return self.masses[k]

    def sub_scale(self, k: int) -> int:
        """Scale of the sub-boxes used by the tunneling test at scale k."""
        return self.scales[k - 1] if k > 0 else min_subscale(self.L0, self.alpha)


def scale_schedule(L0: int, alpha: float = 1.5, k_max: int = 2, m0: float = 1.0,
                   cap: Optional[int] = None) -> ScaleSchedule:
    """``L_{k+1} = ceil(L_k^alpha)`` and ``m_{k+1} = m_k (1 - L_k^{-1/2})``."""
    if L0 < 2:
        raise ValueError("L0 must be >= 2")
    if not (1 < alpha < 2):
        raise ValueError("alpha must lie in (1, 2)")
    scales, masses = [int(L0)], [float(m0)]
    for _ in range(k_max):
        nxt = math.ceil(scales[-1] ** alpha - 1e-9)
        if cap is not None and nxt > cap:
            warnings.warn(f"schedule truncated: L={nxt} exceeds the cap {cap}",
                          RuntimeWarning, stacklevel=2)
            break
        masses.append(masses[-1] * (1.0 - scales[-1] ** -0.5))
        scales.append(nxt)
    return ScaleSchedule(int(L0), alpha, tuple(scales), tuple(masses))


# -- statistics ---------------------------------------------------------------

def wilson_interval(count: int, n: int, z: float = _Z95) -> Tuple[float, float]:
    if n == 0:
        return (math.nan, math.nan)
    p = count / n
    den = 1 + z * z / n
    mid = (p + z * z / (2 * n)) / den
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / den
    return (max(0.0, mid - half), min(1.0, mid + half))


@dataclass
class Tally:
    trials: int = 0
    S: int = 0
    T: int = 0
    R: int = 0
    S_notT: int = 0
    S_notT_notR: int = 0
    audit_III: int = 0        # category III trials violating the expected witness

    def add(self, other: "Tally") -> "Tally":
        for k in self.__dataclass_fields__:
            setattr(self, k, getattr(self, k) + getattr(other, k))
        return self


@dataclass
class TrialResult:
    trial: int
    seed: int
    S: bool
    T: bool
    R: bool
    audit_ok: bool = True
    E_S: Optional[float] = None       # first grid energy where both boxes are singular

    def tally(self) -> Tally:
        return Tally(1, int(self.S), int(self.T), int(self.R), int(self.S and not self.T),
                     int(self.S and not self.T and not self.R), int(not self.audit_ok))


@dataclass
class MsaRunState:
    """Parameters, energy grids and integer tallies of one run."""

    config: RunConfig
    schedule: ScaleSchedule
    E0: float
    E1: float
    tallies: Dict[Tuple[str, int], Tally] = field(default_factory=dict)
    trials: Dict[Tuple[str, int], List[TrialResult]] = field(default_factory=dict)

    @property
    def root_seed(self) -> int:
        return self.config.run.seed

    def energy_grid(self) -> np.ndarray:
        return np.linspace(self.E0, self.E1, self.config.experiment.grid_points)

    def tunnel_grid(self) -> np.ndarray:
        lo = self.E0 - self.config.experiment.tunnel_margin
        return np.linspace(lo, self.E1, self.config.experiment.grid_points)

    @property
    def grid_spacing(self) -> float:
        n = self.config.experiment.grid_points
        return (self.E1 - self.E0) / (n - 1) if n > 1 else 0.0


def make_state(cfg: RunConfig, E1: Optional[float] = None) -> MsaRunState:
    sched = scale_schedule(cfg.schedule.L0, cfg.msa.alpha, cfg.schedule.k_max,
                           cfg.msa.mass_m0, cfg.schedule.max_scale)
    E0 = cfg.experiment.energy_E0
    if E1 is None:
        E1 = cfg.experiment.energy_E1
    if E1 is None:
        E1 = calibrate_E1(cfg)
    return MsaRunState(cfg, sched, E0, float(E1))


# -- pair geometry -------------------------------------------------------------

def _offset(L: int, r0: float) -> int:
    # particle separation making a box non-interactive
    return 2 * L + int(math.floor(r0)) + 1


def pair_geometry(category: str, L: int, trial: int, r0: float, dim: int = 1,
                  far: bool = False) -> Tuple[LatticeBox, LatticeBox]:
    """Deterministic round-robin pair placement.

    Pairs are separated by more than ``L`` (or ``8L`` when ``far``), cycling
    through three separations; interactive boxes sit on the diagonal and
    non-interactive ones are displaced off it.
    """
    if category not in CATEGORIES:
        raise ValueError(f"unknown category {category!r}")
    gaps = (8 * L + 1, 9 * L, 10 * L) if far else (L + 1, 2 * L, 3 * L)
    gap = gaps[trial % len(gaps)]
    shift = 2 * L + gap + _offset(L, r0)
    a = _offset(L, r0)
    inter = lambda t: (t,) * dim + (t,) * dim
    nonint = lambda t: (t,) * dim + (t + a,) * dim
    if category == "I":
        b1, b2 = nonint(0), nonint(shift)
    elif category == "II":
        b1, b2 = inter(0), inter(shift)
    else:
        b1, b2 = inter(0), nonint(shift)
    B1, B2 = LatticeBox(b1, L, dim, 2), LatticeBox(b2, L, dim, 2)
    expected = {"I": (False, False), "II": (True, True), "III": (True, False)}[category]
    if (is_interactive(B1, r0), is_interactive(B2, r0)) != expected:
        raise ValueError(f"category {category} is not realizable with r0={r0}")
    return B1, B2


# -- one trial -----------------------------------------------------------------

def evaluate_pair(cfg: RunConfig, state_params: dict, category: str, k: int,
                  trial: int) -> TrialResult:
    """Sample one disorder realisation and evaluate S, T and R for one pair."""
    seed = derive_seed(cfg.run.seed, TAG_PAIRS, CATEGORIES.index(category), k, trial)
    L, m, L_prev = state_params["L"], state_params["m"], state_params["L_prev"]
    grid, tgrid = state_params["grid"], state_params["tgrid"]
    r0 = cfg.interaction.range_r0
    exhaustive = cfg.experiment.exhaustive_subcubes
    B1, B2 = pair_geometry(category, L, trial, r0, cfg.model.dim, cfg.experiment.far_pairs)
    ops = OperatorFactory(cfg.disorder_for(seed), cfg.mesh())
    alpha = cfg.msa.alpha

    # S: both boxes singular at a common grid energy
    s1, _ = singular_scan(ops(B1), grid, m)
    both_S = np.zeros(len(grid), dtype=bool)
    if s1.any():
        idx = np.flatnonzero(s1)
        s2, _ = singular_scan(ops(B2), grid[idx], m)
        both_S[idx[s2]] = True

    # R: both boxes resonant at a common grid energy
    r1, _ = resonance_scan(ops, B1, grid, alpha, exhaustive)
    r2 = np.zeros(len(grid), dtype=bool)
    need = r1 | both_S
    if need.any():
        idx = np.flatnonzero(need)
        r2[idx], _ = resonance_scan(ops, B2, grid[idx], alpha, exhaustive)
    both_R = r1 & r2

    # T: tunneling of the relevant boxes
    if category == "III":
        t_boxes = [B for B in (B1, B2) if not is_interactive(B, r0)]
    else:
        t_boxes = [B1, B2]
    T = any(is_tunneling(ops, B, m, tgrid, L_prev).tunneling for B in t_boxes)

    S, R = bool(both_S.any()), bool(both_R.any())
    audit_ok = True
    if category == "III" and S and not T and not R:
        # without tunneling the non-interactive box must be the resonant one
        ni_res = r1 if not is_interactive(B1, r0) else r2
        audit_ok = bool(np.all(ni_res[both_S]))
    E_S = float(grid[np.argmax(both_S)]) if S else None
    return TrialResult(trial, seed, S, T, R, audit_ok, E_S)


def _run_chunk(args):
    cfg, params, category, k, trials = args
    return [evaluate_pair(cfg, params, category, k, t) for t in trials]


def _map_trials(cfg, params, category, k, trials: int, workers: int) -> List[TrialResult]:
    idx = list(range(trials))
    if workers <= 1 or trials <= 1:
        return _run_chunk((cfg, params, category, k, idx))
    chunks = [idx[i::workers] for i in range(workers)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(_run_chunk, [(cfg, params, category, k, c) for c in chunks]))
    out = [r for p in parts for r in p]
    out.sort(key=lambda r: r.trial)
    return out


def scale_params(state: MsaRunState, k: int) -> dict:
    return {"L": state.schedule.L(k), "m": state.schedule.m(k),
            "L_prev": state.schedule.sub_scale(k),
            "grid": state.energy_grid(), "tgrid": state.tunnel_grid()}


@dataclass
class PairEstimate:
    category: str
    k: int
    tally: Tally

    def p_hat(self, event: str = "S") -> float:
        n = self.tally.trials
        return getattr(self.tally, event) / n if n else math.nan

    def ci(self, event: str = "S") -> Tuple[float, float]:
        return wilson_interval(getattr(self.tally, event), self.tally.trials)

    @property
    def defined(self) -> bool:
        return self.tally.trials > 0


def mc_pair_estimate(category: str, k: int, trials: int, state: MsaRunState,
                     workers: int = 1) -> PairEstimate:
    """Run ``trials`` pair samples and merge their tallies into ``state``."""
    if category not in CATEGORIES:
        raise ValueError(f"unknown category {category!r}")
    if k >= len(state.schedule.scales):
        raise ValueError(f"scale index {k} beyond the schedule")
    results = _map_trials(state.config, scale_params(state, k), category, k, trials, workers)
    tally = Tally()
    for r in results:
        tally.add(r.tally())
    state.tallies[(category, k)] = tally
    state.trials[(category, k)] = results
    return PairEstimate(category, k, tally)


def bound_check(state: MsaRunState, k: int, p: Optional[int] = None) -> List[dict]:
    """Compare the upper Wilson bound of P(S) with ``L_k^(-2p)`` per category.

    Verdicts: ``pass``/``fail`` when the interval resolves the target,
    ``insufficient trials`` when the target lies below what zero events
    at this trial count can certify, ``undefined`` without trials.
    """
    p = state.config.msa.p if p is None else p
    L = state.schedule.L(k)
    target = float(L) ** (-2 * p)
    rows = []
    for (cat, kk), t in sorted(state.tallies.items()):
        if kk != k:
            continue
        lo, hi = wilson_interval(t.S, t.trials)
        if t.trials == 0:
            verdict = "undefined"
        elif target < wilson_interval(0, t.trials)[1]:
            verdict = "fail" if lo > target else "insufficient trials"
        else:
            verdict = "pass" if hi <= target else ("fail" if lo > target else "inconclusive")
        rows.append({
            "category": cat, "k": k, "L_k": L, "m_k": state.schedule.m(k),
            "trials": t.trials, "count_S": t.S, "count_T": t.T, "count_R": t.R,
            "p_hat_S": t.S / t.trials if t.trials else math.nan,
            "ci_lo": lo, "ci_hi": hi, "target_Lk_pow": target, "verdict": verdict,
            "decomposition_ok": t.S <= t.T + t.S_notT,
        })
    return rows


RESULT_COLUMNS = ("category", "k", "L_k", "m_k", "trials", "count_S", "count_T", "count_R",
                  "p_hat_S", "ci_lo", "ci_hi", "target_Lk_pow", "verdict")


# -- calibration runs ------------------------------------------------------------

def calibrate_E1(cfg: RunConfig, samples: Optional[int] = None,
                 factor: Optional[float] = None) -> float:
    """``factor`` times the median lowest eigenvalue of ``L0`` boxes at the origin."""
    samples = cfg.experiment.E1_samples if samples is None else samples
    factor = cfg.experiment.E1_factor if factor is None else factor
    D = cfg.model.dim * cfg.model.particles
    box = LatticeBox((0,) * D, cfg.schedule.L0, cfg.model.dim, cfg.model.particles)
    lows = []
    for i in range(samples):
        op = assemble(box, cfg.disorder_for(derive_seed(cfg.run.seed, TAG_E1, i)), cfg.mesh())
        lows.append(float(op.spectrum(1)[0]))
    return factor * float(np.median(lows))


def initial_scale_estimate(cfg: RunConfig, trials: int, E0: float, E1: float,
                           m0: Optional[float] = None) -> Tuple[int, int]:
    """Count of ``L0`` boxes at the origin that are singular somewhere on the grid.

    Returns ``(count, trials)``.
    """
    m0 = cfg.msa.mass_m0 if m0 is None else m0
    D = cfg.model.dim * cfg.model.particles
    box = LatticeBox((0,) * D, cfg.schedule.L0, cfg.model.dim, cfg.model.particles)
    grid = np.linspace(E0, E1, cfg.experiment.grid_points)
    count = 0
    for i in range(trials):
        op = assemble(box, cfg.disorder_for(derive_seed(cfg.run.seed, TAG_INITIAL, i)),
                      cfg.mesh())
        flags, _ = singular_scan(op, grid, m0)
        count += bool(flags.any())
    return count, trials


def lgri_sample(cfg: RunConfig, index: int, particles: int):
    """One random LGRI instance: returns the :class:`LgriResult`."""
    seed = derive_seed(cfg.run.seed, TAG_LGRI, particles, index)
    rng = np.random.default_rng(seed)
    d = cfg.model.dim
    D = d * particles
    Lt, L = cfg.lgri.outer_L, cfg.lgri.inner_L
    Bt = LatticeBox((0,) * D, Lt, d, particles)
    outer = assemble(Bt, cfg.disorder_for(seed), cfg.mesh())
    r = Lt - 3 - L
    c = rng.integers(-r, r + 1, D)
    inner = outer.restrict(Bt.sub(tuple(int(x) for x in c), L))
    u = tuple(int(x) for x in c + rng.integers(-(L - 2), L - 1, D))
    ol = out_layer(Bt)
    w = tuple(int(x) for x in ol[rng.integers(len(ol))])
    while True:
        E = float(rng.uniform(0.0, cfg.lgri.energy_max))
        if outer.distance_to_spectrum(E) > 1e-6 and inner.distance_to_spectrum(E) > 1e-6:
            break
    return lgri_residual(outer, inner, E, u, w)


def lgri_ratios(cfg: RunConfig, particles: int, start: int, count: int) -> np.ndarray:
    return np.array([lgri_sample(cfg, i, particles).ratio for i in range(start, start + count)])


def calibrate_cgeom(ratios: Sequence[float], D: int, margin: float = 2.0) -> float:
    """Calibrated constant: ``margin`` times the sample maximum, capped at ``D/2``.

    ``D/2`` bounds every ratio in tight-binding mode (each inner-boundary
    site has at most D outside neighbours, each hop carrying weight 1/2),
    so the cap never excludes an admissible value.
    """
    return float(min(margin * float(np.max(ratios)), D / 2.0))


# -- radial descent and NITRoNS audits -----------------------------------------------

@dataclass
class DescentOutcome:
    seed: int
    E: float
    status: str                 # "checked", "resonant", "budget"
    value: float = math.nan
    bound: float = math.nan
    exponent: float = math.nan
    W: int = 0
    subharmonic: Optional[bool] = None

    @property
    def violated(self) -> bool:
        return self.status == "checked" and self.value > self.bound


def radial_descent_live(cfg: RunConfig, index: int, L: int, ell: int, m: float, n: int,
                        C_geom: float, E_range=(0.0, 2.0), A: Optional[float] = None
                        ) -> DescentOutcome:
    """Center value of ``f(x) = max_y R(x, y; E)`` (y on the inner boundary) vs the bound.

    Runs on a one-particle box; ``q`` takes ``C' = C_geom |out-layer|``
    so that off the singular set ``f(x) <= q max f`` over the out-layer
    of ``B_ell(x)``.
    """
    seed = derive_seed(cfg.run.seed, TAG_DESCENT, index)
    rng = np.random.default_rng(seed)
    d = cfg.model.dim
    A = 2.0 * n if A is None else A
    E = float(rng.uniform(*E_range))
    ops = OperatorFactory(cfg.disorder_for(seed), cfg.mesh())
    B = LatticeBox((0,) * d, L, d, 1)
    flags, _ = resonance_scan(ops, B, [E], cfg.msa.alpha)
    if flags[0]:
        return DescentOutcome(seed, E, "resonant")
    try:
        S = descent.singular_cluster_set(ops, B, ell, E, m, n, cfg.msa.cluster_spacing_b)
    except descent.BudgetExceeded:
        return DescentOutcome(seed, E, "budget")
    g = ops(B).green(E)
    inner = boundaries(B)[0]
    pts = B.points()
    f = np.array([g.norms_from(tuple(x), inner).max() for x in pts])
    f = f.reshape((2 * L + 1,) * d)
    C_prime = C_geom * out_layer_size(d, ell) / (n * ell) ** (d - 1)
    q = q_coefficient(m, ell, n, d, C_prime)
    j = max(1, len(S.cover))
    e = descent.radial_descent_exponent(L, S.W, ell, j)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        bound = descent.radial_descent_bound(min(q, 1 - 1e-15), L, S.W, ell, f.max(), j)
    sub = descent.subharmonic_check(f, q, ell, S, A).ok
    return DescentOutcome(seed, E, "checked", float(f[(L,) * d]), bound, e, S.W, sub)


def nitrons_audit(cfg: RunConfig, index: int, L: int, m: float, E0: float, E1: float):
    """NITRoNS outcomes on the energy grid for one non-interactive box.

    Returns ``(seed, counts, examples)``: counts per status over grid
    energies and the classifications of any counterexamples.
    """
    seed = derive_seed(cfg.run.seed, TAG_NITRONS, index)
    ops = OperatorFactory(cfg.disorder_for(seed), cfg.mesh())
    d = cfg.model.dim
    a = _offset(L, cfg.interaction.range_r0)
    box = LatticeBox((0,) * d + (a,) * d, L, d, 2)
    grid = np.linspace(E0, E1, cfg.experiment.grid_points)
    tgrid = np.linspace(E0 - cfg.experiment.tunnel_margin, E1, cfg.experiment.grid_points)
    L_prev = min_subscale(L, cfg.msa.alpha)
    counts = {"holds": 0, "counterexample": 0, "skipped-resonant": 0,
              "skipped-tunneling": 0, "skipped-interactive": 0}
    examples = []
    if is_interactive(box, cfg.interaction.range_r0):
        counts["skipped-interactive"] = len(grid)
        return seed, counts, examples
    if is_tunneling(ops, box, m, tgrid, L_prev).tunneling:
        counts["skipped-tunneling"] = len(grid)
        return seed, counts, examples
    res, _ = resonance_scan(ops, box, grid, cfg.msa.alpha)
    sing, wit = singular_scan(ops(box), grid, m)
    for i, E in enumerate(grid):
        if res[i]:
            counts["skipped-resonant"] += 1
        elif sing[i]:
            # confirm with the pointwise classifier before recording
            out = nitrons_check(ops, box, float(E), m, L_prev, tgrid,
                                cfg.interaction.range_r0, cfg.msa.alpha)
            counts[out.status] += 1
            if out.counterexample:
                examples.append(out.classification)
        else:
            counts["holds"] += 1
    return seed, counts, examples


# -- eigenfunction decay ----------------------------------------------------------

@dataclass
class DecayFit:
    seed: int
    E: float
    m_hat: float
    r2: float
    peak: Tuple[int, ...]
    n_cells: int
    status: str = "ok"          # or "insufficient support"
    intercept: float = math.nan
    profile: Optional[Dict[tuple, float]] = field(default=None, repr=False)

    def localized(self, m_min: float = 0.1, r2_min: float = 0.9) -> bool:
        return self.status == "ok" and self.m_hat > m_min and self.r2 >= r2_min


class ProfileFit(NamedTuple):
    m_hat: float
    r2: float
    peak: Tuple[int, ...]
    n_cells: int
    status: str
    intercept: float


def profile_radii(keys: np.ndarray, peak, particles: int = 1, dim: int = 1) -> np.ndarray:
    """Max-norm distance of each cell to the peak (or its exchanged copy)."""
    peak = np.asarray(peak)
    r = np.max(np.abs(keys - peak), axis=1)
    if particles == 2:
        swapped = np.concatenate([peak[dim:], peak[:dim]])
        r = np.minimum(r, np.max(np.abs(keys - swapped), axis=1))
    return r


def fit_profile(profile: Dict[tuple, float], particles: int = 1, dim: int = 1,
                noise_floor: float = 1e-12) -> ProfileFit:
    """Exponential fit of the cell-norm envelope.

    For each max-norm distance r from the peak cell the largest cell norm
    at that distance is kept, and ``log`` of it is fitted linearly in r.
    For two particles the distance is to the nearer of the peak and its
    exchanged copy.
    """
    keys = np.array(list(profile.keys()), dtype=np.int64)
    vals = np.array(list(profile.values()), dtype=float)
    peak = keys[int(np.argmax(vals))]
    r = profile_radii(keys, peak, particles, dim)
    keep = vals > noise_floor
    r, y = r[keep], np.log(vals[keep])
    radii = np.unique(r)
    peak_t = tuple(int(c) for c in peak)
    if len(radii) < 3:
        return ProfileFit(math.nan, math.nan, peak_t, int(keep.sum()),
                          "insufficient support", math.nan)
    env = np.array([y[r == k].max() for k in radii])
    A = np.vstack([radii, np.ones_like(radii)]).T.astype(float)
    coef, *_ = np.linalg.lstsq(A, env, rcond=None)
    resid = env - A @ coef
    ss = np.sum((env - env.mean()) ** 2)
    r2 = 1.0 - np.sum(resid ** 2) / ss if ss > 0 else 0.0
    return ProfileFit(float(-coef[0]), float(r2), peak_t, int(keep.sum()), "ok",
                      float(coef[1]))


def eigen_decay_experiment(cfg: RunConfig, box: LatticeBox, seed: int, E_lo: float,
                           E_hi: float, count: int, M: Optional[float] = None,
                           keep_profiles: bool = False) -> List[DecayFit]:
    """Fit every eigenfunction with eigenvalue in ``[E_lo, E_hi]`` (at most ``count``)."""
    op = assemble(box, cfg.disorder_for(seed, M), cfg.mesh())
    w, V = op.eigenpairs_in(E_lo, E_hi)
    out = []
    for j in range(min(len(w), count)):
        prof = cell_norm_profile(grid_function(V[:, j], op), op)
        fit = fit_profile(prof, box.particles, box.dim, cfg.decay.noise_floor)
        out.append(DecayFit(seed, float(w[j]), fit.m_hat, fit.r2, fit.peak, fit.n_cells,
                            fit.status, fit.intercept, prof if keep_profiles else None))
    return out


def decay_run(cfg: RunConfig, E_hi: float, M: Optional[float] = None,
              E_lo: float = 0.0, keep_profiles: bool = False) -> List[DecayFit]:
    d, P = cfg.model.dim, cfg.model.particles
    box = LatticeBox((0,) * (d * P), cfg.decay.L, d, P)
    fits = []
    for i in range(cfg.decay.seeds):
        seed = derive_seed(cfg.run.seed, TAG_DECAY, i)
        fits += eigen_decay_experiment(cfg, box, seed, E_lo, E_hi, cfg.decay.count, M,
                                       keep_profiles)
    return fits


DECAY_COLUMNS = ("seed", "E_j", "m_hat", "r2", "peak_cell", "n_cells_fit")


def decay_rows(fits: Sequence[DecayFit]):
    return [(f.seed, f.E, f.m_hat, f.r2, " ".join(map(str, f.peak)), f.n_cells)
            for f in fits]
