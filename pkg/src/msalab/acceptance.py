"""
Acceptance criteria as runnable checks.

Each ``criterion_*`` function returns a :class:`Verdict`. Expensive shared
quantities (the energy window, the calibrated C_geom) are computed once per
:class:`Suite`.
"""

import math
import tempfile
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Callable, Dict, List, Optional

import numpy as np

from . import descent
from . import experiments as ex
from .config import RunConfig
from .disorder import AmplitudeField
from .geometry import LatticeBox, out_layer
from .hamiltonian import Disorder, assemble, closed_form_dirichlet, dense_green_block
from .msa import (OperatorFactory, gamma, min_subscale, resonance_scan, singular_scan)
from .oracles import brute_resonant, brute_singular
from .pipeline import measure_cgeom, run_msa, with_overrides
from .separable import separable_green

PASS, FAIL, INSUFFICIENT = "PASS", "FAIL", "INSUFFICIENT"

# factor applied to the median lowest eigenvalue for the decay and trend checks
EVENT_E1_FACTOR = 1.0


@dataclass
class Verdict:
    number: str
    title: str
    status: str
    detail: str = ""
    data: Dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.status != FAIL

    def line(self) -> str:
        return f"{self.status} [{self.number:>2}] {self.title}: {self.detail}"


def _rel(a, b):
    return np.abs(np.asarray(a) - np.asarray(b)) / np.maximum(np.abs(np.asarray(b)), 1e-300)


class Suite:
    def __init__(self, cfg: Optional[RunConfig] = None, out_dir=None):
        self.cfg = cfg if cfg is not None else RunConfig()
        self.out_dir = Path(out_dir) if out_dir is not None else None

    @cached_property
    def E1_events(self) -> float:
        return ex.calibrate_E1(self.cfg, factor=EVENT_E1_FACTOR)

    @cached_property
    def cgeom_one(self):
        """One-particle LGRI calibration (used by the live descent check)."""
        return measure_cgeom(self.cfg, particles=1)

    # 1 ---------------------------------------------------------------------------
    def criterion_1(self) -> Verdict:
        worst = 0.0
        for N in (3, 15, 63):
            op = assemble(LatticeBox((0,), (N - 1) // 2), Disorder.zero(1))
            w = op.spectrum(N)
            worst = max(worst, float(np.max(_rel(w, closed_form_dirichlet(N)))))
        ok = worst <= 1e-10
        return Verdict("1", "spectral oracle", PASS if ok else FAIL,
                       f"max relative error {worst:.2e} (tol 1e-10)", {"error": worst})

    # 2 ---------------------------------------------------------------------------
    def criterion_2(self) -> Verdict:
        worst = 0.0
        for s in range(10):
            seed = ex.derive_seed(self.cfg.run.seed, 100, s)
            dis = Disorder(AmplitudeField(seed, self.cfg.disorder.amplitude_max_M),
                           interaction=None)
            box = LatticeBox((0, 3), 4, 1, 2)
            w2 = np.linalg.eigvalsh(assemble(box, dis).dense())
            f1, f2 = (np.linalg.eigvalsh(assemble(f, dis).dense()) for f in box.factors())
            mink = np.sort((f1[:, None] + f2[None, :]).ravel())
            worst = max(worst, float(np.max(np.abs(w2 - mink))))
        ok = worst <= 1e-8
        return Verdict("2", "tensor-sum oracle", PASS if ok else FAIL,
                       f"max deviation {worst:.2e} (tol 1e-8)", {"error": worst})

    # 3 ---------------------------------------------------------------------------
    def criterion_3(self) -> Verdict:
        worst, tail_viol, n = 0.0, 0, 0
        for s in range(25):
            seed = ex.derive_seed(self.cfg.run.seed, 101, s)
            rng = np.random.default_rng(seed)
            dis = Disorder(AmplitudeField(seed, self.cfg.disorder.amplitude_max_M),
                           interaction=None)
            box = LatticeBox((0, 7), 4, 1, 2)
            op = assemble(box, dis)
            o1, o2 = (assemble(f, dis) for f in box.factors())
            lam = op.full_eigh[0]
            energies = (lam[0] - 0.5, 0.5 * (lam[3] + lam[4]), lam[0] + rng.uniform(0.1, 1.0))
            ol = out_layer(box)
            for E in energies:
                x = box.center
                y = tuple(int(c) for c in ol[rng.integers(len(ol))])
                ref = dense_green_block(op, E, x, y)
                full = separable_green(o1, o2, E, x, y)
                worst = max(worst, abs(full.value - ref) / ref)
                cut = separable_green(o1, o2, E, x, y, m_star=float(rng.uniform(0.5, 3.0)))
                tail_viol += abs(cut.value - ref) > cut.tail * (1 + 1e-9) + 1e-14
                n += 1
        ok = worst <= 1e-8 and tail_viol == 0
        return Verdict("3", "separable expansion", PASS if ok else FAIL,
                       f"max relative error {worst:.2e} (tol 1e-8); "
                       f"{tail_viol}/{n} truncations outside the certified tail",
                       {"error": worst, "tail_violations": tail_viol})

    # 4 ---------------------------------------------------------------------------
    def criterion_4(self) -> Verdict:
        parts, data, ok = [], {}, True
        for P in (1, 2):
            C, cal, hold, viol = (self.cgeom_one if P == 1
                                  else measure_cgeom(self.cfg, particles=2))
            ok &= viol == 0
            data[P] = {"C_geom": C, "violations": viol}
            parts.append(f"n={P}: C_geom={C:.4g}, {viol}/{len(hold)} hold-out violations")
        return Verdict("4", "LGRI hold-out", PASS if ok else FAIL, "; ".join(parts), data)

    # 5 ---------------------------------------------------------------------------
    def criterion_5a(self) -> Verdict:
        rng = np.random.default_rng(ex.derive_seed(self.cfg.run.seed, 102))
        viol, worst = 0, math.inf
        for _ in range(100):
            D = int(rng.integers(1, 3))
            ell = int(rng.integers(2, 5))
            n = int(rng.integers(1, 4))
            L = int(rng.integers(3 * ell + 1, (10 if D == 2 else 20) * ell))
            L = min(L, 30) if D == 2 else L
            q = float(rng.uniform(0.05, 0.95))
            big = LatticeBox((0,) * D, L, D)
            S = descent.random_cluster_set(big, ell, n, rng)
            f = descent.synthetic_subharmonic(L, D, ell, q, rng, S, A=2.0 * n)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)
                bound = descent.radial_descent_bound(q, L, S.W, ell, f.max(),
                                                     max(1, len(S.cover)))
            centre = f[(L,) * D]
            viol += centre > bound * (1 + 1e-12)
            if centre > 0:
                worst = min(worst, bound / centre)
        ok = viol == 0
        return Verdict("5a", "radial descent (synthetic)", PASS if ok else FAIL,
                       f"{viol}/100 bound violations; min bound/value {worst:.3g}",
                       {"violations": viol})

    def criterion_5b(self, seeds: int = 50) -> Verdict:
        C = self.cgeom_one[0]
        m, n = self.cfg.msa.mass_m0, self.cfg.msa.budget_n
        counts = {"checked": 0, "resonant": 0, "budget": 0}
        viol = 0
        for i in range(seeds):
            o = ex.radial_descent_live(self.cfg, i, L=60, ell=8, m=m, n=n, C_geom=C)
            counts[o.status] += 1
            viol += o.violated
        ok = viol == 0 and counts["checked"] > 0
        return Verdict("5b", "radial descent (live)", PASS if ok else FAIL,
                       f"{viol} violations over {counts['checked']} checked boxes "
                       f"({counts['resonant']} resonant, {counts['budget']} over budget)",
                       dict(counts, violations=viol))

    # 6 ---------------------------------------------------------------------------
    def criterion_6(self, seeds: int = 50) -> Verdict:
        agree = total = 0
        m = self.cfg.msa.mass_m0
        alpha = self.cfg.msa.alpha
        for s in range(seeds):
            seed = ex.derive_seed(self.cfg.run.seed, 103, s)
            rng = np.random.default_rng(seed)
            L = 4 + s % 6
            box = LatticeBox((0, 0), L, 1, 2)
            ops = OperatorFactory(self.cfg.disorder_for(seed), self.cfg.mesh())
            energies = np.sort(rng.uniform(0.0, 5.0, 5))
            res, _ = resonance_scan(ops, box, energies, alpha, exhaustive=True)
            sing, _ = singular_scan(ops(box), energies, m)
            for E, r, sg in zip(energies, res, sing):
                total += 2
                agree += (r == brute_resonant(ops, box, E, alpha))
                agree += (sg == brute_singular(ops(box), E, m))
        ok = agree == total
        return Verdict("6", "classification oracles", PASS if ok else FAIL,
                       f"{agree}/{total} flags agree with brute force",
                       {"agree": agree, "total": total})

    # 7 ---------------------------------------------------------------------------
    def criterion_7(self, seeds: int = 50) -> Verdict:
        E1 = self.E1_events
        totals: Dict[str, int] = {}
        bad = []
        for i in range(seeds):
            seed, counts, examples = ex.nitrons_audit(self.cfg, i, 8, self.cfg.msa.mass_m0,
                                                      self.cfg.experiment.energy_E0, E1)
            for k, v in counts.items():
                totals[k] = totals.get(k, 0) + v
            if examples:
                bad.append(seed)
                self._dump_realization(seed, examples)
        ok = not bad
        return Verdict("7", "NITRoNS audit", PASS if ok else FAIL,
                       f"{len(bad)} counterexample realizations; grid outcomes {totals}",
                       {"counts": totals, "counterexample_seeds": bad})

    def _dump_realization(self, seed, examples):
        if self.out_dir is None:
            return
        box = examples[0].box
        op = assemble(box, self.cfg.disorder_for(seed), self.cfg.mesh())
        op.dump_coordinate(self.out_dir / f"nitrons_counterexample_{seed}.mtx")

    # 8 ---------------------------------------------------------------------------
    def criterion_8(self) -> Verdict:
        E1 = self.E1_events
        cfg = with_overrides(self.cfg, decay={"L": 23})
        fits = ex.decay_run(cfg, E1, M=10.0)
        loc = sum(f.localized() for f in fits)
        frac = loc / len(fits) if fits else 0.0
        control = ex.decay_run(with_overrides(cfg, decay={"seeds": 1}), E1, M=0.0)
        ctrl_r2 = [f.r2 for f in control if f.status == "ok"]
        ctrl_ok = bool(ctrl_r2) and max(ctrl_r2) < 0.9
        ok = frac >= 0.8 and ctrl_ok
        return Verdict("8", "eigenfunction decay", PASS if ok else FAIL,
                       f"{loc}/{len(fits)} localized ({frac:.1%}, need 80%); "
                       f"control max R^2 {max(ctrl_r2, default=math.nan):.3f} (need < 0.9)",
                       {"localized": loc, "total": len(fits), "control_r2": ctrl_r2})

    # 9 ---------------------------------------------------------------------------
    def criterion_9(self, trials: Optional[int] = None) -> Verdict:
        trials = self.cfg.experiment.trials if trials is None else trials
        cfg = with_overrides(self.cfg, schedule={"k_max": 1})
        state = ex.make_state(cfg, self.E1_events)
        parts, status, data = [], PASS, {}
        for cat in ("I", "II"):
            p = [ex.mc_pair_estimate(cat, k, trials, state, cfg.run.workers) for k in (0, 1)]
            c0, c1 = p[0].tally.S, p[1].tally.S
            data[cat] = (c0, c1, trials)
            if c0 == 0 and c1 == 0:
                # no event at either scale: the trend is below resolution
                status = FAIL if status == FAIL else INSUFFICIENT
            elif not c1 < c0:
                status = FAIL
            parts.append(f"{cat}: {c0}/{trials} at L={state.schedule.L(0)} vs "
                         f"{c1}/{trials} at L={state.schedule.L(1)}")
        return Verdict("9", "P(S) trend", status, "; ".join(parts), data)

    # 10 --------------------------------------------------------------------------
    def criterion_10(self) -> Verdict:
        cfg = with_overrides(
            self.cfg,
            schedule={"L0": 4, "k_max": 1},
            experiment={"trials": 8, "grid_points": 21},
            lgri={"samples": 5, "outer_L": 8, "inner_L": 3},
        )
        names = ("results.csv", "trials.csv", "lgri_ratios.csv")
        with tempfile.TemporaryDirectory() as tmp:
            blobs = []
            for tag, workers in (("a", 1), ("b", 1), ("c", 4)):
                out = Path(tmp) / tag
                run_msa(with_overrides(cfg, run={"workers": workers}), out)
                blobs.append([(out / n).read_bytes() for n in names])
        same = blobs[0] == blobs[1] == blobs[2]
        return Verdict("10", "determinism", PASS if same else FAIL,
                       "byte-identical CSVs across two runs and workers {1, 4}"
                       if same else "CSV outputs differ")

    # 11 --------------------------------------------------------------------------
    def criterion_11(self) -> Verdict:
        checks = {
            "gamma(1,16)=24": gamma(1, 16) == 24,
            "gamma(2,81)=216": gamma(2, 81) == 216,
            "schedule (8,23,111)": ex.scale_schedule(8, 1.5, 2).scales == (8, 23, 111),
            "m1=0.75": ex.scale_schedule(16, 1.5, 1, m0=1.0).masses[1] == 0.75,
            "min sub-scale of 27 is 9": min_subscale(27) == 9,
        }
        bad = [k for k, v in checks.items() if not v]
        return Verdict("11", "formula micro-checks", FAIL if bad else PASS,
                       "all exact" if not bad else "failed: " + ", ".join(bad))

    # -------------------------------------------------------------------------------
    def checks(self) -> Dict[str, Callable[[], Verdict]]:
        return {
            "1": self.criterion_1, "2": self.criterion_2, "3": self.criterion_3,
            "4": self.criterion_4, "5a": self.criterion_5a, "5b": self.criterion_5b,
            "6": self.criterion_6, "7": self.criterion_7, "8": self.criterion_8,
            "9": self.criterion_9, "10": self.criterion_10, "11": self.criterion_11,
        }

    def run(self, only=None, echo: Optional[Callable[[str], None]] = None) -> List[Verdict]:
        out = []
        for key, fn in self.checks().items():
            if only and key not in only and key.rstrip("ab") not in only:
                continue
            v = fn()
            v.number = key
            if echo:
                echo(v.line())
            out.append(v)
        return out
