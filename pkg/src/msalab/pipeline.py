"""
Artifact-producing runs behind the command-line subcommands.

Each function takes a validated :class:`RunConfig` and an output directory
and writes its files atomically. CSV and table outputs depend only on the
configuration; wall-times go to the JSON summaries alone.
"""

import copy
import json
import math
import time
from pathlib import Path
from typing import Optional

import numpy as np

from . import experiments as ex
from .config import RunConfig
from .io import atomic_write_text, read_csv, table_text, write_csv, write_json

TRIAL_COLUMNS = ("category", "k", "trial", "seed", "S", "T", "R", "audit_ok", "E_S")
LGRI_COLUMNS = ("index", "role", "ratio")
PROFILE_COLUMNS = ("cell", "r", "norm")


class MissingArtifact(FileNotFoundError):
    pass


def energy_interval(cfg: RunConfig):
    """``(E0, E1)`` with E1 calibrated when the config leaves it open."""
    E1 = cfg.experiment.energy_E1
    if E1 is None:
        E1 = ex.calibrate_E1(cfg)
    return cfg.experiment.energy_E0, float(E1)


def measure_cgeom(cfg: RunConfig, particles: Optional[int] = None):
    """Calibrate C_geom on one sample and count violations on a disjoint hold-out.

    Returns ``(C_geom, calibration ratios, hold-out ratios, violations)``.
    """
    P = cfg.model.particles if particles is None else particles
    n = cfg.lgri.samples
    cal = ex.lgri_ratios(cfg, P, 0, n)
    hold = ex.lgri_ratios(cfg, P, n, n)
    C = ex.calibrate_cgeom(cal, cfg.model.dim * P, cfg.lgri.margin)
    return C, cal, hold, int(np.sum(hold > C * (1 + 1e-10)))


def _lgri_rows(cal, hold):
    return ([(i, "calibration", float(r)) for i, r in enumerate(cal)]
            + [(len(cal) + i, "holdout", float(r)) for i, r in enumerate(hold)])


def run_calibrate_cgeom(cfg: RunConfig, out, particles: Optional[int] = None) -> dict:
    t0 = time.perf_counter()
    out = Path(out)
    C, cal, hold, viol = measure_cgeom(cfg, particles)
    write_csv(out / "lgri_ratios.csv", LGRI_COLUMNS, _lgri_rows(cal, hold))
    P = cfg.model.particles if particles is None else particles
    report = {
        "C_geom": C, "particles": P, "margin": cfg.lgri.margin,
        "cap": cfg.model.dim * P / 2.0, "samples": len(cal),
        "max_ratio": float(np.max(cal)), "holdout_violations": viol,
        "wall_time_s": time.perf_counter() - t0,
    }
    write_json(out / "cgeom.json", report)
    return report


def run_msa(cfg: RunConfig, out) -> dict:
    """Full pair sweep: every category at every scale of the schedule."""
    out = Path(out)
    walls = {}
    t = time.perf_counter()
    E0, E1 = energy_interval(cfg)
    state = ex.make_state(cfg, E1)
    walls["calibrate_E1"] = time.perf_counter() - t

    t = time.perf_counter()
    if cfg.msa.C_geom is not None:
        C, source = cfg.msa.C_geom, "config"
    else:
        C, cal, hold, _ = measure_cgeom(cfg)
        source = "measured"
        write_csv(out / "lgri_ratios.csv", LGRI_COLUMNS, _lgri_rows(cal, hold))
    walls["calibrate_cgeom"] = time.perf_counter() - t

    t = time.perf_counter()
    init_count, init_trials = ex.initial_scale_estimate(cfg, cfg.experiment.trials, E0, E1)
    walls["initial_scale"] = time.perf_counter() - t

    rows, trials = [], []
    for k in range(len(state.schedule.scales)):
        t = time.perf_counter()
        for cat in cfg.category_list:
            ex.mc_pair_estimate(cat, k, cfg.experiment.trials, state, cfg.run.workers)
            for r in state.trials[(cat, k)]:
                trials.append((cat, k, r.trial, r.seed, int(r.S), int(r.T), int(r.R),
                               int(r.audit_ok), r.E_S))
        rows += ex.bound_check(state, k)
        walls[f"scale_{k}"] = time.perf_counter() - t

    write_csv(out / "results.csv", ex.RESULT_COLUMNS,
              [[r[c] for c in ex.RESULT_COLUMNS] for r in rows])
    write_csv(out / "trials.csv", TRIAL_COLUMNS, trials)
    summary = {
        "config": cfg.to_dict(),
        "C_geom": C, "C_geom_source": source,
        "schedule": {"scales": list(state.schedule.scales),
                     "masses": list(state.schedule.masses)},
        "energy_interval": [E0, E1], "grid_spacing": state.grid_spacing,
        "initial_scale": {"count": init_count, "trials": init_trials,
                          "ci": list(ex.wilson_interval(init_count, init_trials))},
        "verdicts": [{k: r[k] for k in ("category", "k", "verdict", "decomposition_ok",
                                        "count_S", "trials")} for r in rows],
        "audit_III_discrepancies": sum(t.audit_III for t in state.tallies.values()),
        "wall_times_s": walls,
    }
    write_json(out / "summary.json", summary)
    return summary


def run_eigen_decay(cfg: RunConfig, out, M: Optional[float] = None) -> dict:
    t0 = time.perf_counter()
    out = Path(out)
    E0, E1 = energy_interval(cfg)
    fits = ex.decay_run(cfg, E1, M, E0, keep_profiles=True)
    write_csv(out / "decay.csv", ex.DECAY_COLUMNS, ex.decay_rows(fits))
    profile_rows = []
    if fits:
        f = fits[0]
        keys = np.array(list(f.profile), dtype=np.int64)
        r = ex.profile_radii(keys, f.peak, cfg.model.particles, cfg.model.dim)
        profile_rows = [(" ".join(map(str, k)), int(ri), float(v))
                        for k, ri, v in zip(f.profile, r, f.profile.values())]
    write_csv(out / "decay_profile.csv", PROFILE_COLUMNS, profile_rows)
    loc = sum(f.localized() for f in fits)
    report = {
        "energy_interval": [E0, E1], "eigenfunctions": len(fits), "localized": loc,
        "fraction_localized": loc / len(fits) if fits else math.nan,
        "profile_fit": ({"m_hat": fits[0].m_hat, "intercept": fits[0].intercept,
                         "r2": fits[0].r2, "E": fits[0].E} if fits else None),
        "noise_floor": cfg.decay.noise_floor,
        "wall_time_s": time.perf_counter() - t0,
    }
    write_json(out / "decay_summary.json", report)
    return report


def with_overrides(cfg: RunConfig, **sections) -> RunConfig:
    """Deep copy of ``cfg`` with ``section={key: value}`` overrides applied."""
    new = copy.deepcopy(cfg)
    for name, values in sections.items():
        sec = getattr(new, name)
        for k, v in values.items():
            setattr(sec, k, v)
    return new


# -- plot data ---------------------------------------------------------------------

def _need(path: Path) -> Path:
    if not path.exists():
        raise MissingArtifact(f"missing artifact: {path}")
    return path


def emit_plot_data(src, out=None, which=("trend", "profile", "lgri"), bins: int = 20):
    """Gnuplot tables from run artifacts in ``src``.

    ``trend``: P(S) estimate against L_k with the ``L_k^(-2p)`` reference;
    ``profile``: log cell norm against distance with the fitted line, one
    row per cell above the noise floor; ``lgri``: ratio histogram.
    """
    src = Path(src)
    out = src if out is None else Path(out)
    written = []
    if "trend" in which:
        rows = read_csv(_need(src / "results.csv"))
        table = [(r["category"], r["L_k"], float(r["p_hat_S"]), float(r["ci_lo"]),
                  float(r["ci_hi"]), float(r["target_Lk_pow"])) for r in rows]
        atomic_write_text(out / "trend.dat", table_text(
            ("category", "L_k", "p_hat_S", "ci_lo", "ci_hi", "reference"), table))
        written.append(out / "trend.dat")
    if "profile" in which:
        rows = read_csv(_need(src / "decay_profile.csv"))
        meta = json.loads(_need(src / "decay_summary.json").read_text())
        fit = meta.get("profile_fit") or {}
        floor = meta.get("noise_floor", 1e-12)
        m_hat, b = fit.get("m_hat", math.nan), fit.get("intercept", math.nan)
        table = []
        for r in rows:
            v = float(r["norm"])
            if v > floor:
                rr = int(r["r"])
                table.append((r["cell"].replace(" ", ","), rr, math.log(v), b - m_hat * rr))
        atomic_write_text(out / "decay_profile.dat", table_text(
            ("cell", "r", "log_norm", "fit"), table))
        written.append(out / "decay_profile.dat")
    if "lgri" in which:
        rows = read_csv(_need(src / "lgri_ratios.csv"))
        ratios = np.array([float(r["ratio"]) for r in rows])
        table = []
        if len(ratios):
            counts, edges = np.histogram(ratios, bins=bins)
            table = [(float(a), float(b), int(c)) for a, b, c in zip(edges, edges[1:], counts)]
        atomic_write_text(out / "lgri_hist.dat", table_text(("bin_lo", "bin_hi", "count"), table))
        written.append(out / "lgri_hist.dat")
    return written
