"""
Command-line entry point.

Exit status: 0 success, 1 configuration or usage error (also missing
artifacts), 2 solver failure, 3 property-suite violation.
"""

import argparse
import json
import sys
from pathlib import Path

import numpy as np
from scipy.sparse.linalg import ArpackError

from . import acceptance
from . import experiments as ex
from .config import ConfigError, RunConfig, load_config
from .geometry import LatticeBox, GeometryError
from .hamiltonian import AssemblyError, NearSingularError, SolverError, assemble
from .io import atomic_write_text, fmt, table_text
from .msa import (Classification, OperatorFactory, audit_lines, is_tunneling, min_subscale,
                  resonance_scan, singular_scan)
from .oracles import brute_resonant, brute_singular
from .pipeline import (MissingArtifact, emit_plot_data, energy_interval, run_calibrate_cgeom,
                       run_eigen_decay, run_msa, with_overrides)

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_PROPERTY = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 by default, which is reserved for solver failures
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _point(text):
    try:
        return tuple(int(c) for c in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _common(suppress: bool) -> argparse.ArgumentParser:
    # flags are accepted before and after the subcommand; the copy attached
    # to subcommands must not overwrite values given before it
    p = argparse.ArgumentParser(add_help=False,
                                argument_default=argparse.SUPPRESS if suppress else None)
    p.add_argument("--config", type=Path, help="INI configuration file")
    p.add_argument("--seed", type=int, help="root seed (overrides run.seed)")
    p.add_argument("--workers", type=int, help="worker processes (overrides run.workers)")
    p.add_argument("--out", type=Path, help="output directory (overrides run.out_dir)")
    p.add_argument("--exhaustive-oracles", action="store_true",
                   default=argparse.SUPPRESS if suppress else False,
                   help="enumerate every sub-cube and cross-check against dense brute force")
    return p


def _box_args(p: argparse.ArgumentParser):
    p.add_argument("--L", type=int, help="box radius (default: schedule.L0)")
    p.add_argument("--center", type=_point, help="comma-separated center (default: origin)")
    p.add_argument("--particles", type=int, choices=(1, 2), help="override model.particles")
    p.add_argument("--M", type=float, help="override the amplitude bound")
    p.add_argument("--realization", type=int, default=0,
                   help="realization index below the root seed")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="msalab", description=__doc__.strip().splitlines()[0],
                parents=[_common(False)])
    common = _common(True)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("spectrum", parents=[common], help="lowest eigenvalues of one box")
    _box_args(s)
    s.add_argument("--count", type=int, default=10, help="number of eigenvalues")

    s = sub.add_parser("green", parents=[common], help="cell-norm table for one (box, E)")
    _box_args(s)
    s.add_argument("--E", type=float, required=True)
    s.add_argument("--source", type=_point, help="source cell (default: box center)")

    s = sub.add_parser("classify", parents=[common], help="classification audit over the grid")
    _box_args(s)
    s.add_argument("--m", type=float, help="mass (default: msa.mass_m0)")

    s = sub.add_parser("calibrate-cgeom", parents=[common], help="LGRI measurement")
    s.add_argument("--particles", type=int, choices=(1, 2))

    sub.add_parser("msa-run", parents=[common], help="pair-event sweep over the schedule")

    s = sub.add_parser("eigen-decay", parents=[common], help="eigenfunction decay fits")
    s.add_argument("--M", type=float, help="override the amplitude bound")

    s = sub.add_parser("check", parents=[common], help="run the acceptance suite")
    s.add_argument("--only", help="comma-separated criterion ids, e.g. 1,2,5a")

    s = sub.add_parser("plot-data", parents=[common], help="gnuplot tables from artifacts")
    s.add_argument("--from", dest="src", type=Path, help="artifact directory (default: --out)")
    return p


def _config(args) -> RunConfig:
    cfg = load_config(args.config)
    over = {}
    if args.seed is not None:
        over.setdefault("run", {})["seed"] = args.seed
    if args.workers is not None:
        over.setdefault("run", {})["workers"] = args.workers
    if args.out is not None:
        over.setdefault("run", {})["out_dir"] = str(args.out)
    if getattr(args, "particles", None) is not None:
        over["model"] = {"particles": args.particles}
    if args.exhaustive_oracles:
        over["experiment"] = {"exhaustive_subcubes": True}
    cfg = with_overrides(cfg, **over)
    return cfg.validate(args.config)


def _box(cfg: RunConfig, args) -> LatticeBox:
    d, P = cfg.model.dim, cfg.model.particles
    L = cfg.schedule.L0 if args.L is None else args.L
    center = args.center if args.center is not None else (0,) * (d * P)
    return LatticeBox(center, L, d, P)


def _realization(cfg: RunConfig, args):
    seed = ex.derive_seed(cfg.run.seed, args.realization)
    return seed, cfg.disorder_for(seed, args.M)


# -- subcommands ---------------------------------------------------------------------

def cmd_spectrum(cfg, args, out: Path) -> int:
    box = _box(cfg, args)
    _, dis = _realization(cfg, args)
    op = assemble(box, dis, cfg.mesh())
    w = op.spectrum(min(args.count, op.N))
    text = "".join(fmt(float(x)) + "\n" for x in w)
    atomic_write_text(out / "spectrum.txt", text)
    sys.stdout.write(text)
    return EXIT_OK


def cmd_green(cfg, args, out: Path) -> int:
    box = _box(cfg, args)
    _, dis = _realization(cfg, args)
    op = assemble(box, dis, cfg.mesh())
    src = args.source if args.source is not None else box.center
    pts = box.points()
    norms = op.green(args.E).norms_from(src, pts)
    dist = np.max(np.abs(pts - np.asarray(src)), axis=1)
    rows = [(",".join(map(str, p)), int(r), float(v)) for p, r, v in zip(pts, dist, norms)]
    atomic_write_text(out / "green.dat", table_text(("cell", "distance", "norm"), rows))
    print(f"wrote {out / 'green.dat'} ({len(rows)} cells)")
    return EXIT_OK


def cmd_classify(cfg, args, out: Path) -> int:
    box = _box(cfg, args)
    seed, dis = _realization(cfg, args)
    ops = OperatorFactory(dis, cfg.mesh())
    E0, E1 = energy_interval(cfg)
    n = cfg.experiment.grid_points
    grid = np.linspace(E0, E1, n)
    tgrid = np.linspace(E0 - cfg.experiment.tunnel_margin, E1, n)
    m = cfg.msa.mass_m0 if args.m is None else args.m
    exhaustive = cfg.experiment.exhaustive_subcubes
    res, rw = resonance_scan(ops, box, grid, cfg.msa.alpha, exhaustive)
    sing, sw = singular_scan(ops(box), grid, m)
    L_prev = min_subscale(box.L, cfg.msa.alpha)
    if L_prev < box.L:
        tun = is_tunneling(ops, box, m, tgrid, L_prev)
    else:
        # no sub-scale fits below L: tunneling is not defined
        tun = Classification(box, float("nan"), witness={"sub_scale": L_prev})
    records, mismatches = [], 0
    for i, E in enumerate(grid):
        wit = {"resonance": rw[i], "singular": sw[i], "tunneling": tun.witness}
        if args.exhaustive_oracles:
            oracle = {"resonant": brute_resonant(ops, box, E, cfg.msa.alpha),
                      "singular": brute_singular(ops(box), E, m)}
            wit["oracle"] = oracle
            mismatches += (oracle["resonant"] != bool(res[i])) + (oracle["singular"] != bool(sing[i]))
        records.append(Classification(box, float(E), bool(res[i]), bool(sing[i]),
                                      tun.tunneling, wit))
    params = {"seed": seed, "m": m, "alpha": cfg.msa.alpha, "exhaustive": exhaustive}
    atomic_write_text(out / "classify.jsonl", audit_lines(records, params))
    print(f"wrote {out / 'classify.jsonl'}: {int(res.sum())} resonant, {int(sing.sum())} "
          f"singular of {n} energies; tunneling={tun.tunneling}")
    if mismatches:
        print(f"{mismatches} flags disagree with the brute-force oracle", file=sys.stderr)
        return EXIT_PROPERTY
    return EXIT_OK


def cmd_calibrate_cgeom(cfg, args, out: Path) -> int:
    r = run_calibrate_cgeom(cfg, out, args.particles)
    print(f"C_geom = {fmt(r['C_geom'])} ({r['holdout_violations']} hold-out violations)")
    return EXIT_OK if r["holdout_violations"] == 0 else EXIT_PROPERTY


def cmd_msa_run(cfg, args, out: Path) -> int:
    s = run_msa(cfg, out)
    for v in s["verdicts"]:
        print(f"category {v['category']} k={v['k']}: S {v['count_S']}/{v['trials']} "
              f"-> {v['verdict']}")
    return EXIT_OK


def cmd_eigen_decay(cfg, args, out: Path) -> int:
    r = run_eigen_decay(cfg, out, args.M)
    print(f"{r['localized']}/{r['eigenfunctions']} eigenfunctions localized")
    return EXIT_OK


def cmd_check(cfg, args, out: Path) -> int:
    only = set(args.only.split(",")) if args.only else None
    suite = acceptance.Suite(cfg, out)
    verdicts = suite.run(only, echo=print)
    atomic_write_text(out / "check_report.txt", "".join(v.line() + "\n" for v in verdicts))
    atomic_write_text(out / "check_report.json", json.dumps(
        [{"criterion": v.number, "title": v.title, "status": v.status, "detail": v.detail}
         for v in verdicts], indent=2) + "\n")
    return EXIT_OK if all(v.passed for v in verdicts) else EXIT_PROPERTY


def cmd_plot_data(cfg, args, out: Path) -> int:
    src = args.src if args.src is not None else out
    present = [w for w, f in (("trend", "results.csv"), ("profile", "decay_profile.csv"),
                              ("lgri", "lgri_ratios.csv")) if (src / f).exists()]
    if not present:
        raise MissingArtifact(f"no run artifacts in {src}")
    for path in emit_plot_data(src, out, present):
        print(f"wrote {path}")
    return EXIT_OK


COMMANDS = {
    "spectrum": cmd_spectrum, "green": cmd_green, "classify": cmd_classify,
    "calibrate-cgeom": cmd_calibrate_cgeom, "msa-run": cmd_msa_run,
    "eigen-decay": cmd_eigen_decay, "check": cmd_check, "plot-data": cmd_plot_data,
}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        cfg = _config(args)
        out = Path(cfg.run.out_dir)
        return COMMANDS[args.command](cfg, args, out)
    except (UsageError, ConfigError, GeometryError, AssemblyError, MissingArtifact) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SolverError, NearSingularError, np.linalg.LinAlgError, ArpackError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
