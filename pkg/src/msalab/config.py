"""
Run configuration: a flat, sectioned INI file with units in key names.

Every field has a default, so an empty file is a valid configuration.
Validation reports the offending ``section.key`` and the constraint it
breaks.
"""

import configparser
import io
import typing
from dataclasses import dataclass, field, fields, asdict
from pathlib import Path
from typing import Optional

from .disorder import AmplitudeField, BumpProfile, InteractionPotential
from .hamiltonian import Disorder, Mesh


class ConfigError(ValueError):
    def __init__(self, key: str, message: str, path=None):
        where = f"{path}: " if path else ""
        super().__init__(f"{where}{key}: {message}")
        self.key = key
        self.path = path


@dataclass
class ModelSection:
    dim: int = 1
    particles: int = 2
    mesh_mode: str = "tight-binding"
    grid_spacing_h: float = 1.0


@dataclass
class DisorderSection:
    law: str = "uniform"
    amplitude_max_M: float = 10.0
    hoelder_b: float = 1.0
    bump_kind: str = "tent"
    bump_radius_R: float = 1.0


@dataclass
class InteractionSection:
    kind: str = "step"
    strength_c: float = 4.0
    range_r0: float = 1.0


@dataclass
class MsaSection:
    alpha: float = 1.5
    mass_m0: float = 0.3
    p: int = 3
    q: int = 19
    budget_n: int = 2
    neighborhood_A: float = 4.0
    C_geom: Optional[float] = None
    M_budget: int = 2
    cluster_spacing_b: float = 0.0


@dataclass
class ScheduleSection:
    L0: int = 8
    k_max: int = 1
    max_scale: int = 200


@dataclass
class ExperimentSection:
    categories: str = "I,II,III"
    trials: int = 200
    energy_E0: float = 0.0
    energy_E1: Optional[float] = None
    E1_factor: float = 0.5
    E1_samples: int = 50
    grid_points: int = 101
    tunnel_margin: float = 1.0
    exhaustive_subcubes: bool = False
    far_pairs: bool = False


@dataclass
class LgriSection:
    samples: int = 100
    outer_L: int = 12
    inner_L: int = 4
    margin: float = 2.0
    energy_max: float = 4.0


@dataclass
class DecaySection:
    L: int = 23
    seeds: int = 8
    count: int = 30
    noise_floor: float = 1e-12


@dataclass
class RunSection:
    seed: int = 20260101
    workers: int = 1
    out_dir: str = "results"


_SECTIONS = {
    "model": ModelSection, "disorder": DisorderSection, "interaction": InteractionSection,
    "msa": MsaSection, "schedule": ScheduleSection, "experiment": ExperimentSection,
    "lgri": LgriSection, "decay": DecaySection, "run": RunSection,
}


@dataclass
class RunConfig:
    model: ModelSection = field(default_factory=ModelSection)
    disorder: DisorderSection = field(default_factory=DisorderSection)
    interaction: InteractionSection = field(default_factory=InteractionSection)
    msa: MsaSection = field(default_factory=MsaSection)
    schedule: ScheduleSection = field(default_factory=ScheduleSection)
    experiment: ExperimentSection = field(default_factory=ExperimentSection)
    lgri: LgriSection = field(default_factory=LgriSection)
    decay: DecaySection = field(default_factory=DecaySection)
    run: RunSection = field(default_factory=RunSection)

    # -- derived objects ---------------------------------------------------

    @property
    def category_list(self):
        return [c.strip() for c in self.experiment.categories.split(",") if c.strip()]

    def mesh(self) -> Mesh:
        return Mesh(self.model.grid_spacing_h, self.model.mesh_mode)

    def interaction_potential(self) -> InteractionPotential:
        i = self.interaction
        return InteractionPotential(i.kind, i.strength_c, i.range_r0)

    def disorder_for(self, seed: int, M: Optional[float] = None) -> Disorder:
        d = self.disorder
        amp = AmplitudeField(seed, d.amplitude_max_M if M is None else M, d.law,
                             d.hoelder_b, self.model.dim)
        return Disorder(amp, BumpProfile(d.bump_kind, d.bump_radius_R),
                        self.interaction_potential())

    def to_dict(self) -> dict:
        return asdict(self)

    # -- validation ----------------------------------------------------------

    def validate(self, path=None) -> "RunConfig":
        def need(ok, key, msg):
            if not ok:
                raise ConfigError(key, msg, path)

        m, s, e = self.msa, self.schedule, self.experiment
        need(self.model.dim >= 1, "model.dim", "must be a positive integer")
        need(self.model.particles in (1, 2), "model.particles", "must be 1 or 2")
        try:
            self.mesh()
        except ValueError as exc:
            raise ConfigError("model.mesh_mode", str(exc), path) from None
        need(self.disorder.law in ("uniform", "hoelder"), "disorder.law",
             "must be 'uniform' or 'hoelder'")
        need(self.disorder.amplitude_max_M >= 0, "disorder.amplitude_max_M",
             "amplitudes take values in [0, M], so M >= 0")
        need(0 < self.disorder.hoelder_b <= 1, "disorder.hoelder_b",
             "regularity exponent b must lie in (0, 1]")
        need(self.disorder.bump_kind in ("tent", "plateau"), "disorder.bump_kind",
             "must be 'tent' or 'plateau'")
        need(self.disorder.bump_radius_R > 0, "disorder.bump_radius_R",
             "bump support radius must be positive")
        need(self.interaction.kind in ("step", "tent"), "interaction.kind",
             "must be 'step' or 'tent'")
        need(self.interaction.strength_c >= 0, "interaction.strength_c",
             "0 <= U <= c requires c >= 0")
        need(self.interaction.range_r0 >= 0, "interaction.range_r0",
             "interaction range r0 must be non-negative")
        need(self.interaction.kind != "tent" or self.interaction.range_r0 > 0,
             "interaction.range_r0", "tent interaction needs r0 > 0")
        need(1 < m.alpha < 2, "msa.alpha",
             f"alpha = {m.alpha} violates α ∈ (1,2) (scale growth L_(k+1) = ceil(L_k^α))")
        need(m.mass_m0 > 0, "msa.mass_m0", "initial mass must be positive")
        d = self.model.dim
        need(m.p > 1.5 * d + 1, "msa.p",
             f"p = {m.p} violates p > 3d/2 + 1 = {1.5 * d + 1} (summability over box pairs)")
        need(m.q > 3 * m.p + 9, "msa.q",
             f"q = {m.q} violates q > 3p + 9 = {3 * m.p + 9} (interactive-pair probability exponent)")
        need(m.M_budget == 2, "msa.M_budget", "the pair analysis uses M = 2")
        need(m.budget_n >= 1, "msa.budget_n", "cluster budget n must be a positive integer")
        need(m.neighborhood_A > 0, "msa.neighborhood_A", "A must be positive")
        need(m.C_geom is None or m.C_geom > 0, "msa.C_geom", "C_geom must be positive")
        need(m.cluster_spacing_b >= 0, "msa.cluster_spacing_b", "b must be non-negative")
        need(s.L0 >= 2, "schedule.L0", "initial scale L0 must be >= 2")
        need(s.k_max >= 0, "schedule.k_max", "k_max must be non-negative")
        need(s.max_scale >= s.L0, "schedule.max_scale", "feasibility cap below L0")
        bad = [c for c in self.category_list if c not in ("I", "II", "III")]
        need(not bad and self.category_list, "experiment.categories",
             "categories must be a comma list drawn from I, II, III")
        need(e.trials >= 0, "experiment.trials", "trials must be non-negative")
        need(e.grid_points >= 1, "experiment.grid_points", "energy grid needs a point")
        need(e.energy_E1 is None or e.energy_E1 > e.energy_E0, "experiment.energy_E1",
             "the energy interval needs E1* > E0*")
        need(e.E1_factor > 0, "experiment.E1_factor", "must be positive")
        need(e.E1_samples >= 1, "experiment.E1_samples", "need at least one sample")
        need(e.tunnel_margin >= 0, "experiment.tunnel_margin", "must be non-negative")
        lg = self.lgri
        need(lg.inner_L >= 2 and lg.outer_L >= lg.inner_L + 4, "lgri.outer_L",
             "the inner box must fit in the outer box shrunk by 3 (outer_L >= inner_L + 4)")
        need(lg.samples >= 1 and lg.margin >= 1, "lgri.margin",
             "needs samples >= 1 and margin >= 1")
        need(self.decay.L >= 2 and self.decay.count >= 1 and self.decay.seeds >= 1,
             "decay.L", "needs L >= 2, count >= 1 and seeds >= 1")
        need(self.run.workers >= 1, "run.workers", "needs at least one worker")
        need(0 <= self.run.seed < 2 ** 64, "run.seed", "seed must be an unsigned 64-bit integer")
        return self

    # -- text round trip ---------------------------------------------------

    def to_ini(self) -> str:
        cp = configparser.ConfigParser(interpolation=None)
        cp.optionxform = str
        for name in _SECTIONS:
            sec = getattr(self, name)
            cp[name] = {f.name: _dump(getattr(sec, f.name)) for f in fields(sec)}
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()


def _dump(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _coerce(raw: str, annotation, key, path):
    raw = raw.strip()
    args = [a for a in typing.get_args(annotation) if a is not type(None)]
    if args:
        if raw == "":
            return None
        annotation = args[0]
    try:
        if annotation is bool:
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        return annotation(raw)
    except ValueError:
        raise ConfigError(key, f"cannot parse {raw!r} as {annotation.__name__}", path) from None


def parse_config(text: str, path=None) -> RunConfig:
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError("<file>", f"malformed config: {exc}", path) from None
    cfg = RunConfig()
    for name in cp.sections():
        if name not in _SECTIONS:
            raise ConfigError(name, "unknown section", path)
        sec = getattr(cfg, name)
        known = {f.name: f for f in fields(sec)}
        for key, raw in cp[name].items():
            if key not in known:
                raise ConfigError(f"{name}.{key}", "unknown key", path)
            f = known[key]
            setattr(sec, key, _coerce(raw, f.type, f"{name}.{key}", path))
    return cfg


def load_config(path=None) -> RunConfig:
    """Parse and validate a config file (defaults when ``path`` is None)."""
    if path is None:
        return RunConfig().validate()
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError("<file>", f"cannot read config: {exc}", path) from None
    return parse_config(text, path).validate(path)
