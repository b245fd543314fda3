"""Run configuration: a small INI-style format with full validation.

The format is line oriented: ``[section]`` headers and ``key = value``
assignments, ``#`` comments.  Parsing collects *all* problems (unknown keys,
type mismatches, violated invariants) with their line numbers before raising,
and ``serialize_config(parse_config(text))`` reparses to an equal config.

Sections and keys are documented in the project README; every simulation and
experiment is fully determined by one such document (seeds are mandatory for
random initial data).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..bulk import BulkField, DiskGrid
from ..model import (
    CutoffReactionExchange,
    EquilibriumExchange,
    FullState,
    Params,
    ReactionExchange,
    ReducedState,
)
from ..potentials import DoubleWell, LOGARITHMIC, POLYNOMIAL, REGULARIZED
from ..stepper import Schedule, StepperConfig
from ..surface import SurfaceField, SurfaceGrid


class ConfigError(ValueError):
    """Carries every violation found in a config document."""

    def __init__(self, errors):
        self.errors = list(errors)
        lines = []
        for line, msg in self.errors:
            where = f"line {line}: " if line is not None else ""
            lines.append(f"{where}{msg}")
        super().__init__("invalid configuration:\n  " + "\n  ".join(lines))


@dataclass(frozen=True)
class GeometryConfig:
    kind: str                      # circle | torus | disk
    n: int | None = None           # circle nodes
    nx: int | None = None
    ny: int | None = None
    lx: float = 2.0 * math.pi
    ly: float = 2.0 * math.pi
    nr: int | None = None          # disk radial cells
    ntheta: int | None = None      # disk angular nodes / boundary circle


@dataclass(frozen=True)
class InitialConfig:
    kind: str                      # constant | random | file
    phi_mean: float = 0.0
    amplitude: float = 0.1
    v_amplitude: float = 0.0
    cutoff: int = 8                # highest excited integer mode
    seed: int | None = None
    v0: float = 0.5
    u0: float = 0.0
    path: str | None = None


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str | None = None
    d_list: tuple = ()
    kappa_list: tuple = ()
    scales: tuple = ()
    t_star: float | None = None


@dataclass(frozen=True)
class RunConfig:
    system: str                    # full | reduced
    geometry: GeometryConfig
    potential: DoubleWell
    exchange: object
    D: float
    delta: float
    omega_measure: float
    stepper: StepperConfig
    initial: InitialConfig
    schedule: Schedule
    experiment: ExperimentConfig = field(default_factory=ExperimentConfig)
    output_dir: str | None = None

    # -- builders ----------------------------------------------------------

    def build_params(self) -> Params:
        return Params(D=self.D, delta=self.delta, potential=self.potential,
                      exchange=self.exchange, omega_measure=self.omega_measure)

    def build_surface_grid(self) -> SurfaceGrid:
        g = self.geometry
        if g.kind == "circle":
            return SurfaceGrid.circle(g.n)
        if g.kind == "torus":
            return SurfaceGrid.torus(g.nx, g.ny, g.lx, g.ly)
        return SurfaceGrid.circle(g.ntheta)

    def build_disk_grid(self) -> DiskGrid | None:
        if self.geometry.kind != "disk":
            return None
        return DiskGrid(self.geometry.nr, self.geometry.ntheta)

    def build_initial_state(self):
        if self.initial.kind == "file":
            from .io import read_snapshot
            state, _ = read_snapshot(self.initial.path)
            return state
        grid = self.build_surface_grid()
        phi_vals, v_vals = _initial_fields(grid, self.initial)
        phi = SurfaceField(grid, phi_vals)
        v = SurfaceField(grid, v_vals)
        if self.system == "full":
            disk = self.build_disk_grid()
            u = BulkField.constant(disk, self.initial.u0)
            return FullState(0.0, u, phi, v)
        total = self.omega_measure * self.initial.u0 + grid.integral(v_vals)
        return ReducedState(0.0, self.initial.u0, phi, v, total,
                            self.omega_measure)


def _lowpass_noise(grid, rng, cutoff):
    """Mean-free random field with integer modes up to `cutoff`, sup-norm 1."""
    noise = rng.standard_normal(grid.shape)
    coeffs = grid.fft(noise)
    if grid.kind == "circle":
        n = grid.shape[0]
        k = np.arange(n // 2 + 1)
        mask = (k >= 1) & (k <= cutoff)
    else:
        nx, ny = grid.shape
        kx = np.abs(np.fft.fftfreq(nx, d=1.0 / nx))
        ky = np.abs(np.fft.rfftfreq(ny, d=1.0 / ny))
        mask = (kx[:, None] <= cutoff) & (ky[None, :] <= cutoff)
        mask[0, 0] = False
    out = grid.ifft(coeffs * mask)
    peak = np.max(np.abs(out))
    if peak > 0.0:
        out /= peak
    out -= grid.mean(out)
    return out


def _initial_fields(grid, init: InitialConfig):
    if init.kind == "constant":
        phi = np.full(grid.shape, init.phi_mean)
        v = np.full(grid.shape, init.v0)
        return phi, v
    rng = np.random.default_rng(init.seed)
    phi = init.phi_mean + init.amplitude * _lowpass_noise(grid, rng, init.cutoff)
    v = np.full(grid.shape, init.v0)
    if init.v_amplitude > 0.0:
        v = v + init.v_amplitude * _lowpass_noise(grid, rng, init.cutoff)
    return phi, v


# -- schema ---------------------------------------------------------------------

_SCHEMA = {
    "run": {"system": str},
    "geometry": {"kind": str, "n": int, "nx": int, "ny": int,
                 "lx": float, "ly": float, "nr": int, "ntheta": int},
    "potential": {"kind": str, "theta": float, "theta0": float,
                  "r0": float, "kappa": float},
    "exchange": {"kind": str, "a0": float, "alpha": float,
                 "b1": float, "b2": float, "h0": float},
    "params": {"diffusion": float, "delta": float, "omega_measure": float},
    "stepper": {"dt": float, "newton_tol": float, "newton_max_iters": int,
                "dt_min": float, "damping": float, "dealias": bool,
                "gmres_tol": float, "kappa_fallback": float},
    "initial": {"kind": str, "phi_mean": float, "amplitude": float,
                "v_amplitude": float, "cutoff": int, "seed": int,
                "v0": float, "u0": float, "path": str},
    "schedule": {"t_final": float, "sample_stride": int,
                 "checkpoint_stride": int},
    "experiment": {"kind": str, "d_list": "floats", "kappa_list": "floats",
                   "scales": "floats", "t_star": float},
    "output": {"directory": str},
}


def _tokenize(text, errors):
    sections = {}
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            name = line[1:-1].strip().lower()
            if name not in _SCHEMA:
                errors.append((lineno, f"unknown section [{name}]"))
                current = None
                continue
            current = sections.setdefault(name, {})
            continue
        if "=" not in line:
            errors.append((lineno, f"expected 'key = value', got {line!r}"))
            continue
        key, value = (part.strip() for part in line.split("=", 1))
        key = key.lower()
        if current is None:
            errors.append((lineno, f"key {key!r} outside any section"))
            continue
        current[key] = (value, lineno)
    return sections


def _convert(raw, typ):
    if typ is str:
        return raw
    if typ is bool:
        low = raw.lower()
        if low in ("true", "yes", "on", "1"):
            return True
        if low in ("false", "no", "off", "0"):
            return False
        raise ValueError(f"expected a boolean, got {raw!r}")
    if typ is int:
        value = int(raw)
        return value
    if typ is float:
        return float(raw)
    if typ == "floats":
        items = [part.strip() for part in raw.split(",") if part.strip()]
        return tuple(float(part) for part in items)
    raise AssertionError(typ)


class _Extractor:
    """Typed access to tokenized sections, accumulating errors."""

    def __init__(self, sections, errors):
        self.sections = sections
        self.errors = errors
        for name, content in sections.items():
            for key, (_, line) in content.items():
                if key not in _SCHEMA[name]:
                    errors.append((line, f"unknown key {key!r} in [{name}]"))

    def get(self, section, key, default=None, required=False):
        entry = self.sections.get(section, {}).get(key)
        if entry is None:
            if required:
                self.errors.append(
                    (None, f"missing required key {key!r} in [{section}]"))
            return default
        raw, line = entry
        try:
            return _convert(raw, _SCHEMA[section][key])
        except (ValueError, KeyError):
            self.errors.append(
                (line, f"bad value for {section}.{key}: {raw!r}"))
            return default

    def line_of(self, section, key):
        entry = self.sections.get(section, {}).get(key)
        return entry[1] if entry else None


def parse_config(text: str, overrides=()) -> RunConfig:
    """Parse and validate a config document; raise ConfigError with every
    violation found.  `overrides` are (dotted.key, value) pairs applied on
    top of the document, e.g. ("stepper.dt", "1e-3")."""
    errors = []
    sections = _tokenize(text, errors)
    for dotted, value in overrides:
        if "." not in dotted:
            errors.append((None, f"override {dotted!r} is not section.key"))
            continue
        section, key = dotted.split(".", 1)
        section, key = section.lower(), key.lower()
        if section not in _SCHEMA or key not in _SCHEMA[section]:
            errors.append((None, f"override targets unknown key {dotted!r}"))
            continue
        sections.setdefault(section, {})[key] = (str(value), None)
    ex = _Extractor(sections, errors)

    system = ex.get("run", "system", required=True)
    if system is not None and system not in ("full", "reduced"):
        errors.append((ex.line_of("run", "system"),
                       f"run.system must be full or reduced, got {system!r}"))

    geometry = _parse_geometry(ex, system, errors)
    potential = _parse_potential(ex, errors)
    exchange = _parse_exchange(ex, errors)

    D = ex.get("params", "diffusion", default=1.0)
    delta = ex.get("params", "delta", default=1.0)
    omega = ex.get("params", "omega_measure", default=math.pi)
    if D is not None and D <= 0.0:
        errors.append((ex.line_of("params", "diffusion"),
                       "diffusion coefficient must be positive"))
    if delta is not None and delta <= 0.0:
        errors.append((ex.line_of("params", "delta"),
                       "delta must be positive (affinity strength)"))
    if omega is not None and omega <= 0.0:
        errors.append((ex.line_of("params", "omega_measure"),
                       "omega_measure must be positive"))

    stepper = _parse_stepper(ex, errors)
    initial = _parse_initial(ex, system, errors)
    schedule = _parse_schedule(ex, stepper, errors)
    experiment = _parse_experiment(ex, errors)
    output_dir = ex.get("output", "directory")

    if errors:
        raise ConfigError(errors)
    return RunConfig(system=system, geometry=geometry, potential=potential,
                     exchange=exchange, D=D, delta=delta, omega_measure=omega,
                     stepper=stepper, initial=initial, schedule=schedule,
                     experiment=experiment, output_dir=output_dir)


def _parse_geometry(ex, system, errors):
    kind = ex.get("geometry", "kind", required=True)
    if kind is None:
        return None
    if kind not in ("circle", "torus", "disk"):
        errors.append((ex.line_of("geometry", "kind"),
                       f"geometry.kind must be circle, torus or disk, got {kind!r}"))
        return None
    n = ex.get("geometry", "n")
    nx = ex.get("geometry", "nx")
    ny = ex.get("geometry", "ny")
    lx = ex.get("geometry", "lx", default=2.0 * math.pi)
    ly = ex.get("geometry", "ly", default=2.0 * math.pi)
    nr = ex.get("geometry", "nr")
    ntheta = ex.get("geometry", "ntheta")
    if kind == "circle" and n is None:
        errors.append((None, "circle geometry needs geometry.n"))
    if kind == "torus" and (nx is None or ny is None):
        errors.append((None, "torus geometry needs geometry.nx and geometry.ny"))
    if kind == "disk" and (nr is None or ntheta is None):
        errors.append((None, "disk geometry needs geometry.nr and geometry.ntheta"))
    if system == "full" and kind != "disk":
        errors.append((ex.line_of("geometry", "kind"),
                       "the full system needs disk geometry (bulk + boundary circle)"))
    if system == "reduced" and kind == "disk":
        errors.append((ex.line_of("geometry", "kind"),
                       "the reduced system lives on a circle or torus"))
    for label, value in (("n", n), ("nx", nx), ("ny", ny), ("ntheta", ntheta)):
        if value is not None and (value < 8 or value % 2 != 0):
            errors.append((ex.line_of("geometry", label),
                           f"geometry.{label} must be even and >= 8"))
    return GeometryConfig(kind=kind, n=n, nx=nx, ny=ny, lx=lx, ly=ly,
                          nr=nr, ntheta=ntheta)


def _parse_potential(ex, errors):
    kind = ex.get("potential", "kind", default=LOGARITHMIC)
    if kind not in (LOGARITHMIC, POLYNOMIAL, REGULARIZED):
        errors.append((ex.line_of("potential", "kind"),
                       f"unknown potential kind {kind!r}"))
        return None
    kwargs = dict(
        kind=kind,
        theta=ex.get("potential", "theta", default=1.0),
        theta0=ex.get("potential", "theta0", default=2.0),
        r0=ex.get("potential", "r0", default=0.5),
    )
    kappa = ex.get("potential", "kappa")
    if kind == REGULARIZED:
        if kappa is None:
            errors.append((None, "regularized potential needs potential.kappa"))
            return None
        kwargs["kappa"] = kappa
    try:
        return DoubleWell(**kwargs)
    except ValueError as exc:
        errors.append((None, f"invalid potential: {exc}"))
        return None


def _parse_exchange(ex, errors):
    kind = ex.get("exchange", "kind", required=True)
    if kind is None:
        return None
    try:
        if kind == "equilibrium":
            return EquilibriumExchange(
                a0=ex.get("exchange", "a0", default=1.0),
                alpha=ex.get("exchange", "alpha", default=0.0))
        if kind == "reaction":
            return ReactionExchange(
                b1=ex.get("exchange", "b1", default=1.0),
                b2=ex.get("exchange", "b2", default=1.0))
        if kind == "cutoff_reaction":
            return CutoffReactionExchange(
                b1=ex.get("exchange", "b1", default=1.0),
                b2=ex.get("exchange", "b2", default=1.0),
                h0=ex.get("exchange", "h0", default=1.0))
    except ValueError as exc:
        errors.append((None, f"invalid exchange law: {exc}"))
        return None
    errors.append((ex.line_of("exchange", "kind"),
                   f"exchange.kind must be equilibrium, reaction or "
                   f"cutoff_reaction, got {kind!r}"))
    return None


def _parse_stepper(ex, errors):
    dt = ex.get("stepper", "dt", required=True)
    if dt is None:
        return None
    kwargs = dict(
        dt=dt,
        newton_tol=ex.get("stepper", "newton_tol", default=1e-10),
        newton_max_iters=ex.get("stepper", "newton_max_iters", default=50),
        damping=ex.get("stepper", "damping", default=0.5),
        dealias=ex.get("stepper", "dealias", default=False),
        gmres_tol=ex.get("stepper", "gmres_tol", default=1e-12),
        kappa_fallback=ex.get("stepper", "kappa_fallback", default=1e-5),
    )
    dt_min = ex.get("stepper", "dt_min")
    if dt_min is not None:
        kwargs["dt_min"] = dt_min
    try:
        return StepperConfig(**kwargs)
    except ValueError as exc:
        errors.append((None, f"invalid stepper config: {exc}"))
        return None


def _parse_initial(ex, system, errors):
    kind = ex.get("initial", "kind", required=True)
    if kind is None:
        return None
    if kind not in ("constant", "random", "file"):
        errors.append((ex.line_of("initial", "kind"),
                       f"initial.kind must be constant, random or file"))
        return None
    init = InitialConfig(
        kind=kind,
        phi_mean=ex.get("initial", "phi_mean", default=0.0),
        amplitude=ex.get("initial", "amplitude", default=0.1),
        v_amplitude=ex.get("initial", "v_amplitude", default=0.0),
        cutoff=ex.get("initial", "cutoff", default=8),
        seed=ex.get("initial", "seed"),
        v0=ex.get("initial", "v0", default=0.5),
        u0=ex.get("initial", "u0", default=0.0),
        path=ex.get("initial", "path"),
    )
    if kind == "random":
        if init.seed is None:
            errors.append((None, "random initial data needs initial.seed "
                                 "(reproducibility)"))
        if abs(init.phi_mean) + init.amplitude >= 1.0:
            errors.append((None, "initial |phi_mean| + amplitude must be < 1"))
    if kind == "constant" and abs(init.phi_mean) > 1.0:
        errors.append((None, "initial phi_mean must lie in [-1, 1]"))
    if kind == "file" and init.path is None:
        errors.append((None, "file initial data needs initial.path"))
    return init


def _parse_schedule(ex, stepper, errors):
    t_final = ex.get("schedule", "t_final", required=True)
    if t_final is None:
        return None
    kwargs = dict(
        t_final=t_final,
        sample_stride=ex.get("schedule", "sample_stride", default=1),
        checkpoint_stride=ex.get("schedule", "checkpoint_stride", default=0),
    )
    try:
        schedule = Schedule(**kwargs)
    except ValueError as exc:
        errors.append((None, f"invalid schedule: {exc}"))
        return None
    if stepper is not None:
        n = round(t_final / stepper.dt)
        if abs(n * stepper.dt - t_final) > 1e-9 * max(1.0, t_final):
            errors.append((ex.line_of("schedule", "t_final"),
                           "t_final must be an integer multiple of stepper.dt"))
    return schedule


def _parse_experiment(ex, errors):
    kind = ex.get("experiment", "kind")
    cfg = ExperimentConfig(
        kind=kind,
        d_list=ex.get("experiment", "d_list", default=()),
        kappa_list=ex.get("experiment", "kappa_list", default=()),
        scales=ex.get("experiment", "scales", default=()),
        t_star=ex.get("experiment", "t_star"),
    )
    known = (None, "large_d", "kappa", "equilibrium_convergence", "absorbing")
    if kind not in known:
        errors.append((ex.line_of("experiment", "kind"),
                       f"unknown experiment kind {kind!r}"))
    return cfg


# -- serialization ----------------------------------------------------------------

def _fmt(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ", ".join(repr(float(v)) for v in value)
    return str(value)


def serialize_config(cfg: RunConfig) -> str:
    """Canonical text form; parse_config(serialize_config(c)) == c."""
    out = []

    def section(name, pairs):
        pairs = [(k, v) for k, v in pairs if v is not None]
        if not pairs:
            return
        out.append(f"[{name}]")
        out.extend(f"{k} = {_fmt(v)}" for k, v in pairs)
        out.append("")

    section("run", [("system", cfg.system)])
    g = cfg.geometry
    geo = [("kind", g.kind)]
    if g.kind == "circle":
        geo.append(("n", g.n))
    elif g.kind == "torus":
        geo += [("nx", g.nx), ("ny", g.ny), ("lx", g.lx), ("ly", g.ly)]
    else:
        geo += [("nr", g.nr), ("ntheta", g.ntheta)]
    section("geometry", geo)

    pot = cfg.potential
    pot_pairs = [("kind", pot.kind), ("theta", pot.theta),
                 ("theta0", pot.theta0), ("r0", pot.r0)]
    if pot.kind == REGULARIZED:
        pot_pairs.append(("kappa", pot.kappa))
    section("potential", pot_pairs)

    law = cfg.exchange
    if isinstance(law, EquilibriumExchange):
        section("exchange", [("kind", "equilibrium"), ("a0", law.a0),
                             ("alpha", law.alpha)])
    elif isinstance(law, CutoffReactionExchange):
        section("exchange", [("kind", "cutoff_reaction"), ("b1", law.b1),
                             ("b2", law.b2), ("h0", law.h0)])
    else:
        section("exchange", [("kind", "reaction"), ("b1", law.b1),
                             ("b2", law.b2)])

    section("params", [("diffusion", cfg.D), ("delta", cfg.delta),
                       ("omega_measure", cfg.omega_measure)])
    st = cfg.stepper
    section("stepper", [("dt", st.dt), ("newton_tol", st.newton_tol),
                        ("newton_max_iters", st.newton_max_iters),
                        ("dt_min", st.dt_min), ("damping", st.damping),
                        ("dealias", st.dealias), ("gmres_tol", st.gmres_tol),
                        ("kappa_fallback", st.kappa_fallback)])
    init = cfg.initial
    section("initial", [("kind", init.kind), ("phi_mean", init.phi_mean),
                        ("amplitude", init.amplitude),
                        ("v_amplitude", init.v_amplitude),
                        ("cutoff", init.cutoff), ("seed", init.seed),
                        ("v0", init.v0), ("u0", init.u0),
                        ("path", init.path)])
    sch = cfg.schedule
    section("schedule", [("t_final", sch.t_final),
                         ("sample_stride", sch.sample_stride),
                         ("checkpoint_stride", sch.checkpoint_stride)])
    exp = cfg.experiment
    section("experiment", [("kind", exp.kind),
                           ("d_list", exp.d_list or None),
                           ("kappa_list", exp.kappa_list or None),
                           ("scales", exp.scales or None),
                           ("t_star", exp.t_star)])
    section("output", [("directory", cfg.output_dir)])
    return "\n".join(out)
