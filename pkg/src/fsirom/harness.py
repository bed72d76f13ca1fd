"""End-to-end runs, timing and figure data.

A run couples the fluid solver to either the full-order solid or a trained
reduced operator on one inlet signal. Everything a run needs comes from a
:class:`RunConfig`, a JSON document with one section per component.
"""

from __future__ import annotations

import copy
import csv
import json
import math
import time
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .coupling import CouplingConfig, CouplingDriver
from .errors import AlignmentError, ConfigError, FsiromError, PreconditionError
from .fluid import FluidConfig, FluidSolver
from .mesh import Mesh1D, SnapshotMatrix, TubeState
from .signal import DuffingParams, SignalSeries, integrate_signal
from .solid import ConstitutiveLaw, FomSolid, GeomMaterial, hoop_stress, strain_from_section

MODES = ("fom-fom", "train", "rom-fom")
TRANSIENT = 2.0  # seconds discarded by the accuracy metrics

# values the benchmark uses where they differ from the library defaults
_SECTION_DEFAULTS = {
    "mesh": {},
    "fluid": {},
    "solid": {},
    "coupling": {"max_columns": 6},
    "rom": {"r_f": 4, "r_u": 4, "energy": None, "kind": "tps", "lam": 0.0, "degree": 2,
            "t_end": 120.0},
    "signal": {},
}
_ROM_KEYS = set(_SECTION_DEFAULTS["rom"])
_SIGNAL_KEYS = {f.name for f in fields(DuffingParams)} - {"f", "h", "T"} | {"substeps"}
_SOLID_KEYS = {f.name for f in fields(GeomMaterial)} | {f.name for f in fields(ConstitutiveLaw)}


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


@dataclass
class RunConfig:
    """One run (or a whole pipeline) described by plain JSON-able sections.

    ``mu`` is ``(f, h)`` of the inlet oscillator. ``t_end`` is the horizon of
    the FOM-FOM run; ``rom.t_end`` the horizon of the ROM-FOM run.
    Unset ``fluid.v_ref`` means "the first inlet velocity".
    """

    mesh: dict = field(default_factory=dict)
    fluid: dict = field(default_factory=dict)
    solid: dict = field(default_factory=dict)
    coupling: dict = field(default_factory=dict)
    rom: dict = field(default_factory=dict)
    signal: dict = field(default_factory=dict)
    mode: str = "fom-fom"
    mu: tuple = (2.0, 6.0)
    t_end: float = 18.0
    out: str | None = None
    model: str | None = None
    cost_multiplier: int = 1
    prerelax_steps: int = 3

    def __post_init__(self):
        for name, defaults in _SECTION_DEFAULTS.items():
            merged = dict(defaults)
            merged.update(getattr(self, name) or {})
            setattr(self, name, merged)
        self.mu = tuple(float(x) for x in self.mu)

    # -- construction --------------------------------------------------------

    @classmethod
    def from_dict(cls, doc: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        cfg = cls(**copy.deepcopy(doc))
        cfg.validate()
        return cfg

    @classmethod
    def from_json(cls, path, overrides=()) -> "RunConfig":
        try:
            doc = json.loads(Path(path).read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
        if not isinstance(doc, dict):
            raise ConfigError(f"config {path} must hold a JSON object")
        return cls.from_dict(apply_overrides(doc, overrides))

    def to_dict(self) -> dict:
        d = {f.name: copy.deepcopy(getattr(self, f.name)) for f in fields(self)}
        d["mu"] = list(self.mu)
        return d

    def with_(self, **changes) -> "RunConfig":
        d = self.to_dict()
        for k, v in changes.items():
            if k in _SECTION_DEFAULTS:
                d[k] = {**d[k], **v}
            else:
                d[k] = v
        return RunConfig.from_dict(d)

    # -- validation and component builders -----------------------------------

    def validate(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if len(self.mu) != 2:
            raise ConfigError(f"mu must have two entries (f, h), got {self.mu}")
        if int(self.cost_multiplier) < 1 or int(self.prerelax_steps) < 0:
            raise ConfigError("cost_multiplier must be >= 1 and prerelax_steps >= 0")
        for name, keys in (("rom", _ROM_KEYS), ("signal", _SIGNAL_KEYS), ("solid", _SOLID_KEYS)):
            bad = set(getattr(self, name)) - keys
            if bad:
                raise ConfigError(f"unknown keys in section '{name}': {sorted(bad)}")
        if self.rom["kind"] not in ("tps", "poly"):
            raise ConfigError(f"rom.kind must be 'tps' or 'poly', got {self.rom['kind']!r}")
        if self.mode == "rom-fom" and not self.model:
            raise ConfigError("rom-fom mode needs a model path")
        try:
            mesh = self.build_mesh()
            self.build_fluid_config(v_first=0.0)
            self.build_geom()
            self.build_law()
            self.build_coupling()
            params = self.signal_params(self.t_end)
        except FsiromError as exc:
            raise ConfigError(str(exc)) from None
        except TypeError as exc:
            raise ConfigError(f"bad config section: {exc}") from None
        dt = self.build_fluid_config(0.0).dt
        for horizon in (self.t_end, self.rom["t_end"]):
            n = round(horizon / dt)
            if n < 1 or abs(n * dt - horizon) > 1e-9 * max(1.0, horizon):
                raise ConfigError(f"horizon {horizon} is not a multiple of dt={dt}")
        del mesh, params
        return self

    def build_mesh(self) -> Mesh1D:
        return Mesh1D(**self.mesh)

    def build_fluid_config(self, v_first: float) -> FluidConfig:
        kw = dict(self.fluid)
        if kw.get("v_ref") is None:
            kw["v_ref"] = float(v_first)
        return FluidConfig(**kw)

    def build_geom(self) -> GeomMaterial:
        return GeomMaterial(**{k: v for k, v in self.solid.items() if k in ("r0", "h_wall")})

    def build_law(self) -> ConstitutiveLaw:
        return ConstitutiveLaw(**{k: v for k, v in self.solid.items()
                                  if k in ("E1", "E2", "sigma_off", "eps0")})

    def build_coupling(self) -> CouplingConfig:
        return CouplingConfig(**self.coupling)

    def build_fom_solid(self) -> FomSolid:
        return FomSolid(self.build_geom(), self.build_law(), int(self.cost_multiplier))

    def signal_params(self, horizon: float) -> DuffingParams:
        kw = {k: v for k, v in self.signal.items() if k != "substeps"}
        return DuffingParams.from_mu(self.mu, T=float(horizon), **kw)

    def build_signal(self, horizon: float) -> SignalSeries:
        dt = self.build_fluid_config(0.0).dt
        return integrate_signal(self.signal_params(horizon), dt, int(self.signal.get("substeps", 20)))


def apply_overrides(doc: dict, overrides) -> dict:
    """Apply ``section.key=value`` (or top-level ``key=value``) strings to a config document."""
    doc = copy.deepcopy(doc)
    for item in overrides or ():
        key, sep, raw = item.partition("=")
        if not sep or not key:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        value = _parse_value(raw)
        section, dot, sub = key.partition(".")
        if dot:
            if section not in _SECTION_DEFAULTS:
                raise ConfigError(f"unknown config section {section!r} in override {item!r}")
            doc.setdefault(section, {})[sub] = value
        else:
            doc[key] = value
    return doc


# --- runs ---------------------------------------------------------------------


@dataclass
class RunResults:
    """Per-step inlet trace plus the converged fields of every time level."""

    label: str
    mu: tuple
    times: np.ndarray
    v_inlet: np.ndarray
    p_inlet: np.ndarray
    a_inlet: np.ndarray
    n_subiters: np.ndarray  # 0 for the initial level
    a_fields: np.ndarray  # (n_levels, n_cells)
    p_fields: np.ndarray

    @property
    def n_steps(self) -> int:
        return self.times.shape[0] - 1

    def mean_subiters(self) -> float:
        return float(np.mean(self.n_subiters[1:])) if self.n_steps else 0.0

    def write_trace(self, path):
        rows = zip(self.times, self.p_inlet, self.v_inlet, self.a_inlet, self.n_subiters)
        _write_csv(path, ["t", "p_inlet", "v_inlet", "a_inlet", "n_subiters"],
                   ([t, p, v, a, int(n)] for t, p, v, a, n in rows))

    @classmethod
    def read_trace(cls, path, label="run", mu=(math.nan, math.nan)) -> "RunResults":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        empty = np.zeros((data.shape[0], 0))
        return cls(label, tuple(mu), data[:, 0], data[:, 2], data[:, 1], data[:, 3],
                   data[:, 4].astype(np.int64), empty, empty)


def _fmt(x):
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    return f"{float(x):.17g}"


def _write_csv(path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(x) for x in row])
    return path


def initial_state(mesh: Mesh1D, solid, v0: float, geom: GeomMaterial) -> TubeState:
    """Uniform flow at ``v0`` with the solid in equilibrium at zero pressure."""
    st = TubeState.uniform(mesh.n_cells, geom.a0, v0, 0.0)
    st.a = np.asarray(solid(st.p), dtype=np.float64)
    return st


def _simulate(cfg: RunConfig, solid, horizon: float, label: str, collectors=()):
    mesh = cfg.build_mesh()
    geom = cfg.build_geom()
    law = cfg.build_law()
    sig = cfg.build_signal(horizon)
    v0 = float(sig.v_inlet[0])
    fluid = FluidSolver(mesh, cfg.build_fluid_config(v0), geom, law)
    ccfg = cfg.build_coupling()

    state = initial_state(mesh, solid, v0, geom)
    # steady pre-relaxation at the first inlet value; not timed, not collected
    warm = CouplingDriver(fluid, solid, ccfg)
    for _ in range(int(cfg.prerelax_steps)):
        state, _ = warm.advance(state, v0, step=0)
        state.t = 0.0

    driver = CouplingDriver(fluid, solid, ccfg, collectors)
    n_levels = len(sig)
    A = np.empty((n_levels, mesh.n_cells))
    P = np.empty((n_levels, mesh.n_cells))
    n_sub = np.zeros(n_levels, dtype=np.int64)
    A[0], P[0] = state.a, state.p
    t0 = time.perf_counter()
    for k in range(1, n_levels):
        state, info = driver.advance(state, sig.v_inlet[k], step=k)
        state.t = float(sig.times[k])
        A[k], P[k] = state.a, state.p
        n_sub[k] = info.n_subiters
    wall = time.perf_counter() - t0

    res = RunResults(label, cfg.mu, sig.times.copy(), sig.v_inlet.copy(), P[:, 0].copy(),
                     A[:, 0].copy(), n_sub, A, P)
    timing = {
        "label": label,
        "solid": getattr(solid, "name", type(solid).__name__),
        "backend": _backend(),
        "cost_multiplier": int(cfg.cost_multiplier) if label.startswith("fom") else 1,
        "n_steps": n_levels - 1,
        "T_f": driver.t_fluid / max(driver.n_fluid, 1),
        "T_s": driver.t_solid / max(driver.n_solid, 1),
        "n_fluid": driver.n_fluid,
        "n_solid": driver.n_solid,
        "t_fluid_total": driver.t_fluid,
        "t_solid_total": driver.t_solid,
        "t_coupling_total": driver.t_coupling,
        "wall_time": wall,
        "wall_per_step": wall / max(n_levels - 1, 1),
        "mean_subiters": res.mean_subiters(),
        "iqn_fallbacks": driver.iqn.fallbacks,
    }
    return res, timing


def _backend():
    from ._accel import BACKEND
    return BACKEND


def run_fom_fom(cfg: RunConfig, horizon: float | None = None):
    """FOM-FOM run collecting force/displacement snapshots from every subiteration.

    Returns ``(results, F, U, timing)``. With ``cfg.out`` set, writes
    ``trace.csv``, ``snapshots/F.*``, ``snapshots/U.*``, ``timing.json`` and
    the resolved ``config.json`` there.
    """
    horizon = cfg.t_end if horizon is None else horizon
    n = cfg.build_mesh().n_cells
    F, U = SnapshotMatrix(n), SnapshotMatrix(n)

    def collect(p_iter, a_field, step, subiter):
        F.append(p_iter, step, subiter)
        U.append(a_field, step, subiter)

    res, timing = _simulate(cfg, cfg.build_fom_solid(), horizon, "fom-fom", [collect])
    timing["n_snapshots"] = F.n_cols
    if cfg.out:
        out = Path(cfg.out)
        res.write_trace(out / "trace.csv")
        F.save(out / "snapshots" / "F")
        U.save(out / "snapshots" / "U")
        _write_json(out / "timing.json", timing)
        _write_json(out / "config.json", cfg.to_dict())
    return res, F, U, timing


def run_rom_fom(cfg: RunConfig, model, horizon: float | None = None):
    """ROM-FOM run; same driver with the reduced operator as the solid.

    Returns ``(results, timing)``. With ``cfg.out`` set, writes ``trace.csv``,
    ``stress_strain.csv`` and ``timing.json``.
    """
    n = cfg.build_mesh().n_cells
    if model.basis_f.n_rows != n or model.basis_u.n_rows != n:
        raise PreconditionError(
            f"model was trained on {model.basis_f.n_rows}/{model.basis_u.n_rows} cells, mesh has {n}")
    horizon = cfg.rom["t_end"] if horizon is None else horizon
    res, timing = _simulate(cfg, model, horizon, "rom-fom")
    if cfg.out:
        out = Path(cfg.out)
        res.write_trace(out / "trace.csv")
        write_stress_strain(out / "stress_strain.csv", res, cfg.build_geom())
        _write_json(out / "timing.json", timing)
        _write_json(out / "config.json", cfg.to_dict())
    return res, timing


def train_from_snapshots(F, U, cfg: RunConfig | None = None):
    """Offline stage on snapshot matrices using the ``rom`` section of ``cfg``."""
    from .rom import train_rom

    rom = (cfg or RunConfig()).rom
    meta = {"mu_train": list(cfg.mu) if cfg else None, "t_train": cfg.t_end if cfg else None}
    return train_rom(F, U, r_f=rom["r_f"], r_u=rom["r_u"], energy=rom["energy"], kind=rom["kind"],
                     lam=float(rom["lam"]), degree=int(rom["degree"]), meta=meta)


def _write_json(path, obj):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=1, default=_json_default))
    return path


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


# --- stress-strain points ----------------------------------------------------------


def stress_strain_points(a_fields, p_fields, geom: GeomMaterial = GeomMaterial()):
    """``(eps, sigma)`` with ``eps = r/r0 - 1`` and hoop stress ``sigma = p r / h_wall``."""
    a = np.asarray(a_fields, dtype=np.float64)
    p = np.asarray(p_fields, dtype=np.float64)
    r = np.sqrt(a / math.pi)
    return strain_from_section(a, geom), p * r / geom.h_wall


def stress_law_error(eps, sigma, law: ConstitutiveLaw = ConstitutiveLaw(), floor: float | None = None):
    """Pointwise relative distance of ``(eps, sigma)`` points from the law.

    The denominator is ``max(|sigma_law(eps)|, floor)``; ``floor`` defaults to
    the stress at the kink, ``E1 * eps0``, so points near the origin are not
    divided by zero.
    """
    floor = law.E1 * law.eps0 if floor is None else float(floor)
    ref = hoop_stress(np.asarray(eps, dtype=np.float64), law)
    return np.abs(np.asarray(sigma) - ref) / np.maximum(np.abs(ref), floor)


def write_stress_strain(path, res: RunResults, geom: GeomMaterial):
    eps, sig = stress_strain_points(res.a_fields, res.p_fields, geom)
    n_lv, n_c = eps.shape
    t = np.repeat(res.times, n_c)
    cell = np.tile(np.arange(n_c), n_lv)
    return _write_csv(path, ["t", "cell", "eps", "sigma"],
                      zip(t, cell, eps.ravel(), sig.ravel()))


# --- accuracy and timing ---------------------------------------------------------


def relative_l2(t, approx, ref, t_lo, t_hi) -> float:
    """``||approx - ref|| / ||ref||`` over samples with ``t_lo <= t <= t_hi``."""
    t = np.asarray(t)
    m = (t >= t_lo - 1e-9) & (t <= t_hi + 1e-9)
    if not m.any():
        raise PreconditionError(f"no samples in [{t_lo}, {t_hi}]")
    ref = np.asarray(ref)[m]
    return float(np.linalg.norm(np.asarray(approx)[m] - ref) / np.linalg.norm(ref))


def trace_errors(fom: RunResults, rom: RunResults, t_train: float) -> dict:
    _check_aligned(fom.times, rom.times)
    t_end = float(fom.times[-1])
    out = {"train_window": [TRANSIENT, t_train],
           "err_train": relative_l2(fom.times, rom.p_inlet, fom.p_inlet, TRANSIENT, t_train)}
    if t_end > t_train:
        out["predict_window"] = [t_train, t_end]
        out["err_predict"] = relative_l2(fom.times, rom.p_inlet, fom.p_inlet, t_train, t_end)
    return out


def _check_aligned(t1, t2):
    if t1.shape != t2.shape or not np.allclose(t1, t2, rtol=0, atol=1e-9):
        raise AlignmentError("traces are not on the same time grid")


@dataclass
class TimingReport:
    T_f: float
    T_s: float
    sigma: float
    rho: float
    s_exact: float
    s_approx: float
    alpha: float
    s_alpha: float
    measured: float | None = None
    subiters_fom: float | None = None
    subiters_rom: float | None = None

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def speedup_report(T_f: float, T_s: float, sigma: float, measured: float | None = None,
                   subiters_fom: float | None = None, subiters_rom: float | None = None) -> TimingReport:
    """Ideal FOM-FOM over ROM-FOM speedup for solver costs ``T_f``, ``T_s`` and solid speedup ``sigma``.

    ``rho = T_s / T_f``; ``s_exact = (1 + rho) / (1 + rho / sigma)`` and the
    large-``T_s`` form ``s_approx = rho / (1 + rho / sigma)``. Writing
    ``sigma = alpha * rho`` gives ``s_alpha = (1 - 1 / (1 + alpha)) * rho``,
    identical to ``s_approx``.
    """
    for name, v in (("T_f", T_f), ("T_s", T_s), ("sigma", sigma)):
        if not (v > 0 and math.isfinite(v)):
            raise PreconditionError(f"{name} must be positive and finite, got {v}")
    rho = T_s / T_f
    alpha = sigma / rho
    return TimingReport(
        T_f=T_f, T_s=T_s, sigma=sigma, rho=rho,
        s_exact=(1.0 + rho) / (1.0 + rho / sigma),
        s_approx=rho / (1.0 + rho / sigma),
        alpha=alpha,
        s_alpha=(1.0 - 1.0 / (1.0 + alpha)) * rho,
        measured=measured, subiters_fom=subiters_fom, subiters_rom=subiters_rom,
    )


def report_from_timings(fom: dict, rom: dict) -> TimingReport:
    """Speedup report from the ``timing.json`` contents of a FOM-FOM and a ROM-FOM run.

    ``T_f`` pools the fluid calls of both runs; the measured speedup is the
    ratio of wall time per time step.
    """
    n_f = fom["n_fluid"] + rom["n_fluid"]
    T_f = (fom["t_fluid_total"] + rom["t_fluid_total"]) / n_f
    return speedup_report(T_f, fom["T_s"], fom["T_s"] / rom["T_s"],
                          measured=fom["wall_per_step"] / rom["wall_per_step"],
                          subiters_fom=fom["mean_subiters"], subiters_rom=rom["mean_subiters"])


def calibrate_cost_multiplier(cfg: RunConfig, target_ratio: float = 20.0, n_probe: int = 200) -> int:
    """Solid cost multiplier giving roughly ``T_s / T_f = target_ratio`` on this machine."""
    mesh = cfg.build_mesh()
    geom, law = cfg.build_geom(), cfg.build_law()
    sig = cfg.build_signal(cfg.build_fluid_config(0.0).dt * 2)
    v0 = float(sig.v_inlet[0])
    fluid = FluidSolver(mesh, cfg.build_fluid_config(v0), geom, law)
    solid = FomSolid(geom, law, 1)
    st = initial_state(mesh, solid, v0, geom)
    p = np.linspace(-5.0, 5.0, mesh.n_cells)
    a = solid(p)

    def clock(fn):
        fn()
        best = math.inf
        for _ in range(3):
            t0 = time.perf_counter()
            for _ in range(n_probe):
                fn()
            best = min(best, (time.perf_counter() - t0) / n_probe)
        return best

    T_f = clock(lambda: fluid.step(st, a, sig.v_inlet[1]))
    T_s1 = clock(lambda: solid(p))
    return max(1, int(math.ceil(target_ratio * T_f / T_s1)))


# --- figure data -------------------------------------------------------------------


def _mu_tag(mu) -> str:
    return "mu_" + "_".join(f"{x:g}" for x in mu)


def emit_figure_data(out_dir, fom_runs, rom_runs, F=None, U=None, report: TimingReport | None = None,
                     geom: GeomMaterial = GeomMaterial(), law: ConstitutiveLaw = ConstitutiveLaw(),
                     extra_timing: dict | None = None):
    """Write the CSV/JSON files behind the figures.

    ``fom_runs`` and ``rom_runs`` are lists of :class:`RunResults` paired by
    ``mu``. ``F``/``U`` are the training snapshots (optional). Returns the
    written paths.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = {}
    fom_by_mu = {tuple(r.mu): r for r in fom_runs}
    rom_by_mu = {tuple(r.mu): r for r in rom_runs}

    # inlet velocity for every mu on one grid
    runs = list(fom_by_mu.values()) or list(rom_by_mu.values())
    if runs:
        t = runs[0].times
        for r in runs[1:]:
            _check_aligned(t, r.times)
        header = ["t"] + [f"v_inlet_{_mu_tag(r.mu)}" for r in runs]
        written["inlet_velocity"] = _write_csv(
            out / "inlet_velocity.csv", header, zip(t, *[r.v_inlet for r in runs]))

    pairs = [(mu, fom_by_mu[mu], rom_by_mu[mu]) for mu in fom_by_mu if mu in rom_by_mu]
    if pairs:
        t = pairs[0][1].times
        cols, header = [], ["t"]
        for mu, f, r in pairs:
            _check_aligned(t, f.times)
            _check_aligned(t, r.times)
            header += [f"p_fom_{_mu_tag(mu)}", f"p_rom_{_mu_tag(mu)}"]
            cols += [f.p_inlet, r.p_inlet]
        written["inlet_pressure_overlay"] = _write_csv(out / "inlet_pressure_overlay.csv", header,
                                                       zip(t, *cols))

    # law curve, training points, ROM reconstruction
    rows = []
    eps_curve = np.union1d(np.linspace(-0.1, 0.1, 401), [-law.eps0, law.eps0])
    rows += [("law", e, s) for e, s in zip(eps_curve, hoop_stress(eps_curve, law))]
    if F is not None and U is not None:
        Fm = F.to_array() if isinstance(F, SnapshotMatrix) else np.asarray(F)
        Um = U.to_array() if isinstance(U, SnapshotMatrix) else np.asarray(U)
        e, s = stress_strain_points(Um, Fm, geom)
        rows += [("training", a, b) for a, b in zip(e.ravel(), s.ravel())]
    for r in rom_runs:
        e, s = stress_strain_points(r.a_fields, r.p_fields, geom)
        tag = f"rom_{_mu_tag(r.mu)}"
        rows += [(tag, a, b) for a, b in zip(e.ravel(), s.ravel())]
    written["stress_strain"] = _write_csv(out / "stress_strain.csv", ["source", "eps", "sigma"], rows)

    timing = dict(extra_timing or {})
    if report is not None:
        timing["report"] = report.as_dict()
    written["timing"] = _write_json(out / "timing.json", timing)
    return written
