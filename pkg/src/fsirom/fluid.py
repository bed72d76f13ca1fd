"""1D finite-volume flow in a flexible tube with a frozen cross-section.

Mass and momentum

    d_t a + d_x(a v) = 0
    d_t(a v) + d_x(a v^2) + (a / rho) d_x p = 0

are discretized with backward Euler in time and central fluxes on a
collocated grid. A pressure-Laplacian term in the mass equation suppresses
odd-even decoupling. Unknowns are ordered ``[v0, p0, v1, p1, ...]`` and the
residual rows ``[mass0, mom0, mass1, mom1, ...]``; every row touches at most
three unknowns on either side, so the Jacobian is banded with ``l = u = 3``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.linalg import solve_banded

from ._accel import njit, pick
from .errors import ConfigError, DimensionError, PreconditionError, SolverFailure
from .mesh import Mesh1D, TubeState
from .solid import ConstitutiveLaw, GeomMaterial, pressure_tangent, section_from_pressure

BAND = 3
N_COLORS = 2 * BAND + 1
MAX_HALVINGS = 8


@dataclass(frozen=True)
class FluidConfig:
    rho: float = 1.0
    dt: float = 0.1
    stab_coeff: float | None = None  # None -> 0.5 * dt / (rho * dx)
    newton_tol: float = 1e-12
    newton_max_iters: int = 25
    p_ref: float = 0.0
    v_ref: float = 0.0

    def __post_init__(self):
        if not self.rho > 0:
            raise ConfigError(f"rho must be positive, got {self.rho}")
        if not self.dt > 0:
            raise ConfigError(f"dt must be positive, got {self.dt}")
        if not 0 < self.newton_tol <= 1e-2:
            raise ConfigError(f"newton_tol must lie in (0, 1e-2], got {self.newton_tol}")
        if self.stab_coeff is not None and self.stab_coeff < 0:
            raise ConfigError(f"stab_coeff must be >= 0, got {self.stab_coeff}")
        if int(self.newton_max_iters) < 1:
            raise ConfigError("newton_max_iters must be >= 1")

    def stabilization(self, dx: float) -> float:
        if self.stab_coeff is None:
            return 0.5 * self.dt / (self.rho * dx)
        return float(self.stab_coeff)


def wave_speed(a, cfg: FluidConfig, geom: GeomMaterial = GeomMaterial(),
               law: ConstitutiveLaw = ConstitutiveLaw()) -> float:
    """Tube wave speed ``sqrt(a dp/da / rho)`` from the tangent of the wall law."""
    slope = pressure_tangent(float(a), geom, law)
    if not slope > 0:
        raise ConfigError(f"non-positive tangent dp/da={slope:g} at a={a:g}: wall law not invertible")
    return math.sqrt(float(a) * slope / cfg.rho)


def outlet_pressure(state: TubeState, cfg: FluidConfig, geom: GeomMaterial = GeomMaterial(),
                    law: ConstitutiveLaw = ConstitutiveLaw()) -> float:
    """Non-reflecting outlet: ``p_ref + rho c (v_last - v_ref)``.

    ``c`` is the wave speed linearized about the reference equilibrium
    ``(p_ref, v_ref)``; freezing it keeps the fluid operator continuous in
    the section field when the last cell crosses a kink of the wall law.
    """
    if not (math.isfinite(state.a[-1]) and math.isfinite(state.v[-1])):
        raise PreconditionError("last-cell state must be finite")
    c = wave_speed(section_from_pressure(cfg.p_ref, geom, law), cfg, geom, law)
    return cfg.p_ref + cfg.rho * c * (state.v[-1] - cfg.v_ref)


# --- residual kernels -------------------------------------------------------
# prm = [dx, dt, rho, stab, p_ref, v_ref, c_out, v_in]


@njit
def _residual_numba(x, a, a_old, q_old, prm, out):
    n = a.shape[0]
    dx, dt, rho, stab = prm[0], prm[1], prm[2], prm[3]
    p_ref, v_ref, c_out, v_in = prm[4], prm[5], prm[6], prm[7]
    # fluxes through face j (between cells j-1 and j)
    fm_prev = 0.0
    fq_prev = 0.0
    pf_prev = 0.0
    st_prev = 0.0
    for j in range(n + 1):
        if j == 0:
            af = 1.5 * a[0] - 0.5 * a[1]
            fm = af * v_in
            fq = af * v_in * v_in
            pf = 1.5 * x[1] - 0.5 * x[3]
            st = 0.0
        elif j == n:
            vl = x[2 * n - 2]
            vm = x[2 * n - 4]
            fm = 1.5 * a[n - 1] * vl - 0.5 * a[n - 2] * vm
            fq = 1.5 * a[n - 1] * vl * vl - 0.5 * a[n - 2] * vm * vm
            pf = p_ref + rho * c_out * (vl - v_ref)
            st = 0.0
        else:
            vl = x[2 * j - 2]
            vr = x[2 * j]
            fm = 0.5 * (a[j - 1] * vl + a[j] * vr)
            fq = 0.5 * (a[j - 1] * vl * vl + a[j] * vr * vr)
            pf = 0.5 * (x[2 * j - 1] + x[2 * j + 1])
            st = stab * (x[2 * j + 1] - x[2 * j - 1])
        if j > 0:
            i = j - 1
            out[2 * i] = ((a[i] - a_old[i]) / dt + (fm - fm_prev) / dx
                          - (st - st_prev) / dx)
            out[2 * i + 1] = ((a[i] * x[2 * i] - q_old[i]) / dt + (fq - fq_prev) / dx
                              + a[i] / rho * (pf - pf_prev) / dx)
        fm_prev = fm
        fq_prev = fq
        pf_prev = pf
        st_prev = st


def _residual_numpy(x, a, a_old, q_old, prm, out):
    dx, dt, rho, stab, p_ref, v_ref, c_out, v_in = (float(t) for t in prm)
    v = x[0::2]
    p = x[1::2]
    av = a * v
    avv = av * v
    n = a.shape[0]
    fm = np.empty(n + 1)
    fq = np.empty(n + 1)
    pf = np.empty(n + 1)
    st = np.zeros(n + 1)
    af0 = 1.5 * a[0] - 0.5 * a[1]
    fm[0] = af0 * v_in
    fq[0] = af0 * v_in * v_in
    pf[0] = 1.5 * p[0] - 0.5 * p[1]
    fm[1:n] = 0.5 * (av[:-1] + av[1:])
    fq[1:n] = 0.5 * (avv[:-1] + avv[1:])
    pf[1:n] = 0.5 * (p[:-1] + p[1:])
    st[1:n] = stab * (p[1:] - p[:-1])
    fm[n] = 1.5 * av[-1] - 0.5 * av[-2]
    fq[n] = 1.5 * avv[-1] - 0.5 * avv[-2]
    pf[n] = p_ref + rho * c_out * (v[-1] - v_ref)
    out[0::2] = (a - a_old) / dt + np.diff(fm) / dx - np.diff(st) / dx
    out[1::2] = (av - q_old) / dt + np.diff(fq) / dx + a / rho * np.diff(pf) / dx


@njit
def _jacobian_numba(x, a, a_old, q_old, prm, ab):
    """Central-difference banded Jacobian using 7 column colours."""
    m = x.shape[0]
    rp = np.empty(m)
    rm = np.empty(m)
    xp = x.copy()
    for c in range(N_COLORS):
        for k in range(c, m, N_COLORS):
            hk = 1e-3 * max(1.0, abs(x[k]))
            xp[k] = x[k] + hk
        _residual_numba(xp, a, a_old, q_old, prm, rp)
        for k in range(c, m, N_COLORS):
            hk = 1e-3 * max(1.0, abs(x[k]))
            xp[k] = x[k] - hk
        _residual_numba(xp, a, a_old, q_old, prm, rm)
        for k in range(c, m, N_COLORS):
            hk = 1e-3 * max(1.0, abs(x[k]))
            xp[k] = x[k]
            lo = max(0, k - BAND)
            hi = min(m, k + BAND + 1)
            for r in range(lo, hi):
                ab[BAND + r - k, k] = (rp[r] - rm[r]) / (2.0 * hk)


def _jacobian_numpy(x, a, a_old, q_old, prm, ab):
    m = x.shape[0]
    rp = np.empty(m)
    rm = np.empty(m)
    h = 1e-3 * np.maximum(1.0, np.abs(x))
    cols = np.arange(m)
    for c in range(N_COLORS):
        ks = cols[c::N_COLORS]
        xp = x.copy()
        xp[ks] += h[ks]
        _residual_numpy(xp, a, a_old, q_old, prm, rp)
        xp[ks] = x[ks] - h[ks]
        _residual_numpy(xp, a, a_old, q_old, prm, rm)
        d = (rp - rm)
        for off in range(-BAND, BAND + 1):
            rows = ks + off
            ok = (rows >= 0) & (rows < m)
            ab[BAND + off, ks[ok]] = d[rows[ok]] / (2.0 * h[ks[ok]])


_residual = pick(_residual_numba, _residual_numpy)
_jacobian = pick(_jacobian_numba, _jacobian_numpy)


class FluidSolver:
    """Fluid operator: frozen section field -> velocity and pressure at the new time level."""

    def __init__(self, mesh: Mesh1D, cfg: FluidConfig = FluidConfig(),
                 geom: GeomMaterial = GeomMaterial(), law: ConstitutiveLaw = ConstitutiveLaw()):
        self.mesh = mesh
        self.a_ref = section_from_pressure(cfg.p_ref, geom, law)
        self.cfg = cfg
        self.geom = geom
        self.law = law
        self.stab = cfg.stabilization(mesh.dx)
        self.c_out = wave_speed(self.a_ref, cfg, geom, law)
        self.last_newton_iters = 0
        self.last_residual_norm = 0.0

    def with_reference(self, p_ref: float, v_ref: float) -> "FluidSolver":
        return FluidSolver(self.mesh, replace(self.cfg, p_ref=float(p_ref), v_ref=float(v_ref)),
                           self.geom, self.law)

    def _params(self, a_given, v_in):
        c_out = self.c_out
        return np.array([self.mesh.dx, self.cfg.dt, self.cfg.rho, self.stab,
                         self.cfg.p_ref, self.cfg.v_ref, c_out, float(v_in)])

    def _check(self, state_old: TubeState, a_given):
        if state_old.n_cells != self.mesh.n_cells:
            raise DimensionError(f"state has {state_old.n_cells} cells, mesh has {self.mesh.n_cells}")
        a = self.mesh.check_field(a_given, "a_given")
        if np.any(a <= 0):
            raise PreconditionError("a_given must be positive in every cell")
        return a

    def residual(self, state_new: TubeState, state_old: TubeState, a_given, v_in):
        """Per-cell ``(mass, momentum)`` residuals of ``state_new`` with ``a_given`` frozen."""
        a = self._check(state_old, a_given)
        if state_new.n_cells != self.mesh.n_cells:
            raise DimensionError(f"state has {state_new.n_cells} cells, mesh has {self.mesh.n_cells}")
        x = _interleave(state_new.v, state_new.p)
        out = np.empty_like(x)
        _residual(x, a, state_old.a, state_old.a * state_old.v, self._params(a, v_in), out)
        return out[0::2].copy(), out[1::2].copy()

    def step(self, state_old: TubeState, a_given, v_in) -> TubeState:
        """Solve for ``(v, p)`` at ``t + dt`` by damped Newton."""
        a = self._check(state_old, a_given)
        prm = self._params(a, v_in)
        q_old = state_old.a * state_old.v
        a_old = state_old.a
        x = _interleave(state_old.v, state_old.p)
        m = x.shape[0]
        r = np.empty(m)
        r_try = np.empty(m)
        ab = np.zeros((2 * BAND + 1, m))
        _residual(x, a, a_old, q_old, prm, r)
        norm = np.max(np.abs(r))
        merit = np.dot(r, r)
        scale = self._residual_scale(x, a, v_in)
        tol = self.cfg.newton_tol * scale
        it = 0
        while norm > tol:
            if it >= self.cfg.newton_max_iters:
                raise SolverFailure(
                    f"fluid Newton did not converge in {it} iterations (|R|={norm:.3e})", norm)
            _jacobian(x, a, a_old, q_old, prm, ab)
            dxs = solve_banded((BAND, BAND), ab, -r, check_finite=False)
            # step halving on the 2-norm merit; the max-norm only decides convergence
            lam = 1.0
            for _ in range(MAX_HALVINGS + 1):
                x_try = x + lam * dxs
                _residual(x_try, a, a_old, q_old, prm, r_try)
                merit_try = np.dot(r_try, r_try)
                if merit_try < merit:
                    break
                lam *= 0.5
            it += 1
            descent = merit_try < merit
            if descent:
                x = x_try
                r, r_try = r_try, r
                merit = merit_try
                norm = np.max(np.abs(r))
            tiny_step = np.max(np.abs(dxs)) <= 1e-13 * (1.0 + np.max(np.abs(x)))
            if tiny_step or not descent:
                # roundoff floor of the residual evaluation
                if norm <= math.sqrt(self.cfg.newton_tol) * scale:
                    break
                if not descent:
                    raise SolverFailure(f"fluid Newton stalled at |R|={norm:.3e}", norm)
        self.last_newton_iters = it
        self.last_residual_norm = norm
        return TubeState(a.copy(), x[0::2].copy(), x[1::2].copy(), state_old.t + self.cfg.dt)

    def _residual_scale(self, x, a, v_in) -> float:
        """Magnitude of the individual terms entering the residual rows."""
        a_max = np.max(np.abs(a))
        v_max = max(np.max(np.abs(x[0::2])), abs(float(v_in)))
        p_max = np.max(np.abs(x[1::2]))
        dx, dt, rho = self.mesh.dx, self.cfg.dt, self.cfg.rho
        return 1.0 + a_max * (1.0 + v_max) / dt + a_max * (v_max + v_max ** 2 + p_max / rho) / dx

    def outlet_pressure(self, state: TubeState) -> float:
        return outlet_pressure(state, self.cfg, self.geom, self.law)

    def mass_balance_defect(self, state_new: TubeState, state_old: TubeState, v_in) -> float:
        """``sum (a - a_old)/dt dx - (flux_in - flux_out)`` for a converged step."""
        dx = self.mesh.dx
        a = state_new.a
        storage = np.sum((a - state_old.a) / self.cfg.dt) * dx
        flux_in = (1.5 * a[0] - 0.5 * a[1]) * float(v_in)
        flux_out = 1.5 * a[-1] * state_new.v[-1] - 0.5 * a[-2] * state_new.v[-2]
        return storage - (flux_in - flux_out)


def _interleave(v, p):
    x = np.empty(2 * v.shape[0])
    x[0::2] = v
    x[1::2] = p
    return x


def fluid_residual(state_new, state_old, a_given, v_in, cfg: FluidConfig,
                   geom: GeomMaterial = GeomMaterial(), law: ConstitutiveLaw = ConstitutiveLaw(),
                   length: float = 10.0):
    mesh = Mesh1D(length, state_old.n_cells)
    return FluidSolver(mesh, cfg, geom, law).residual(state_new, state_old, a_given, v_in)


def fluid_step(state_old, a_given, v_in, cfg: FluidConfig, geom: GeomMaterial = GeomMaterial(),
               law: ConstitutiveLaw = ConstitutiveLaw(), length: float = 10.0) -> TubeState:
    mesh = Mesh1D(length, state_old.n_cells)
    return FluidSolver(mesh, cfg, geom, law).step(state_old, a_given, v_in)
