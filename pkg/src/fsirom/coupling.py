"""Dirichlet-Neumann coupling with IQN-ILS acceleration.

The iterate is the interface pressure field. Per subiteration the solid maps
pressure to section, the fluid maps section back to pressure, and the
quasi-Newton update picks the next pressure from a least-squares model of
the inverse residual Jacobian built from difference columns.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from ._accel import njit, pick
from .errors import ConfigError, StepFailure
from .mesh import TubeState

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class CouplingConfig:
    tol_rel: float = 1e-6
    max_subiters: int = 50
    omega: float = 0.1
    filter_eps: float = 1e-8
    history_steps: int = 0
    max_columns: int = 20
    collect: str = "all"  # "all" subiterations or "converged" only

    def __post_init__(self):
        if not self.tol_rel > 0:
            raise ConfigError(f"tol_rel must be positive, got {self.tol_rel}")
        if not 0 < self.omega <= 1:
            raise ConfigError(f"omega must lie in (0, 1], got {self.omega}")
        if int(self.max_subiters) < 2:
            raise ConfigError("max_subiters must be >= 2")
        if self.history_steps < 0 or self.max_columns < 1:
            raise ConfigError("history_steps must be >= 0 and max_columns >= 1")
        if self.collect not in ("all", "converged"):
            raise ConfigError(f"collect must be 'all' or 'converged', got {self.collect!r}")


@dataclass
class IqnState:
    """Difference columns, newest first. ``V`` holds residual differences, ``W`` output differences."""

    V: list = field(default_factory=list)
    W: list = field(default_factory=list)
    prev_residual: np.ndarray | None = None
    prev_output: np.ndarray | None = None
    # columns from earlier time steps, newest step first
    old_V: list = field(default_factory=list)
    old_W: list = field(default_factory=list)
    fallbacks: int = 0

    def reset_step(self, history_steps: int):
        """Close the current time step; keep its columns only if history is reused."""
        if history_steps > 0 and self.V:
            self.old_V.insert(0, list(self.V))
            self.old_W.insert(0, list(self.W))
        del self.old_V[history_steps:]
        del self.old_W[history_steps:]
        self.V, self.W = [], []
        self.prev_residual = None
        self.prev_output = None

    def columns(self):
        V = list(self.V)
        W = list(self.W)
        for v_blk, w_blk in zip(self.old_V, self.old_W):
            V.extend(v_blk)
            W.extend(w_blk)
        return V, W


# --- small dense kernels ---------------------------------------------------
#
# The least-squares systems are tall and thin (interface size x at most a few
# tens of columns); at this size the LAPACK call overhead dominates, so the
# factorization is a hand-written Householder QR.


@njit
def _thin_qr_numba(A):
    m, n = A.shape
    R = A.copy()
    vs = np.zeros((m, n))
    for j in range(n):
        normx = 0.0
        for i in range(j, m):
            normx += R[i, j] * R[i, j]
        normx = math.sqrt(normx)
        if normx == 0.0:
            continue
        alpha = -normx if R[j, j] >= 0.0 else normx
        vn = 0.0
        for i in range(j, m):
            vs[i, j] = R[i, j]
        vs[j, j] -= alpha
        for i in range(j, m):
            vn += vs[i, j] * vs[i, j]
        vn = math.sqrt(vn)
        for i in range(j, m):
            vs[i, j] /= vn
        for k in range(j, n):
            s = 0.0
            for i in range(j, m):
                s += vs[i, j] * R[i, k]
            for i in range(j, m):
                R[i, k] -= 2.0 * s * vs[i, j]
    Q = np.zeros((m, n))
    for i in range(n):
        Q[i, i] = 1.0
    for j in range(n - 1, -1, -1):
        for k in range(n):
            s = 0.0
            for i in range(j, m):
                s += vs[i, j] * Q[i, k]
            for i in range(j, m):
                Q[i, k] -= 2.0 * s * vs[i, j]
    Rt = np.zeros((n, n))
    for i in range(n):
        for k in range(i, n):
            Rt[i, k] = R[i, k]
    return Q, Rt


def _thin_qr_numpy(A):
    return np.linalg.qr(A, mode="reduced")


@njit
def _back_substitute_numba(R, b):
    n = R.shape[0]
    x = np.empty(n)
    for i in range(n - 1, -1, -1):
        s = b[i]
        for k in range(i + 1, n):
            s -= R[i, k] * x[k]
        x[i] = s / R[i, i]
    return x


def _back_substitute_numpy(R, b):
    from scipy.linalg import solve_triangular
    return solve_triangular(R, b, check_finite=False)


thin_qr = pick(_thin_qr_numba, _thin_qr_numpy)
back_substitute = pick(_back_substitute_numba, _back_substitute_numpy)


def _filtered_qr(V, W, filter_eps):
    while V.shape[1] > 0:
        Q, R = thin_qr(V)
        thresh = filter_eps * np.linalg.norm(V)
        d = np.abs(np.diag(R))
        # exact zeros are dependent even when the whole matrix vanishes
        small = np.nonzero((d < thresh) | (d == 0.0))[0]
        if small.size == 0:
            return V, W, Q, R
        j = small[0]
        V = np.delete(V, j, axis=1)
        W = np.delete(W, j, axis=1)
    return V, W, None, None


def qr_filter(V, W, filter_eps: float):
    """Drop nearly dependent columns of ``V`` (and the matching ``W`` columns).

    ``V`` and ``W`` are ``(n, k)`` arrays. Columns are tested in the given
    order; the first column with ``|R_jj| < filter_eps * ||V||_F`` is removed
    and the factorization redone until nothing is dropped.
    """
    V = np.ascontiguousarray(V, dtype=np.float64)
    W = np.ascontiguousarray(W, dtype=np.float64)
    if V.shape[1] != W.shape[1]:
        raise ConfigError(f"V has {V.shape[1]} columns, W has {W.shape[1]}")
    V, W, _, _ = _filtered_qr(V, W, filter_eps)
    return V, W


def iqn_ils_update(state: IqnState, x_in, residual, output, cfg: CouplingConfig):
    """Next input from the current ``(input, residual, output)`` triple.

    Returns ``(next_input, state)``; ``state`` is updated in place.
    """
    x_in = np.asarray(x_in, dtype=np.float64)
    residual = np.asarray(residual, dtype=np.float64)
    output = np.asarray(output, dtype=np.float64)
    if state.prev_residual is not None:
        state.V.insert(0, residual - state.prev_residual)
        state.W.insert(0, output - state.prev_output)
        cap = min(cfg.max_columns, residual.shape[0])
        del state.V[cap:]
        del state.W[cap:]
    state.prev_residual = residual.copy()
    state.prev_output = output.copy()

    V_cols, W_cols = state.columns()
    if not V_cols:
        return x_in + cfg.omega * residual, state
    cap = min(cfg.max_columns, residual.shape[0])
    V = np.column_stack(V_cols[:cap])
    W = np.column_stack(W_cols[:cap])
    V, W, Q, R = _filtered_qr(V, W, cfg.filter_eps)
    if Q is None:
        state.fallbacks += 1
        log.warning("IQN-ILS: filtering removed every column, using constant relaxation")
        return x_in + cfg.omega * residual, state
    alpha = back_substitute(R, -(Q.T @ residual))
    # one refinement sweep recovers digits lost to a poorly conditioned V
    alpha += back_substitute(R, -(Q.T @ (residual + V @ alpha)))
    return output + W @ alpha, state


def fsi_fixed_point_residual(p_iter, solid, fluid):
    """One Dirichlet-Neumann pass: ``a = solid(p)``, ``p~ = fluid(a)``, ``r = p~ - p``.

    ``fluid`` is a closure ``a -> (p_tilde, payload)``; the payload (usually
    the new fluid state) is returned unchanged as the fourth element.
    """
    a_field = solid(p_iter)
    p_tilde, payload = fluid(a_field)
    return p_tilde - p_iter, p_tilde, a_field, payload


def rms(x) -> float:
    x = np.asarray(x)
    return float(np.linalg.norm(x) / math.sqrt(x.shape[0]))


@dataclass
class StepInfo:
    step: int
    n_subiters: int
    residual_history: list
    converged: bool = True


class CouplingDriver:
    """Time-step loop body shared by FOM-FOM and ROM-FOM runs.

    ``solid`` is any callable ``pressure field -> section field``; the driver
    does not care whether it is the full-order or the reduced operator.
    Collectors are called as ``collector(p_iter, a_field, step, subiter)``.
    """

    def __init__(self, fluid_solver, solid, cfg: CouplingConfig = CouplingConfig(), collectors=()):
        self.fluid = fluid_solver
        self.solid = solid
        self.cfg = cfg
        self.collectors = list(collectors)
        self.iqn = IqnState()
        self.t_fluid = 0.0
        self.n_fluid = 0
        self.t_solid = 0.0
        self.n_solid = 0
        self.t_coupling = 0.0

    def _timed_solid(self, p):
        t0 = time.perf_counter()
        a = self.solid(p)
        self.t_solid += time.perf_counter() - t0
        self.n_solid += 1
        return a

    def advance(self, state_old: TubeState, v_in: float, step: int = 0):
        """Converge one time step. Returns ``(state_new, StepInfo)``."""
        cfg = self.cfg
        t_start = time.perf_counter()

        def fluid(a_field):
            t0 = time.perf_counter()
            st = self.fluid.step(state_old, a_field, v_in)
            self.t_fluid += time.perf_counter() - t0
            self.n_fluid += 1
            return st.p, st

        p_iter = state_old.p.copy()
        history = []
        pending = []
        for k in range(cfg.max_subiters):
            r, p_tilde, a_field, st = fsi_fixed_point_residual(p_iter, self._timed_solid, fluid)
            if cfg.collect == "all":
                for c in self.collectors:
                    c(p_iter, a_field, step, k)
            else:
                pending = [(p_iter, a_field, k)]
            res = rms(r)
            history.append(res)
            if res <= cfg.tol_rel * max(1.0, rms(p_tilde)):
                for p_c, a_c, k_c in pending:
                    for c in self.collectors:
                        c(p_c, a_c, step, k_c)
                self.iqn.reset_step(cfg.history_steps)
                self.t_coupling += time.perf_counter() - t_start
                return st, StepInfo(step, k + 1, history)
            p_iter, _ = iqn_ils_update(self.iqn, p_iter, r, p_tilde, cfg)
        self.iqn.reset_step(0)
        self.t_coupling += time.perf_counter() - t_start
        raise StepFailure(
            f"step {step}: coupling did not converge in {cfg.max_subiters} subiterations "
            f"(last residual {history[-1]:.3e})", step=step, residual_history=history)


def advance_time_step(state_old, v_in, solid, fluid_solver, cfg: CouplingConfig = CouplingConfig(),
                      collectors=(), step: int = 0):
    """Single-step convenience wrapper returning ``(state_new, n_subiters)``."""
    driver = CouplingDriver(fluid_solver, solid, cfg, collectors)
    state, info = driver.advance(state_old, v_in, step)
    return state, info.n_subiters
