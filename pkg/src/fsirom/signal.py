"""Inlet velocity from a forced Duffing oscillator.

    u'' = a u + b u^2 + c u^3 + d + p_amp cos(f t) + e u',   u(0) = 10, u'(0) = 0
    v_inlet = g u + h
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from ._accel import njit, pick
from .errors import IntegrationBlowup, PreconditionError

SUBSTEPS = 20


@dataclass(frozen=True)
class DuffingParams:
    f: float = 2.0
    h: float = 6.0
    a: float = -1.0
    b: float = 0.0
    c: float = -0.002
    d: float = -1.0
    e: float = -0.02
    g: float = 1.0 / 60.0
    p_amp: float = 360.0
    u0: float = 10.0
    du0: float = 0.0
    T: float = 120.0

    def __post_init__(self):
        if not self.T > 0:
            raise PreconditionError(f"horizon T must be positive, got {self.T}")

    @classmethod
    def from_mu(cls, mu, **kw) -> "DuffingParams":
        """Build from the parameter vector ``mu = (f, h)``."""
        f, h = mu
        return cls(f=float(f), h=float(h), **kw)

    def coeffs(self) -> np.ndarray:
        return np.array([self.a, self.b, self.c, self.d, self.e, self.p_amp, self.f])

    def with_horizon(self, T) -> "DuffingParams":
        return replace(self, T=float(T))


@dataclass
class SignalSeries:
    times: np.ndarray
    u: np.ndarray
    v_inlet: np.ndarray

    def __len__(self):
        return self.times.shape[0]

    def at_step(self, n: int) -> float:
        return float(self.v_inlet[n])

    def to_csv(self, path):
        write_signal_csv(path, self)


def duffing_rhs(state, t, params: DuffingParams):
    """Return ``(u', u'')`` for state ``(u, u')`` at time ``t``."""
    u, du = state
    ddu = (params.a * u + params.b * u * u + params.c * u ** 3 + params.d
           + params.p_amp * math.cos(params.f * t) + params.e * du)
    return du, ddu


@njit
def _rhs_nb(u, du, t, k):
    return (k[0] * u + k[1] * u * u + k[2] * u * u * u + k[3]
            + k[5] * math.cos(k[6] * t) + k[4] * du)


@njit
def _rk4_numba(u0, du0, k, h, n_out, n_sub):
    us = np.empty(n_out + 1)
    us[0] = u0
    u, du, t = u0, du0, 0.0
    for i in range(n_out):
        for j in range(n_sub):
            t = (i * n_sub + j) * h
            k1u, k1v = du, _rhs_nb(u, du, t, k)
            k2u = du + 0.5 * h * k1v
            k2v = _rhs_nb(u + 0.5 * h * k1u, k2u, t + 0.5 * h, k)
            k3u = du + 0.5 * h * k2v
            k3v = _rhs_nb(u + 0.5 * h * k2u, k3u, t + 0.5 * h, k)
            k4u = du + h * k3v
            k4v = _rhs_nb(u + h * k3u, k4u, t + h, k)
            u = u + h / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u)
            du = du + h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
            if not (math.isfinite(u) and math.isfinite(du)):
                us[i + 1:] = np.nan
                return us, (i * n_sub + j + 1) * h
        us[i + 1] = u
    return us, -1.0


def _rk4_python(u0, du0, k, h, n_out, n_sub):
    a, b, c, d, e, p_amp, f = (float(x) for x in k)

    def acc(u, du, t):
        return a * u + b * u * u + c * u * u * u + d + p_amp * math.cos(f * t) + e * du

    us = np.empty(n_out + 1)
    us[0] = u0
    u, du = float(u0), float(du0)
    for i in range(n_out):
        for j in range(n_sub):
            t = (i * n_sub + j) * h
            k1u, k1v = du, acc(u, du, t)
            k2u = du + 0.5 * h * k1v
            k2v = acc(u + 0.5 * h * k1u, k2u, t + 0.5 * h)
            k3u = du + 0.5 * h * k2v
            k3v = acc(u + 0.5 * h * k2u, k3u, t + 0.5 * h)
            k4u = du + h * k3v
            k4v = acc(u + h * k3u, k4u, t + h)
            u = u + h / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u)
            du = du + h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
            if not (math.isfinite(u) and math.isfinite(du)):
                us[i + 1:] = np.nan
                return us, (i * n_sub + j + 1) * h
        us[i + 1] = u
    return us, -1.0


_rk4 = pick(_rk4_numba, _rk4_python)


def integrate_signal(params: DuffingParams, dt_out: float, substeps: int = SUBSTEPS) -> SignalSeries:
    """Fixed-step RK4 with ``substeps`` internal steps per output interval."""
    if not dt_out > 0:
        raise PreconditionError(f"dt_out must be positive, got {dt_out}")
    n_out = int(round(params.T / dt_out))
    if n_out < 1 or abs(n_out * dt_out - params.T) > 1e-9 * max(1.0, params.T):
        raise PreconditionError(f"dt_out={dt_out} does not divide T={params.T}")
    h = dt_out / substeps
    u, t_fail = _rk4(float(params.u0), float(params.du0), params.coeffs(), h, n_out, int(substeps))
    if t_fail >= 0:
        raise IntegrationBlowup(f"Duffing state became non-finite at t={t_fail:.6g}", t_fail)
    times = np.arange(n_out + 1) * dt_out
    return SignalSeries(times, u, params.g * u + params.h)


def write_signal_csv(path, series: SignalSeries):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "u", "v_inlet"])
        for row in zip(series.times, series.u, series.v_inlet):
            w.writerow([f"{x:.17g}" for x in row])
