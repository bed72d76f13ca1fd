"""Quasi-static thin-wall tube: pressure -> cross-section.

Each cell is in hoop equilibrium ``sigma(eps) * h_wall = p * r`` with
``eps = r / r0 - 1`` and a piecewise-linear stress-strain law.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._accel import njit, pick
from .errors import OutOfRangeError, PreconditionError

BRACKET_LO = 0.2
BRACKET_HI = 5.0
ROOT_TOL = 1e-12
MAX_ROOT_ITERS = 200


@dataclass(frozen=True)
class ConstitutiveLaw:
    E1: float = 12500.0
    E2: float = 2500.0
    sigma_off: float = 20.0
    eps0: float = 2e-3

    def __post_init__(self):
        jump = self.E1 * self.eps0 - (self.E2 * self.eps0 + self.sigma_off)
        if abs(jump) > 1e-9 * max(1.0, abs(self.E1 * self.eps0)):
            raise PreconditionError(f"law is discontinuous at eps0 (jump {jump:g})")

    def as_array(self) -> np.ndarray:
        return np.array([self.E1, self.E2, self.sigma_off, self.eps0])


@dataclass(frozen=True)
class GeomMaterial:
    r0: float = 1.0 / math.sqrt(math.pi)
    h_wall: float = 0.1 / math.sqrt(math.pi)

    def __post_init__(self):
        if not self.r0 > 0:
            raise PreconditionError(f"r0 must be positive, got {self.r0}")
        if not 0 < self.h_wall < self.r0:
            raise PreconditionError(f"need 0 < h_wall < r0, got h_wall={self.h_wall}")

    @property
    def a0(self) -> float:
        return math.pi * self.r0 ** 2


def hoop_stress(eps, law: ConstitutiveLaw = ConstitutiveLaw()):
    """Stress of the piecewise-linear law; accepts scalars or arrays."""
    eps = np.asarray(eps, dtype=np.float64)
    out = np.where(
        np.abs(eps) < law.eps0,
        law.E1 * eps,
        np.where(eps >= law.eps0, law.E2 * eps + law.sigma_off, law.E2 * eps - law.sigma_off),
    )
    return out if out.ndim else float(out)


def hoop_tangent(eps, law: ConstitutiveLaw = ConstitutiveLaw()):
    """d(sigma)/d(eps); the stiff modulus is used strictly inside ``|eps| < eps0``."""
    eps = np.asarray(eps, dtype=np.float64)
    out = np.where(np.abs(eps) < law.eps0, law.E1, law.E2)
    return out if out.ndim else float(out)


def strain_from_section(a, geom: GeomMaterial = GeomMaterial()):
    return np.sqrt(np.asarray(a, dtype=np.float64) / math.pi) / geom.r0 - 1.0


def pressure_from_section(a, geom: GeomMaterial = GeomMaterial(), law: ConstitutiveLaw = ConstitutiveLaw()):
    """Inverse map ``p(a) = sigma(eps) h_wall / r``."""
    r = np.sqrt(np.asarray(a, dtype=np.float64) / math.pi)
    return hoop_stress(r / geom.r0 - 1.0, law) * geom.h_wall / r


def pressure_tangent(a, geom: GeomMaterial = GeomMaterial(), law: ConstitutiveLaw = ConstitutiveLaw()):
    """dp/da of the equilibrium relation at section ``a``."""
    a = np.asarray(a, dtype=np.float64)
    r = np.sqrt(a / math.pi)
    eps = r / geom.r0 - 1.0
    dp_dr = geom.h_wall * (hoop_tangent(eps, law) * r / geom.r0 - hoop_stress(eps, law)) / r ** 2
    out = dp_dr / (2.0 * math.pi * r)
    return out if np.ndim(out) else float(out)


# --- root-finding kernels -------------------------------------------------
#
# Alternating bisection / false-position on g(r) = sigma(r/r0 - 1) h - p r.
# g is linear on each branch of the law, so false position is exact as soon
# as the bracket sits inside one branch; the bisection half-steps guarantee
# the bracket shrinks even when it straddles a kink.


@njit
def _g_nb(r, p, r0, h, E1, E2, s, e0):
    eps = r / r0 - 1.0
    if abs(eps) < e0:
        sig = E1 * eps
    elif eps >= e0:
        sig = E2 * eps + s
    else:
        sig = E2 * eps - s
    return sig * h - p * r


@njit
def _section_kernel_numba(p, r0, h, law, tol, max_iter):
    E1, E2, s, e0 = law[0], law[1], law[2], law[3]
    n = p.shape[0]
    r_out = np.empty(n)
    status = np.zeros(n, dtype=np.int64)
    for i in range(n):
        pi = p[i]
        lo = BRACKET_LO * r0
        hi = BRACKET_HI * r0
        glo = _g_nb(lo, pi, r0, h, E1, E2, s, e0)
        ghi = _g_nb(hi, pi, r0, h, E1, E2, s, e0)
        if not (glo <= 0.0 <= ghi):
            status[i] = 1
            r_out[i] = np.nan
            continue
        r = lo
        done = False
        if glo == 0.0:
            r = lo
            done = True
        elif ghi == 0.0:
            r = hi
            done = True
        it = 0
        while not done and it < max_iter:
            if it % 2 == 0:
                r = 0.5 * (lo + hi)
            else:
                r = lo - glo * (hi - lo) / (ghi - glo)
                if not (lo < r < hi):
                    r = 0.5 * (lo + hi)
            gr = _g_nb(r, pi, r0, h, E1, E2, s, e0)
            if abs(gr) <= tol:
                done = True
            elif gr < 0.0:
                lo = r
                glo = gr
            else:
                hi = r
                ghi = gr
            if hi - lo <= 4e-16 * hi:
                done = True
            it += 1
        if not done:
            status[i] = 2
        r_out[i] = r
    return r_out, status


def _section_kernel_numpy(p, r0, h, law, tol, max_iter):
    E1, E2, s, e0 = (float(x) for x in law)

    def g(r, pv):
        eps = r / r0 - 1.0
        sig = np.where(np.abs(eps) < e0, E1 * eps,
                       np.where(eps >= e0, E2 * eps + s, E2 * eps - s))
        return sig * h - pv * r

    n = p.shape[0]
    lo = np.full(n, BRACKET_LO * r0)
    hi = np.full(n, BRACKET_HI * r0)
    glo = g(lo, p)
    ghi = g(hi, p)
    status = np.where((glo <= 0.0) & (0.0 <= ghi), 0, 1).astype(np.int64)
    r = lo.copy()
    active = status == 0
    hit_lo = active & (glo == 0.0)
    hit_hi = active & ~hit_lo & (ghi == 0.0)
    r[hit_hi] = hi[hit_hi]
    active &= ~(hit_lo | hit_hi)
    it = 0
    while active.any() and it < max_iter:
        idx = np.nonzero(active)[0]
        a_lo, a_hi, a_glo, a_ghi = lo[idx], hi[idx], glo[idx], ghi[idx]
        if it % 2 == 0:
            rc = 0.5 * (a_lo + a_hi)
        else:
            with np.errstate(divide="ignore", invalid="ignore"):
                rc = a_lo - a_glo * (a_hi - a_lo) / (a_ghi - a_glo)
            bad = ~((a_lo < rc) & (rc < a_hi))
            rc[bad] = 0.5 * (a_lo[bad] + a_hi[bad])
        gr = g(rc, p[idx])
        r[idx] = rc
        conv = np.abs(gr) <= tol
        neg = ~conv & (gr < 0.0)
        pos = ~conv & ~neg
        lo[idx[neg]] = rc[neg]
        glo[idx[neg]] = gr[neg]
        hi[idx[pos]] = rc[pos]
        ghi[idx[pos]] = gr[pos]
        conv |= (hi[idx] - lo[idx]) <= 4e-16 * hi[idx]
        active[idx[conv]] = False
        it += 1
    status[active] = 2
    r[status == 1] = np.nan
    return r, status


_section_kernel = pick(_section_kernel_numba, _section_kernel_numpy)


def _radii(p, geom, law):
    p = np.ascontiguousarray(p, dtype=np.float64)
    tol = ROOT_TOL * law.E1 * geom.h_wall
    r, status = _section_kernel(p, geom.r0, geom.h_wall, law.as_array(), tol, MAX_ROOT_ITERS)
    bad = np.nonzero(status)[0]
    if bad.size:
        i = int(bad[0])
        raise OutOfRangeError(
            f"no equilibrium radius in [{BRACKET_LO}, {BRACKET_HI}]*r0 for p={p[i]:.6g} "
            f"at cell {i} (pressure beyond model validity)", cell=i, pressure=float(p[i]))
    return r


def section_from_pressure(p: float, geom: GeomMaterial = GeomMaterial(),
                          law: ConstitutiveLaw = ConstitutiveLaw()) -> float:
    """Equilibrium cross-section for a scalar pressure."""
    if not math.isfinite(p):
        raise PreconditionError(f"pressure must be finite, got {p}")
    try:
        r = _radii(np.array([float(p)]), geom, law)[0]
    except OutOfRangeError as exc:
        raise OutOfRangeError(str(exc).replace(" at cell 0", ""), pressure=float(p)) from None
    return math.pi * r * r


def solid_solve(p_field, geom: GeomMaterial = GeomMaterial(),
                law: ConstitutiveLaw = ConstitutiveLaw()) -> np.ndarray:
    """Cell-wise equilibrium sections for a pressure field."""
    p = np.asarray(p_field, dtype=np.float64)
    if not np.all(np.isfinite(p)):
        raise PreconditionError("pressure field contains non-finite entries")
    r = _radii(p, geom, law)
    return np.pi * r * r


def root_residual(a, p, geom: GeomMaterial = GeomMaterial(), law: ConstitutiveLaw = ConstitutiveLaw()):
    """``g(r)`` evaluated at the radius of section ``a``."""
    r = np.sqrt(np.asarray(a, dtype=np.float64) / math.pi)
    return hoop_stress(r / geom.r0 - 1.0, law) * geom.h_wall - np.asarray(p) * r


class FomSolid:
    """Full-order solid operator ``pressure field -> section field``.

    ``cost_multiplier`` repeats the cell-wise solve that many times per call
    to emulate an expensive structural solver; the result is unaffected.
    """

    name = "fom"

    def __init__(self, geom: GeomMaterial = GeomMaterial(), law: ConstitutiveLaw = ConstitutiveLaw(),
                 cost_multiplier: int = 1):
        if int(cost_multiplier) < 1:
            raise PreconditionError(f"cost_multiplier must be >= 1, got {cost_multiplier}")
        self.geom = geom
        self.law = law
        self.cost_multiplier = int(cost_multiplier)

    def __call__(self, p_field) -> np.ndarray:
        a = solid_solve(p_field, self.geom, self.law)
        for _ in range(self.cost_multiplier - 1):
            a = solid_solve(p_field, self.geom, self.law)
        return a
