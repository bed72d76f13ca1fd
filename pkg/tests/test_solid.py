import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fsirom.errors import OutOfRangeError, PreconditionError
from fsirom.solid import (ConstitutiveLaw, FomSolid, GeomMaterial, hoop_stress, pressure_tangent,
                          root_residual, section_from_pressure, solid_solve)

LAW = ConstitutiveLaw()
GEOM = GeomMaterial()


def branch_strain(p, geom=GEOM, law=LAW):
    """Closed-form per-branch equilibrium strain (oracle, linear in r on each branch)."""
    r0, h = geom.r0, geom.h_wall
    eps = p * r0 / (law.E1 * h - p * r0)
    if abs(eps) < law.eps0:
        return eps
    if eps > 0:
        return (p * r0 - law.sigma_off * h) / (law.E2 * h - p * r0)
    return (p * r0 + law.sigma_off * h) / (law.E2 * h - p * r0)


def test_stress_examples():
    assert hoop_stress(0.0) == 0.0
    assert LAW.E1 * 0.002 == 25.0 and hoop_stress(0.002) == 25.0
    assert hoop_stress(-0.01) == pytest.approx(-45.0)


def test_discontinuous_law_rejected():
    with pytest.raises(PreconditionError):
        ConstitutiveLaw(sigma_off=21.0)


def test_unloaded_section():
    assert section_from_pressure(0.0) == pytest.approx(GEOM.a0, rel=1e-14)


def test_stiff_branch_closed_form():
    eps = 1.0 / 1249.0
    assert section_from_pressure(1.0) == pytest.approx(GEOM.a0 * (1 + eps) ** 2, rel=1e-12)


def test_continuous_across_branch_transition():
    p_star = LAW.E1 * LAW.eps0 * GEOM.h_wall / (GEOM.r0 * (1 + LAW.eps0))
    lo = section_from_pressure(p_star - 1e-9)
    hi = section_from_pressure(p_star + 1e-9)
    eps_hi = math.sqrt(hi / math.pi) / GEOM.r0 - 1
    assert abs(hi - lo) < 1e-9
    assert abs(eps_hi - LAW.eps0) < 1e-9


@settings(max_examples=200, deadline=None)
@given(st.floats(-40.0, 40.0))
def test_matches_branch_oracle(p):
    a = section_from_pressure(p)
    eps = math.sqrt(a / math.pi) / GEOM.r0 - 1
    assert eps == pytest.approx(branch_strain(p), rel=1e-10, abs=1e-14)
    assert abs(root_residual(a, p)) <= 1e-12 * LAW.E1 * GEOM.h_wall


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-30.0, 30.0), min_size=4, max_size=30), st.floats(0.0, 5.0))
def test_monotone_in_pressure(ps, shift):
    p = np.array(ps)
    a_p = solid_solve(p)
    a_q = solid_solve(p + shift)
    assert np.all(a_p <= a_q)


def test_field_consistent_with_scalar():
    p = np.array([-5.0, 0.0, 2.495, 7.0])
    a = solid_solve(p)
    for i in range(4):
        assert a[i] == section_from_pressure(p[i])
    np.testing.assert_array_equal(solid_solve(np.zeros(10)), np.full(10, solid_solve([0.0])[0]))


def test_out_of_range_names_cell():
    p = np.zeros(6)
    p[4] = 1e4
    with pytest.raises(OutOfRangeError) as ei:
        solid_solve(p)
    assert ei.value.cell == 4


def test_nonfinite_pressure_rejected():
    with pytest.raises(PreconditionError):
        solid_solve([0.0, np.nan])


def test_tangent_positive_and_matches_difference():
    for p in (-10.0, 0.0, 1.0, 10.0):
        a = section_from_pressure(p)
        h = 1e-7
        fd = (section_from_pressure(p + h) - section_from_pressure(p - h)) / (2 * h)
        assert pressure_tangent(a) == pytest.approx(1.0 / fd, rel=1e-5)


def test_cost_multiplier_does_not_change_result():
    p = np.linspace(-8, 8, 20)
    np.testing.assert_array_equal(FomSolid(cost_multiplier=5)(p), FomSolid()(p))
    with pytest.raises(PreconditionError):
        FomSolid(cost_multiplier=0)
