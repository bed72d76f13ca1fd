import json

import numpy as np
import pytest

from fsirom import harness
from fsirom.errors import ConfigError, PreconditionError
from fsirom.harness import RunConfig, speedup_report
from fsirom.solid import ConstitutiveLaw, hoop_stress


def test_config_defaults_and_roundtrip():
    cfg = RunConfig()
    assert cfg.coupling["max_columns"] == 6 and cfg.rom["r_f"] == 4 and cfg.rom["t_end"] == 120.0
    again = RunConfig.from_dict(cfg.to_dict())
    assert again.to_dict() == cfg.to_dict()


@pytest.mark.parametrize("doc", [
    {"bogus": 1},
    {"t_end": 1.05},
    {"mode": "rom-fom"},
    {"mode": "sideways"},
    {"fluid": {"rho": -1}},
    {"coupling": {"omega": 2}},
    {"rom": {"kind": "mlp"}},
    {"solid": {"E9": 1}},
    {"mesh": {"n_cells": 2}},
    {"fluid": {"nonsense": 1}},
])
def test_invalid_configs(doc):
    with pytest.raises(ConfigError):
        RunConfig.from_dict(doc)


def test_overrides():
    doc = harness.apply_overrides({"coupling": {"tol_rel": 1e-6}},
                                  ["coupling.tol_rel=1e-8", "t_end=2", "rom.kind=poly", "mu=[0.9,4]"])
    cfg = RunConfig.from_dict(doc)
    assert cfg.coupling["tol_rel"] == 1e-8 and cfg.t_end == 2 and cfg.rom["kind"] == "poly"
    assert cfg.mu == (0.9, 4.0)
    with pytest.raises(ConfigError):
        harness.apply_overrides({}, ["nosign"])
    with pytest.raises(ConfigError):
        harness.apply_overrides({}, ["wing.span=3"])


def test_config_file_errors(tmp_path):
    with pytest.raises(ConfigError):
        RunConfig.from_json(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError):
        RunConfig.from_json(bad)


def test_short_fom_run_writes_outputs(tmp_path):
    cfg = RunConfig(t_end=2.0, out=str(tmp_path))
    res, F, U, timing = harness.run_fom_fom(cfg)
    assert res.n_steps == 20
    assert F.n_cols == U.n_cols == int(res.n_subiters.sum()) == timing["n_snapshots"]
    rows = (tmp_path / "trace.csv").read_text().splitlines()
    assert rows[0] == "t,p_inlet,v_inlet,a_inlet,n_subiters" and len(rows) == 22
    back = harness.RunResults.read_trace(tmp_path / "trace.csv")
    np.testing.assert_array_equal(back.p_inlet, res.p_inlet)
    for name in ("F.f64", "F.json", "U.f64", "U.json"):
        assert (tmp_path / "snapshots" / name).exists()
    t = json.loads((tmp_path / "timing.json").read_text())
    assert t["T_f"] > 0 and t["T_s"] > 0 and t["n_steps"] == 20


def test_reruns_are_bit_identical():
    cfg = RunConfig(t_end=1.0)
    r1 = harness.run_fom_fom(cfg)[0]
    r2 = harness.run_fom_fom(cfg)[0]
    assert r1.p_fields.tobytes() == r2.p_fields.tobytes()
    assert r1.a_fields.tobytes() == r2.a_fields.tobytes()


def test_constant_inlet_settles():
    cfg = RunConfig(t_end=6.0, signal={"g": 0.0})
    res = harness.run_fom_fom(cfg)[0]
    late = res.p_inlet[res.times >= 4.0]
    assert np.ptp(late) <= 1e-6 * max(1.0, np.max(np.abs(late)))


def test_benchmark_training_run(pipeline):
    res, F, U, timing = pipeline.train
    assert res.n_steps == 180 and res.times.shape[0] == 181
    assert F.n_cols == int(res.n_subiters.sum())
    assert F.metadata() == U.metadata()


def test_rom_run_rejects_wrong_mesh(pipeline):
    cfg = RunConfig(mesh={"n_cells": 50})
    with pytest.raises(PreconditionError):
        harness.run_rom_fom(cfg, pipeline.model, horizon=1.0)


def test_speedup_report_examples():
    rep = speedup_report(1.0, 1.7, 760.0)
    assert rep.s_approx == pytest.approx(1.7 / (1 + 1.7 / 760))
    assert rep.s_alpha == pytest.approx(rep.s_approx, rel=1e-14)
    assert speedup_report(0.3, 7.0, 1.0).s_exact == pytest.approx(1.0)
    assert speedup_report(1.0, 12.0, 12.0).s_approx == 6.0
    assert speedup_report(1.0, 5.0, 3.0).s_exact >= 1.0
    with pytest.raises(PreconditionError):
        speedup_report(0.0, 1.0, 1.0)


def test_report_from_timings_pools_fluid_calls():
    fom = {"n_fluid": 10, "t_fluid_total": 1.0, "T_s": 0.5, "wall_per_step": 2.0, "mean_subiters": 5}
    rom = {"n_fluid": 30, "t_fluid_total": 3.0, "T_s": 0.01, "wall_per_step": 0.5, "mean_subiters": 6}
    rep = harness.report_from_timings(fom, rom)
    assert rep.T_f == pytest.approx(0.1) and rep.sigma == pytest.approx(50.0)
    assert rep.measured == pytest.approx(4.0)


def test_stress_metric_zero_on_law():
    eps = np.linspace(-0.05, 0.05, 101)
    assert np.all(harness.stress_law_error(eps, hoop_stress(eps)) == 0.0)
    assert harness.stress_law_error([0.0], [0.5])[0] == pytest.approx(0.5 / 25.0)


def test_training_points_lie_on_law(pipeline):
    _, F, U, _ = pipeline.train
    eps, sig = harness.stress_strain_points(U.to_array(), F.to_array())
    assert np.max(harness.stress_law_error(eps, sig)) <= 1e-9


def test_relative_l2_window():
    t = np.arange(11.0)
    ref = np.ones(11)
    approx = ref.copy()
    approx[0] = 5.0  # outside the window
    assert harness.relative_l2(t, approx, ref, 2, 10) == 0.0
    with pytest.raises(PreconditionError):
        harness.relative_l2(t, approx, ref, 20, 30)


def test_emit_figure_data(tmp_path, pipeline):
    res, F, U, _ = pipeline.train
    rom, _ = pipeline.rom(pipeline.MU1, horizon=18.0)
    rep = speedup_report(1.0, 20.0, 100.0)
    out = harness.emit_figure_data(tmp_path, [res], [rom], F, U, rep)
    assert set(out) == {"inlet_velocity", "inlet_pressure_overlay", "stress_strain", "timing"}
    vel = np.loadtxt(out["inlet_velocity"], delimiter=",", skiprows=1)
    ov = np.loadtxt(out["inlet_pressure_overlay"], delimiter=",", skiprows=1)
    assert vel.shape[0] == ov.shape[0] == 181
    np.testing.assert_array_equal(ov[:, 0], res.times)
    lines = out["stress_strain"].read_text().splitlines()
    law_pts = {tuple(map(float, ln.split(",")[1:])) for ln in lines[1:] if ln.startswith("law,")}
    eps0 = ConstitutiveLaw().eps0
    assert (eps0, 25.0) in law_pts and (-eps0, -25.0) in law_pts
    assert sum(ln.startswith("training,") for ln in lines) == F.n_cols * F.n_rows
    assert json.loads(out["timing"].read_text())["report"]["sigma"] == 100.0


def test_calibration_positive():
    assert harness.calibrate_cost_multiplier(RunConfig(), target_ratio=2.0, n_probe=5) >= 1
