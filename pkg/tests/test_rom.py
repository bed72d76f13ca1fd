import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.interpolate import RBFInterpolator

from fsirom import rom
from fsirom.errors import AlignmentError, DimensionError, IllConditionedError, RankError
from fsirom.mesh import SnapshotMatrix
from fsirom.rom import (compute_pod_basis, decode, encode, fit_regressor, load_model, predict,
                        rom_solid_solve, save_model, train_rom)


def centred_matrix(svals, n_rows, n_cols, rng):
    """Matrix whose mean-centred singular values are exactly ``svals``."""
    k = len(svals)
    U, _ = np.linalg.qr(rng.standard_normal((n_rows, k)))
    B = np.column_stack([np.ones(n_cols), rng.standard_normal((n_cols, k))])
    Vq, _ = np.linalg.qr(B)
    V = Vq[:, 1:]  # orthogonal to the all-ones vector, so centring leaves it alone
    base = rng.standard_normal(n_rows)
    return base[:, None] + U @ np.diag(svals) @ V.T


def test_repeated_column_is_degenerate(rng):
    c = rng.standard_normal(5)
    X = np.tile(c[:, None], (1, 4))
    b = compute_pod_basis(X, r_fixed=1)
    assert b.degenerate and b.r == 1
    np.testing.assert_allclose(b.mean, c, rtol=1e-15)
    assert np.linalg.norm(b.modes[:, 0]) == pytest.approx(1.0)
    with pytest.raises(RankError) as ei:
        compute_pod_basis(X, r_fixed=2)
    assert ei.value.effective_rank == 0


def test_full_energy_reconstructs_against_svd_oracle(rng):
    X = rng.standard_normal((6, 4))
    b = compute_pod_basis(X, energy=1.0)
    np.testing.assert_allclose(decode(b, encode(b, X)), X, atol=1e-10)
    s = np.linalg.svd(X - X.mean(axis=1, keepdims=True), compute_uv=False)
    np.testing.assert_allclose(b.singular_values, s, rtol=1e-12, atol=1e-12)


def test_energy_threshold_picks_two(rng):
    X = centred_matrix([10.0, 1.0, 1e-6], 8, 6, rng)
    b = compute_pod_basis(X, energy=0.9999)
    assert b.r == 2
    np.testing.assert_allclose(b.singular_values[:3], [10.0, 1.0, 1e-6], rtol=1e-6)


def test_encode_decode_identities(rng):
    X = rng.standard_normal((12, 9))
    b = compute_pod_basis(X, r_fixed=3)
    np.testing.assert_allclose(encode(b, b.mean), 0.0, atol=1e-14)
    np.testing.assert_allclose(encode(b, b.mean + 5 * b.modes[:, 0]), [5, 0, 0], atol=1e-13)
    np.testing.assert_array_equal(decode(b, np.zeros(3)), b.mean)
    np.testing.assert_allclose(decode(b, [0, 1, 0]), b.mean + b.modes[:, 1], atol=1e-15)
    z = rng.standard_normal(3)
    np.testing.assert_allclose(encode(b, decode(b, z)), z, atol=1e-12)
    x = rng.standard_normal(12)
    P = b.modes @ b.modes.T
    bound = np.linalg.norm((np.eye(12) - P) @ (x - b.mean)) + 1e-12
    assert np.linalg.norm(decode(b, encode(b, x)) - x) <= bound
    with pytest.raises(DimensionError):
        encode(b, np.zeros(5))
    with pytest.raises(DimensionError):
        decode(b, np.zeros(4))


@settings(max_examples=20, deadline=None)
@given(st.integers(2, 15), st.integers(2, 15), st.integers(0, 1000))
def test_orthonormal_and_sorted(n_rows, n_cols, seed):
    X = np.random.default_rng(seed).standard_normal((n_rows, n_cols))
    b = compute_pod_basis(X, energy=0.95)
    np.testing.assert_allclose(b.modes.T @ b.modes, np.eye(b.r), atol=1e-10)
    assert np.all(np.diff(b.singular_values) <= 1e-12)


def test_tps_1d_three_points():
    reg = fit_regressor([[0.0], [1.0], [2.0]], [0.0, 1.0, 4.0], kind="tps")
    np.testing.assert_allclose(predict(reg, np.array([[0.0], [1.0], [2.0]]))[:, 0], [0, 1, 4],
                               atol=1e-8)


def test_tps_matches_scipy_oracle(rng):
    X = rng.uniform(-1, 1, (40, 3))
    Y = rng.standard_normal((40, 2))
    reg = fit_regressor(X, Y, kind="tps")
    oracle = RBFInterpolator(X, Y, kernel="thin_plate_spline", degree=1)
    Q = rng.uniform(-3, 3, (25, 3))  # includes far-field points
    np.testing.assert_allclose(predict(reg, Q), oracle(Q), rtol=1e-8, atol=1e-8)
    for q in Q[:5]:
        np.testing.assert_allclose(predict(reg, q), oracle(q[None])[0], rtol=1e-8, atol=1e-8)


def test_far_field_equals_direct_kernel_sum(rng):
    X = rng.uniform(-1, 1, (15, 2))
    reg = fit_regressor(X, rng.standard_normal((15, 1)), kind="tps")
    q = np.array([40.0, -25.0])
    r = np.linalg.norm(reg.centers - q, axis=1)
    direct = reg.tail[0] + q @ reg.tail[1:] + (r ** 2 * np.log(r)) @ reg.weights
    np.testing.assert_allclose(predict(reg, q), direct, rtol=1e-10)


def test_duplicates_keep_last_with_warning():
    X = [[0.0], [1.0], [1.0], [2.0], [3.0]]
    Y = [0.0, 5.0, 1.0, 4.0, 9.0]
    with pytest.warns(UserWarning, match="duplicate"):
        reg = fit_regressor(X, Y, kind="tps")
    assert reg.centers.shape[0] == 4
    assert predict(reg, np.array([1.0]))[0] == pytest.approx(1.0, abs=1e-8)


def test_too_few_points_for_tail():
    with pytest.raises(IllConditionedError):
        fit_regressor(np.eye(3)[:2], np.zeros(2), kind="tps")


def test_poly_linear_degree_and_validation(rng):
    X = rng.standard_normal((30, 2))
    Y = 1.5 - 2.0 * X[:, 0] + 0.5 * X[:, 1]
    reg = fit_regressor(X, Y, kind="poly", degree=1)
    np.testing.assert_allclose(reg.weights[:, 0], [1.5, -2.0, 0.5], atol=1e-12)
    with pytest.raises(ValueError):
        fit_regressor(X, Y, kind="poly", degree=3)


def test_kernel_backends_agree(rng):
    A, B = rng.standard_normal((30, 4)), rng.standard_normal((20, 4))
    np.testing.assert_allclose(rom._tps_matrix_numba(A, B), rom._tps_matrix_numpy(A, B),
                               rtol=1e-13, atol=1e-13)
    reg = fit_regressor(A, rng.standard_normal((30, 3)), kind="tps")
    x = rng.standard_normal(4)
    np.testing.assert_allclose(rom._tps_predict_numba(x, reg.centers, reg.weights, reg.tail),
                               rom._tps_predict_numpy(x, reg.centers, reg.weights, reg.tail),
                               rtol=1e-12)


def _toy_snapshots(rng, n=20, k=60):
    F, U = SnapshotMatrix(n), SnapshotMatrix(n)
    x = np.linspace(0, 1, n)
    for j in range(k):
        c = rng.standard_normal(3)
        p = c[0] + c[1] * x + c[2] * np.sin(3 * x)
        F.append(p, j, 0)
        U.append(1 + 0.01 * p + 0.001 * p ** 2, j, 0)
    return F, U


def test_train_rejects_misaligned(rng):
    F, U = _toy_snapshots(rng)
    U.subiters[3] = 7
    with pytest.raises(AlignmentError):
        train_rom(F, U)
    with pytest.raises(AlignmentError):
        train_rom(F.to_array(), U.to_array()[:, :-1])


def test_train_reproduces_projected_targets(rng):
    F, U = _toy_snapshots(rng)
    model = train_rom(F, U, r_f=3, r_u=3)
    Um = U.to_array()
    for j in range(0, F.n_cols, 7):
        proj = decode(model.basis_u, encode(model.basis_u, Um[:, j]))
        got = rom_solid_solve(model, F.columns[j])
        assert np.linalg.norm(got - proj) <= 1e-6 * np.linalg.norm(Um[:, j])
    at_mean = model(model.basis_f.mean)
    np.testing.assert_allclose(at_mean, decode(model.basis_u, predict(model.regressor, np.zeros(3))))


def test_energy_mode_and_dims(rng):
    F, U = _toy_snapshots(rng)
    model = train_rom(F, U, energy=0.9999)
    assert model.basis_f.r == 3
    assert model.regressor.d_in == model.basis_f.r and model.regressor.d_out == model.basis_u.r


def test_model_file_roundtrip(tmp_path, rng):
    F, U = _toy_snapshots(rng)
    model = train_rom(F, U, r_f=3, r_u=2, meta={"mu_train": [2, 6]})
    man, raw = save_model(model, tmp_path / "m")
    assert man.name == "m.rom.json" and raw.name == "m.rom.f64"
    back = load_model(tmp_path / "m")
    p = F.columns[5] * 1.01
    assert back(p).tobytes() == model(p).tobytes()
    assert back.meta["mu_train"] == [2, 6]


@pytest.mark.slow
def test_benchmark_model_reproduces_training_set(pipeline):
    _, F, U, _ = pipeline.train
    model = pipeline.model
    assert model.basis_f.r == 4 and model.basis_u.r == 4
    Um = U.to_array()
    worst = 0.0
    for j in range(0, F.n_cols, 11):
        proj = decode(model.basis_u, encode(model.basis_u, Um[:, j]))
        worst = max(worst, np.linalg.norm(model(F.columns[j]) - proj) / np.linalg.norm(Um[:, j]))
    assert worst <= 1e-6
