import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from fsirom.errors import DimensionError, PreconditionError
from fsirom.mesh import Mesh1D, SnapshotMatrix, TubeState


def test_mesh_defaults_and_centers():
    m = Mesh1D()
    assert m.dx == pytest.approx(0.1)
    x = m.centers
    assert x.shape == (100,)
    assert x[0] == pytest.approx(0.05)
    assert np.all(np.diff(x) > 0)


@pytest.mark.parametrize("kw", [{"n_cells": 3}, {"length": 0.0}, {"length": -1.0}])
def test_mesh_rejects_bad_sizes(kw):
    with pytest.raises(Exception):
        Mesh1D(**kw)


def test_tube_state_requires_positive_area():
    with pytest.raises(PreconditionError):
        TubeState(np.array([1.0, 0.0, 1.0, 1.0]), np.zeros(4), np.zeros(4), 0.0)
    with pytest.raises(PreconditionError):
        TubeState.uniform(4, 1.0, 0.0, 0.0, t=-1.0)


def test_first_append():
    m = SnapshotMatrix(3)
    m.append([1.0, 2.0, 3.0], step=0, subiter=0)
    assert m.n_cols == 1
    np.testing.assert_array_equal(m.to_array()[:, 0], [1.0, 2.0, 3.0])
    assert m.metadata() == [(0, 0)]


def test_append_wrong_length_rejected():
    m = SnapshotMatrix(3)
    with pytest.raises(DimensionError):
        m.append([1.0, 2.0], 0, 0)
    assert m.n_cols == 0


def test_append_copies_column():
    m = SnapshotMatrix(2)
    col = np.array([1.0, 2.0])
    m.append(col, 0, 0)
    col[0] = 99.0
    assert m.to_array()[0, 0] == 1.0


@settings(max_examples=25, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 6), st.integers(1, 8)),
              elements=st.floats(allow_nan=False, allow_infinity=False, width=64)))
def test_roundtrip_is_bit_identical(tmp_path_factory, data):
    m = SnapshotMatrix(data.shape[0])
    for j in range(data.shape[1]):
        m.append(data[:, j], step=j // 2, subiter=j % 2)
    path = tmp_path_factory.mktemp("snap") / "F"
    m.save(path)
    back = SnapshotMatrix.load(path)
    assert back.to_array().tobytes() == data.tobytes() or np.array_equal(
        back.to_array().view(np.uint64), np.ascontiguousarray(data).view(np.uint64))
    assert back.metadata() == m.metadata()


def test_file_layout_is_column_major(tmp_path):
    m = SnapshotMatrix(2)
    m.append([1.0, 2.0], 0, 0).append([3.0, 4.0], 0, 1)
    raw, side = m.save(tmp_path / "U")
    assert raw.name == "U.f64" and side.name == "U.json"
    np.testing.assert_array_equal(np.fromfile(raw, dtype="<f8"), [1.0, 2.0, 3.0, 4.0])


def test_truncated_file_rejected(tmp_path):
    m = SnapshotMatrix(2)
    m.append([1.0, 2.0], 0, 0)
    raw, _ = m.save(tmp_path / "F")
    raw.write_bytes(raw.read_bytes()[:8])
    with pytest.raises(DimensionError):
        SnapshotMatrix.load(tmp_path / "F")
