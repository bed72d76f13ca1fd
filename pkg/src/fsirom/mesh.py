"""Uniform 1D mesh, tube state container and snapshot storage."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DimensionError, PreconditionError


@dataclass(frozen=True)
class Mesh1D:
    """Uniform cell-centred grid on ``[0, length]``."""

    length: float = 10.0
    n_cells: int = 100

    def __post_init__(self):
        if int(self.n_cells) != self.n_cells or self.n_cells < 4:
            raise PreconditionError(f"n_cells must be an integer >= 4, got {self.n_cells}")
        if not self.length > 0:
            raise PreconditionError(f"length must be positive, got {self.length}")

    @property
    def dx(self) -> float:
        return self.length / self.n_cells

    @property
    def centers(self) -> np.ndarray:
        return (np.arange(self.n_cells) + 0.5) * self.dx

    def check_field(self, values, name="field") -> np.ndarray:
        """Return ``values`` as a float64 array, rejecting wrong length or non-finite entries."""
        arr = np.asarray(values, dtype=np.float64)
        if arr.shape != (self.n_cells,):
            raise DimensionError(f"{name} has shape {arr.shape}, mesh needs ({self.n_cells},)")
        if not np.all(np.isfinite(arr)):
            raise PreconditionError(f"{name} contains non-finite entries")
        return arr


@dataclass
class TubeState:
    """Section ``a``, velocity ``v`` and pressure ``p`` per cell at time ``t``."""

    a: np.ndarray
    v: np.ndarray
    p: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        self.a = np.asarray(self.a, dtype=np.float64)
        self.v = np.asarray(self.v, dtype=np.float64)
        self.p = np.asarray(self.p, dtype=np.float64)
        if not (self.a.shape == self.v.shape == self.p.shape) or self.a.ndim != 1:
            raise DimensionError(
                f"a, v, p shapes differ: {self.a.shape}, {self.v.shape}, {self.p.shape}")
        if np.any(self.a <= 0):
            raise PreconditionError("cross-section must be positive in every cell")
        if self.t < 0:
            raise PreconditionError(f"time must be non-negative, got {self.t}")

    @property
    def n_cells(self) -> int:
        return self.a.shape[0]

    @classmethod
    def uniform(cls, n_cells, a, v, p, t=0.0) -> "TubeState":
        return cls(np.full(n_cells, float(a)), np.full(n_cells, float(v)),
                   np.full(n_cells, float(p)), t)

    def copy(self) -> "TubeState":
        return TubeState(self.a.copy(), self.v.copy(), self.p.copy(), self.t)


@dataclass
class SnapshotMatrix:
    """Column-stacked snapshots with per-column ``(step, subiter)`` tags.

    Columns are kept as independent copies; ``to_array`` stacks them into an
    ``(n_rows, n_cols)`` matrix.
    """

    n_rows: int
    columns: list = field(default_factory=list)
    steps: list = field(default_factory=list)
    subiters: list = field(default_factory=list)

    def __len__(self):
        return len(self.columns)

    @property
    def n_cols(self) -> int:
        return len(self.columns)

    def append(self, col, step: int, subiter: int) -> "SnapshotMatrix":
        col = np.array(col, dtype=np.float64, copy=True).ravel()
        if col.shape[0] != self.n_rows:
            raise DimensionError(
                f"snapshot column has length {col.shape[0]}, matrix has n_rows={self.n_rows}")
        self.columns.append(col)
        self.steps.append(int(step))
        self.subiters.append(int(subiter))
        return self

    def to_array(self) -> np.ndarray:
        if not self.columns:
            return np.zeros((self.n_rows, 0))
        return np.column_stack(self.columns)

    def metadata(self) -> list:
        return list(zip(self.steps, self.subiters))

    def save(self, path) -> tuple[Path, Path]:
        """Write ``<path>.f64`` (column-major little-endian) and ``<path>.json``."""
        path = Path(path)
        raw = path.with_name(path.name + ".f64")
        side = path.with_name(path.name + ".json")
        data = self.to_array()
        raw.parent.mkdir(parents=True, exist_ok=True)
        # column-major: write the transpose in C order
        raw.write_bytes(np.ascontiguousarray(data.T, dtype="<f8").tobytes())
        side.write_text(json.dumps({
            "n_rows": self.n_rows,
            "n_cols": self.n_cols,
            "layout": "column-major",
            "dtype": "float64-le",
            "steps": self.steps,
            "subiters": self.subiters,
        }, indent=1))
        return raw, side

    @classmethod
    def load(cls, path) -> "SnapshotMatrix":
        path = Path(path)
        side = json.loads(path.with_name(path.name + ".json").read_text())
        if side.get("layout") != "column-major" or side.get("dtype") != "float64-le":
            raise DimensionError(f"unsupported snapshot layout/dtype in {path}: {side}")
        n_rows, n_cols = int(side["n_rows"]), int(side["n_cols"])
        flat = np.fromfile(path.with_name(path.name + ".f64"), dtype="<f8")
        if flat.size != n_rows * n_cols:
            raise DimensionError(
                f"{path}.f64 holds {flat.size} values, sidecar says {n_rows}x{n_cols}")
        block = flat.reshape(n_cols, n_rows).astype(np.float64)
        steps = side.get("steps", [0] * n_cols)
        subiters = side.get("subiters", list(range(n_cols)))
        return cls(n_rows, [block[j].copy() for j in range(n_cols)], list(steps), list(subiters))
