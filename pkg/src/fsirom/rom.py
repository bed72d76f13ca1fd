"""Non-intrusive reduced solid operator.

Offline: POD bases for the force (pressure) and displacement (section)
snapshots, then a regression between their latent coordinates. Online:
``section = decode_u(regress(encode_f(pressure)))``.
"""

from __future__ import annotations

import itertools
import json
import logging
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from ._accel import njit, pick
from .errors import AlignmentError, DimensionError, IllConditionedError, RankError
from .mesh import SnapshotMatrix

log = logging.getLogger(__name__)

DEDUP_RTOL = 1e-10


# --- POD ------------------------------------------------------------------


@dataclass
class PodBasis:
    modes: np.ndarray            # (n_rows, r), orthonormal columns
    singular_values: np.ndarray  # all singular values of the centred snapshots
    mean: np.ndarray             # (n_rows,)
    degenerate: bool = False

    @property
    def r(self) -> int:
        return self.modes.shape[1]

    @property
    def n_rows(self) -> int:
        return self.modes.shape[0]

    def energy_fraction(self) -> float:
        tot = float(np.sum(self.singular_values ** 2))
        if tot == 0.0:
            return 1.0
        return float(np.sum(self.singular_values[:self.r] ** 2) / tot)


def _as_matrix(m) -> np.ndarray:
    if isinstance(m, SnapshotMatrix):
        return m.to_array()
    return np.asarray(m, dtype=np.float64)


def effective_rank(s, shape) -> int:
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s > max(shape) * np.finfo(float).eps * s[0]))


def compute_pod_basis(m, energy: float | None = None, r_fixed: int | None = None,
                      center: bool = True) -> PodBasis:
    """POD of a snapshot matrix by thin SVD of the mean-centred columns.

    Exactly one of ``energy`` (cumulative squared-singular-value fraction)
    and ``r_fixed`` must be given. ``r_fixed`` is clipped to the numerical
    rank; rank-zero data yields a single arbitrary mode flagged degenerate.
    """
    if (energy is None) == (r_fixed is None):
        raise ValueError("give exactly one of energy or r_fixed")
    X = _as_matrix(m)
    if X.ndim != 2 or X.shape[1] < 1:
        raise DimensionError(f"need at least one snapshot column, got shape {X.shape}")
    if energy is not None and not 0 < energy <= 1:
        raise ValueError(f"energy must lie in (0, 1], got {energy}")
    if r_fixed is not None and r_fixed < 1:
        raise ValueError(f"r_fixed must be >= 1, got {r_fixed}")

    mean = X.mean(axis=1) if center else np.zeros(X.shape[0])
    U, s, _ = np.linalg.svd(X - mean[:, None], full_matrices=False)
    rank = effective_rank(s, X.shape)
    if rank == 0:
        if r_fixed is not None and r_fixed > 1:
            raise RankError(f"snapshots have effective rank 0, cannot keep {r_fixed} modes", 0)
        return PodBasis(U[:, :1].copy(), s, mean, degenerate=True)
    if r_fixed is not None:
        r = min(int(r_fixed), rank)
    else:
        cum = np.cumsum(s ** 2) / np.sum(s ** 2)
        r = int(np.searchsorted(cum, energy - 1e-14) + 1)
        r = min(max(r, 1), rank)
    return PodBasis(U[:, :r].copy(), s, mean)


def encode(basis: PodBasis, field_values) -> np.ndarray:
    """Latent coordinates ``modes^T (x - mean)``; accepts a vector or an (n_rows, k) block."""
    x = np.asarray(field_values, dtype=np.float64)
    if x.shape[0] != basis.n_rows:
        raise DimensionError(f"field has {x.shape[0]} rows, basis expects {basis.n_rows}")
    if x.ndim == 1:
        return basis.modes.T @ (x - basis.mean)
    return basis.modes.T @ (x - basis.mean[:, None])


def decode(basis: PodBasis, latent) -> np.ndarray:
    z = np.asarray(latent, dtype=np.float64)
    if z.shape[0] != basis.r:
        raise DimensionError(f"latent has {z.shape[0]} entries, basis has r={basis.r}")
    if z.ndim == 1:
        return basis.mean + basis.modes @ z
    return basis.mean[:, None] + basis.modes @ z


# --- latent regression ------------------------------------------------------


@njit
def _tps(r2):
    # rho^2 ln rho written in terms of rho^2
    if r2 <= 0.0:
        return 0.0
    return 0.5 * r2 * math.log(r2)


@njit
def _tps_matrix_numba(A, B):
    na, nb, d = A.shape[0], B.shape[0], A.shape[1]
    K = np.empty((na, nb))
    for i in range(na):
        for j in range(nb):
            r2 = 0.0
            for k in range(d):
                t = A[i, k] - B[j, k]
                r2 += t * t
            K[i, j] = _tps(r2)
    return K


def _tps_matrix_numpy(A, B):
    r2 = np.sum((A[:, None, :] - B[None, :, :]) ** 2, axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        K = 0.5 * r2 * np.log(r2)
    K[r2 <= 0.0] = 0.0
    return K


@njit
def _tps_predict_numba(x, centers, weights, tail):
    n, d = centers.shape
    m = weights.shape[1]
    out = np.empty(m)
    for j in range(m):
        out[j] = tail[0, j]
        for k in range(d):
            out[j] += tail[k + 1, j] * x[k]
    for i in range(n):
        r2 = 0.0
        for k in range(d):
            t = x[k] - centers[i, k]
            r2 += t * t
        phi = _tps(r2)
        if phi != 0.0:
            for j in range(m):
                out[j] += phi * weights[i, j]
    return out


def _tps_predict_numpy(x, centers, weights, tail):
    K = _tps_matrix_numpy(x[None, :], centers)[0]
    return tail[0] + x @ tail[1:] + K @ weights


tps_matrix = pick(_tps_matrix_numba, _tps_matrix_numpy)
_tps_predict = pick(_tps_predict_numba, _tps_predict_numpy)


def poly_exponents(dim: int, degree: int) -> np.ndarray:
    """All monomial exponent vectors of total degree <= ``degree``, graded order."""
    rows = []
    for deg in range(degree + 1):
        for combo in itertools.combinations_with_replacement(range(dim), deg):
            e = np.zeros(dim, dtype=np.int64)
            for c in combo:
                e[c] += 1
            rows.append(e)
    return np.array(rows, dtype=np.int64).reshape(-1, dim)


def poly_features(X, exponents) -> np.ndarray:
    X = np.atleast_2d(X)
    return np.prod(X[:, None, :] ** exponents[None, :, :], axis=-1)


@dataclass
class LatentRegressor:
    kind: str                       # "tps" or "poly"
    weights: np.ndarray             # tps: (n_centers, d_out); poly: (n_terms, d_out)
    centers: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    tail: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))   # (d_in + 1, d_out)
    exponents: np.ndarray = field(default_factory=lambda: np.zeros((0, 0), dtype=np.int64))
    lam: float = 0.0
    degree: int = 1

    @property
    def d_in(self) -> int:
        return self.centers.shape[1] if self.kind == "tps" else self.exponents.shape[1]

    @property
    def d_out(self) -> int:
        return self.weights.shape[1]

    def __call__(self, x):
        return predict(self, x)


def dedup_keep_last(X, Y, radius):
    """Collapse inputs closer than ``radius``; the latest sample wins."""
    keep_x, keep_y = [], []
    dropped = 0
    for x, y in zip(X, Y):
        if keep_x:
            d = np.max(np.abs(np.asarray(keep_x) - x), axis=1)
            hit = np.nonzero(d <= radius)[0]
            if hit.size:
                keep_x[hit[0]] = x
                keep_y[hit[0]] = y
                dropped += 1
                continue
        keep_x.append(x)
        keep_y.append(y)
    return np.array(keep_x), np.array(keep_y), dropped


def fit_regressor(X, Y, kind: str = "tps", lam: float = 0.0, degree: int = 2,
                  dedup_rtol: float = DEDUP_RTOL) -> LatentRegressor:
    """Fit ``Y ~ f(X)`` with samples in rows.

    ``tps``: thin-plate spline with an affine tail, ridge ``lam`` on the kernel
    block. ``poly``: least squares on all monomials up to ``degree`` (<= 2),
    ridge ``lam`` on the coefficients.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    Y = np.asarray(Y, dtype=np.float64)
    if Y.ndim == 1:
        Y = Y[:, None]
    if X.shape[0] != Y.shape[0]:
        raise DimensionError(f"{X.shape[0]} inputs but {Y.shape[0]} targets")
    n, d = X.shape

    if kind == "poly":
        if not 0 <= degree <= 2:
            raise ValueError(f"polynomial degree must be 0, 1 or 2, got {degree}")
        ex = poly_exponents(d, degree)
        Phi = poly_features(X, ex)
        A = Phi.T @ Phi + lam * np.eye(Phi.shape[1])
        try:
            coef = np.linalg.solve(A, Phi.T @ Y) if lam > 0 else np.linalg.lstsq(Phi, Y, rcond=None)[0]
        except np.linalg.LinAlgError as exc:
            raise IllConditionedError(f"polynomial regression is singular: {exc}") from None
        return LatentRegressor("poly", coef, exponents=ex, lam=float(lam), degree=int(degree))

    if kind != "tps":
        raise ValueError(f"unknown regressor kind {kind!r}")
    radius = dedup_rtol * max(1.0, float(np.max(np.abs(X))))
    C, Yc, dropped = dedup_keep_last(X, Y, radius)
    if dropped:
        warnings.warn(f"{dropped} duplicate latent inputs merged (latest kept)", stacklevel=2)
    nc = C.shape[0]
    if nc < d + 2:
        raise IllConditionedError(
            f"thin-plate fit needs at least {d + 2} distinct samples, got {nc}; "
            "increase the snapshot count or reduce the latent dimension")
    K = tps_matrix(C, C)
    P = np.hstack([np.ones((nc, 1)), C])
    M = np.zeros((nc + d + 1, nc + d + 1))
    M[:nc, :nc] = K + lam * np.eye(nc)
    M[:nc, nc:] = P
    M[nc:, :nc] = P.T
    rhs = np.zeros((nc + d + 1, Y.shape[1]))
    rhs[:nc] = Yc
    sol = _solve_checked(M, rhs)
    return LatentRegressor("tps", sol[:nc], centers=C, tail=sol[nc:], lam=float(lam))


def _solve_checked(M, rhs):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        try:
            sol = lu_solve(lu_factor(M), rhs)
        except (np.linalg.LinAlgError, ValueError) as exc:
            raise IllConditionedError(
                f"thin-plate system is singular ({exc}); increase the dedup radius or lambda") from None
    scale = np.max(np.abs(M)) * np.max(np.abs(sol)) + np.max(np.abs(rhs))
    if not np.all(np.isfinite(sol)) or np.max(np.abs(M @ sol - rhs)) > 1e-8 * scale:
        raise IllConditionedError(
            "thin-plate system is numerically singular; increase the dedup radius or lambda")
    return sol


def predict(reg: LatentRegressor, x) -> np.ndarray:
    """Evaluate the regressor at one latent point (1D) or a batch (rows)."""
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    Xb = np.atleast_2d(x)
    if Xb.shape[1] != reg.d_in:
        raise DimensionError(f"latent input has {Xb.shape[1]} entries, regressor expects {reg.d_in}")
    if reg.kind == "poly":
        out = poly_features(Xb, reg.exponents) @ reg.weights
    elif single:
        return _tps_predict(np.ascontiguousarray(x), reg.centers, reg.weights, reg.tail)
    else:
        K = tps_matrix(np.ascontiguousarray(Xb), reg.centers)
        out = reg.tail[0] + Xb @ reg.tail[1:] + K @ reg.weights
    return out[0] if single else out


# --- reduced solid operator -------------------------------------------------


@dataclass
class SolidRomModel:
    basis_f: PodBasis
    basis_u: PodBasis
    regressor: LatentRegressor
    meta: dict = field(default_factory=dict)

    name = "rom"

    def __post_init__(self):
        if self.regressor.d_in != self.basis_f.r or self.regressor.d_out != self.basis_u.r:
            raise DimensionError(
                f"regressor maps {self.regressor.d_in}->{self.regressor.d_out}, bases have "
                f"r_f={self.basis_f.r}, r_u={self.basis_u.r}")

    def __call__(self, p_field) -> np.ndarray:
        return rom_solid_solve(self, p_field)

    def save(self, path) -> tuple[Path, Path]:
        return save_model(self, path)

    @classmethod
    def load(cls, path) -> "SolidRomModel":
        return load_model(path)


def rom_solid_solve(model: SolidRomModel, p_field) -> np.ndarray:
    z = encode(model.basis_f, p_field)
    return decode(model.basis_u, predict(model.regressor, z))


def train_rom(F, U, r_f: int | None = 4, r_u: int | None = 4, energy: float | None = None,
              kind: str = "tps", lam: float = 0.0, degree: int = 2, meta=None) -> SolidRomModel:
    """Fit POD bases on force and displacement snapshots and a latent regressor between them.

    With ``energy`` set, both mode counts come from the energy threshold and
    ``r_f``/``r_u`` are ignored.
    """
    if isinstance(F, SnapshotMatrix) and isinstance(U, SnapshotMatrix):
        if F.metadata() != U.metadata():
            raise AlignmentError("force and displacement snapshots carry different (step, subiter) tags")
    Fm, Um = _as_matrix(F), _as_matrix(U)
    if Fm.shape[1] != Um.shape[1]:
        raise AlignmentError(f"{Fm.shape[1]} force snapshots vs {Um.shape[1]} displacement snapshots")
    if energy is not None:
        bf = compute_pod_basis(Fm, energy=energy)
        bu = compute_pod_basis(Um, energy=energy)
    else:
        bf = compute_pod_basis(Fm, r_fixed=r_f)
        bu = compute_pod_basis(Um, r_fixed=r_u)
    Zf = encode(bf, Fm).T
    Zu = encode(bu, Um).T
    reg = fit_regressor(Zf, Zu, kind=kind, lam=lam, degree=degree)
    info = {"n_snapshots": int(Fm.shape[1]), "r_f": bf.r, "r_u": bu.r, "kind": kind, "lam": lam,
            "energy_f": bf.energy_fraction(), "energy_u": bu.energy_fraction(),
            "n_centers": int(reg.centers.shape[0]) if kind == "tps" else 0}
    info.update(meta or {})
    return SolidRomModel(bf, bu, reg, info)


# --- model files ---------------------------------------------------------------


def _model_paths(path):
    path = Path(path)
    base = path.name
    for suffix in (".rom.json", ".rom.f64", ".rom"):
        if base.endswith(suffix):
            base = base[: -len(suffix)]
            break
    return path.with_name(base + ".rom.json"), path.with_name(base + ".rom.f64")


def save_model(model: SolidRomModel, path) -> tuple[Path, Path]:
    """Write ``<name>.rom.json`` (manifest) and ``<name>.rom.f64`` (raw little-endian arrays)."""
    man_path, raw_path = _model_paths(path)
    reg = model.regressor
    arrays = {
        "basis_f.modes": model.basis_f.modes, "basis_f.singular_values": model.basis_f.singular_values,
        "basis_f.mean": model.basis_f.mean,
        "basis_u.modes": model.basis_u.modes, "basis_u.singular_values": model.basis_u.singular_values,
        "basis_u.mean": model.basis_u.mean,
        "regressor.weights": reg.weights, "regressor.centers": reg.centers,
        "regressor.tail": reg.tail, "regressor.exponents": reg.exponents.astype(np.float64),
    }
    entries, chunks, offset = [], [], 0
    for name, arr in arrays.items():
        arr = np.asarray(arr, dtype=np.float64)
        # column-major like the snapshot files
        chunks.append(np.asfortranarray(arr).ravel(order="F").astype("<f8"))
        entries.append({"name": name, "shape": list(arr.shape), "offset": offset})
        offset += arr.size
    manifest = {
        "format": "fsirom-rom/1", "dtype": "float64-le", "layout": "column-major",
        "n_values": offset, "arrays": entries,
        "regressor": {"kind": reg.kind, "lam": reg.lam, "degree": reg.degree},
        "degenerate": {"basis_f": model.basis_f.degenerate, "basis_u": model.basis_u.degenerate},
        "dims": {"n_f": model.basis_f.n_rows, "n_u": model.basis_u.n_rows,
                 "r_f": model.basis_f.r, "r_u": model.basis_u.r},
        "provenance": model.meta,
    }
    man_path.parent.mkdir(parents=True, exist_ok=True)
    raw_path.write_bytes(np.concatenate(chunks).tobytes() if chunks else b"")
    man_path.write_text(json.dumps(manifest, indent=1, default=_json_default))
    return man_path, raw_path


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def load_model(path) -> SolidRomModel:
    man_path, raw_path = _model_paths(path)
    man = json.loads(man_path.read_text())
    flat = np.fromfile(raw_path, dtype="<f8")
    if flat.size != man["n_values"]:
        raise DimensionError(f"{raw_path} holds {flat.size} values, manifest says {man['n_values']}")
    arr = {}
    for e in man["arrays"]:
        shape = tuple(e["shape"])
        size = int(np.prod(shape)) if shape else 1
        arr[e["name"]] = np.ascontiguousarray(flat[e["offset"]:e["offset"] + size].reshape(shape, order="F"))
    deg = man.get("degenerate", {})
    bf = PodBasis(arr["basis_f.modes"], arr["basis_f.singular_values"], arr["basis_f.mean"],
                  bool(deg.get("basis_f", False)))
    bu = PodBasis(arr["basis_u.modes"], arr["basis_u.singular_values"], arr["basis_u.mean"],
                  bool(deg.get("basis_u", False)))
    r = man["regressor"]
    reg = LatentRegressor(r["kind"], arr["regressor.weights"], centers=arr["regressor.centers"],
                          tail=arr["regressor.tail"],
                          exponents=arr["regressor.exponents"].astype(np.int64),
                          lam=float(r["lam"]), degree=int(r["degree"]))
    return SolidRomModel(bf, bu, reg, man.get("provenance", {}))
