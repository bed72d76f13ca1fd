"""Partitioned 1D tube FSI with a non-intrusive reduced-order solid operator."""

from ._accel import BACKEND
from .coupling import CouplingConfig, CouplingDriver, advance_time_step, iqn_ils_update, qr_filter
from .errors import (AlignmentError, ConfigError, DimensionError, FsiromError, IllConditionedError,
                     IntegrationBlowup, OutOfRangeError, PreconditionError, RankError, SolverFailure,
                     StepFailure)
from .fluid import FluidConfig, FluidSolver
from .harness import RunConfig, run_fom_fom, run_rom_fom, speedup_report
from .mesh import Mesh1D, SnapshotMatrix, TubeState
from .rom import SolidRomModel, compute_pod_basis, fit_regressor, load_model, save_model, train_rom
from .signal import DuffingParams, integrate_signal
from .solid import ConstitutiveLaw, FomSolid, GeomMaterial, hoop_stress, section_from_pressure, solid_solve

__version__ = "0.1.0"
