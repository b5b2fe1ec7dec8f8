"""Simulation and intensity optimization of a realistic optical quantum scissors."""

__version__ = "0.1.0"

from .fock import DensityMatrix, FockVector, ModeLayout
from .optics import BeamSplitterParams, DetectorModel, PdcParams
from .pipeline import (
    NoEventError,
    SchemeConfig,
    TargetQubit,
    TruncationResult,
    fidelity_to_qubit,
    ideal_fidelity,
    ideal_truncated_state,
    run_branches,
    run_dense,
)
from .optimizer import OptimumPoint, ScanSpec, calibrate_rep_rate, maximize, scan
