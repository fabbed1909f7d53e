"""Simulation and analysis toolkit for full-loop Stern-Gerlach interferometry."""

__version__ = "0.1.0"

from .analysis import FitResult, extract_lp, extract_lz, fit_gaussian_sine, fit_sine
from .errors import ConfigError, FieldDomainError, NumericalError
from .feasibility import MacroObjectSpec, feasibility_report
from .interferometer import (
    PulseTimeline,
    RunRecord,
    Scheme,
    build_timeline,
    gaussian_overlap,
    hd_contrast,
    relative_phase,
    run,
)
from .magnetics import CalibratedAcceleration, RectWire, ThinWire, ThreeWireQuadrupole, UniformGradient
from .optimizer import OptimizationProblem, minimize_residuals, optimal_t2_curve
from .spinsys import SpinState, breit_rabi_energy
from .wavepacket import CondensateParams, GaussianState, coherence_scales, propagate, released_state

__all__ = [
    "CalibratedAcceleration",
    "CondensateParams",
    "ConfigError",
    "FieldDomainError",
    "FitResult",
    "GaussianState",
    "MacroObjectSpec",
    "NumericalError",
    "OptimizationProblem",
    "PulseTimeline",
    "RectWire",
    "RunRecord",
    "Scheme",
    "SpinState",
    "ThinWire",
    "ThreeWireQuadrupole",
    "UniformGradient",
    "breit_rabi_energy",
    "build_timeline",
    "coherence_scales",
    "extract_lp",
    "extract_lz",
    "feasibility_report",
    "fit_gaussian_sine",
    "fit_sine",
    "gaussian_overlap",
    "hd_contrast",
    "minimize_residuals",
    "optimal_t2_curve",
    "propagate",
    "relative_phase",
    "released_state",
    "run",
]
