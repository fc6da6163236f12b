"""Nodal sets of parabolic solutions with Gevrey coefficients on the torus."""
from .fourier import SpectralField
from .coeffs import CoefficientSet, GevreyParams
from .solver import SolverConfig, solve
from .experiment import ExperimentConfig, run_sweep, verify_suite

__all__ = ["SpectralField", "CoefficientSet", "GevreyParams", "SolverConfig", "solve",
           "ExperimentConfig", "run_sweep", "verify_suite"]
__version__ = "0.1.0"
