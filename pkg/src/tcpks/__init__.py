"""Numerical laboratory for chemotaxis coupled to Navier-Stokes perturbations of Taylor-Couette flow.

Modules:
    baseflow: run parameters and the Taylor-Couette base flow.
    discretization: radial grid, angular transforms and flat-measure norms.
    elliptic: per-mode radial solvers and checks of the elliptic estimates.
    dynamics: Crank-Nicolson / Adams-Bashforth time stepping and run drivers.
    diagnostics: X_a^k energies, decay-rate fits and scaling exponents.
    lab: configuration, checkpoints and the ``tcpks`` command line.
"""

from .baseflow import SimParams, shear_rate, tc_velocity, tc_vorticity

__all__ = ["SimParams", "shear_rate", "tc_velocity", "tc_vorticity"]
__version__ = "0.1.0"
