"""Verification toolkit for 2-D stochastic Navier-Stokes dynamics with jump noise.

Subpackages
-----------
spectral    divergence-free Fourier representation and the operators A, B, b, P_H
dynamics    deterministic and linearized (skeleton) time integration
noise       mark space, Poisson random measures, controls, the entropy cost
stochastic  jump-driven SPDE simulation and ensembles
rate        moderate-deviation rate function by adjoint least-norm control
experiments sweep orchestration, persisted CSV/JSON outputs
cli         command-line entry point
"""

from .spectral import (
    Basis,
    SpectralField,
    Trajectory,
    apply_stokes,
    inner_h,
    nonlinear_B,
    norms,
    project_leray,
    random_field,
    to_physical,
    trilinear_b,
)

__version__ = "0.1.0"
