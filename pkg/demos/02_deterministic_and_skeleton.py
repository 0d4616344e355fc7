"""Deterministic solve, its energy balance, and the linear skeleton map.

Run:  python3 demos/02_deterministic_and_skeleton.py
"""

import numpy as np

from nse_mdp.config import ExperimentConfig
from nse_mdp.dynamics import energy_balance_residual, solve_nse, solve_skeleton
from nse_mdp.spectral import h_norm_sq_coeffs

cfg = ExperimentConfig.defaults()
basis = cfg.basis()
grid = cfg.grid()
noise = cfg.noise(basis)

# u0 solves the unforced-noise (deterministic) equation with the config force.
u0_traj = solve_nse(cfg.u0(basis), noise.f, grid)
print(f"solved {grid.n_steps} steps to T={grid.T}")
print("energy-balance defect:", energy_balance_residual(u0_traj, noise.f))

energies = [h_norm_sq_coeffs(basis, f.coeffs) for f in u0_traj.fields]
print(f"|u(0)|^2 = {energies[0]:.4f} -> |u(T)|^2 = {energies[-1]:.4f}")

# The skeleton equation linearizes around u0 and is driven by a control on
# (marks x steps); the solution map psi -> eta is exactly linear.
psi = cfg.psi_values(grid)
eta = solve_skeleton(psi, u0_traj, noise, grid)
eta2 = solve_skeleton(2.0 * psi, u0_traj, noise, grid)
gap = max(np.abs(eta2[i].coeffs - 2 * eta[i].coeffs).max() for i in range(len(eta)))
print("linearity defect of the skeleton map:", gap)
print(f"|eta(T)|_H = {np.sqrt(h_norm_sq_coeffs(basis, eta[-1].coeffs)):.4f}")
