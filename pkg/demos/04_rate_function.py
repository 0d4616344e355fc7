"""Compute the moderate-deviation rate of reaching a terminal state, and
check the optimizer against what the entropy cost says it should be.

Run:  python3 demos/04_rate_function.py
"""

import numpy as np

from nse_mdp.config import ExperimentConfig
from nse_mdp.dynamics import solve_nse, solve_skeleton
from nse_mdp.noise import cost_LT
from nse_mdp.rate import SkeletonOperator, rate_level_set, rate_terminal
from nse_mdp.spectral import h_norm_sq_coeffs

cfg = ExperimentConfig.defaults().override("grid", "n_steps", 50)
basis = cfg.tail_basis()          # small basis keeps the solves quick
grid = cfg.tail_grid()
noise = cfg.noise(basis)
u0_traj = solve_nse(cfg.u0(basis), noise.f, grid)
op = SkeletonOperator(u0_traj, noise, grid)

# Reach the state the bounded reference control produces; the least-norm
# optimizer must find a control at least as cheap.
psi_ref = cfg.psi_values(grid)
target = solve_skeleton(psi_ref, u0_traj, noise, grid)[-1]
half_ref = 0.5 * float((noise.marks.weights @ (psi_ref ** 2).sum(axis=1)) * grid.dt)

res = rate_terminal(op, target, tol=1e-9, max_iter=400)
print(f"target |eta(T)|_H = {np.sqrt(h_norm_sq_coeffs(basis, target.coeffs)):.4f}")
print(f"I(target) = {res.I:.6f}  (reference control cost {half_ref:.6f})")
print(f"residual {res.residual:.2e} after {res.iterations} CG iterations")

# The entropy cost of the tilted intensity 1 + a psi* matches I as a -> 0.
for a in (1e-1, 1e-2, 1e-3):
    phi = 1.0 + a * res.psi_star.values
    print(f"  L_T(1 + {a:g} psi*)/{a:g}^2 = "
          f"{cost_LT(phi, noise.marks, grid) / a**2:.6f}")

# Cheapest way to push |eta(T)|_H past a level r: quadratic in r.
for r in (1.0, 2.0):
    ls = rate_level_set(op, r, "h", n_random=8, seed=3, tol=1e-9, max_iter=400)
    print(f"inf {{ I : |eta(T)|_H >= {r} }} = {ls.I_min:.4f} "
          f"({ls.skipped} unreachable directions skipped)")
