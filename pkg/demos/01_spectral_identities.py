"""A tour of the spectral core: fields, operators, and the identities
they satisfy at round-off.

Run:  python3 demos/01_spectral_identities.py
"""

import numpy as np

from nse_mdp import (
    Basis, SpectralField, apply_stokes, inner_h, nonlinear_B, norms,
    project_leray, random_field, to_physical, trilinear_b,
)

# A basis holds the truncation, viscosity, and the padded product grid.
basis = Basis(N=8, nu=0.5)
print(f"basis: modes up to N={basis.N}, physical grid {basis.grid_size}^2")

rng = np.random.default_rng(0)
u = random_field(basis, rng)
v = random_field(basis, rng)
w = random_field(basis, rng)

h, vn, l4 = norms(u)
print(f"|u|_H = {h:.4f}   |u|_V = {vn:.4f}   |u|_L4 = {l4:.4f}")

# The Stokes operator is diagonal, so its energy identity is exact.
print("coercivity <Au,u> - nu|u|_V^2 =",
      inner_h(apply_stokes(u), u) - basis.nu * vn ** 2)

# The trilinear form is antisymmetric in its last two slots, which is the
# reason the nonlinearity moves energy around without creating any.
print("b(u,v,w) + b(u,w,v) =", trilinear_b(u, v, w) + trilinear_b(u, w, v))
print("b(u,v,v)            =", trilinear_b(u, v, v))
print("b(u,v,w) - <B(u,v),w> =", trilinear_b(u, v, w) - inner_h(nonlinear_B(u, v), w))

# Ladyzhenskaya-type interpolation, with constant 1, observed:
print("||u||_L4^4 / (|u|_V^2 |u|_H^2) =", l4 ** 4 / (vn ** 2 * h ** 2))

# The Leray projection annihilates gradients and fixes divergence-free
# fields; a gradient field projects to (numerically) nothing.
M = basis.grid_size
x = np.arange(M) * (basis.L / M)
X1, X2 = np.meshgrid(x, x, indexing="ij")
grad_phi = np.stack([-np.sin(X1), 2 * np.cos(2 * X2)])
print("|P_H grad(phi)| max coeff =", np.abs(project_leray(basis, grad_phi).coeffs).max())
print("|P_H u - u|    max coeff =",
      np.abs(project_leray(basis, to_physical(u)).coeffs - u.coeffs).max())
