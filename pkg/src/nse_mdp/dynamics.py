"""Time integration of the deterministic equation and its linearization.

The stepper is an exponential integrating-factor Heun scheme: the Stokes
part is integrated exactly per mode through exp(-nu*|kappa|^2*dt), the
advection and forcing explicitly in two stages,

    F0   = F(u_n, t_n)
    pred = E (u_n + dt F0)
    u_{n+1} = E u_n + dt/2 (E F0 + F(pred, t_{n+1})),   E = exp(-nu*|kappa|^2 dt).

The scheme is second order, unconditionally stable in the stiff diffusion,
and, crucially for the rate-function module, each step is an affine-linear
map of its inputs, so the discrete skeleton solution operator is exactly
linear in the control.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .spectral import (
    Basis,
    SpectralField,
    Trajectory,
    advect_coeffs,
    advect_self_coeffs,
    h_norm_sq_coeffs,
    inner_h,
    to_physical_coeffs,
    v_norm_sq_coeffs,
)

log = logging.getLogger(__name__)


class TimeGridMismatchError(ValueError):
    """Inputs defined on different time grids were combined."""


class DivergedError(RuntimeError):
    """A run produced non-finite or runaway coefficients."""

    def __init__(self, step: int, message: str = ""):
        self.step = step
        super().__init__(message or f"solution diverged at step {step}")


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid over [0, T] with n_steps steps."""

    T: float
    n_steps: int

    def __post_init__(self):
        if self.n_steps < 1:
            raise ValueError("n_steps must be >= 1")
        if self.T <= 0:
            raise ValueError("T must be > 0")

    @property
    def dt(self) -> float:
        return self.T / self.n_steps

    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.n_steps + 1)


class ForceSpec:
    """Deterministic force: a rule t -> SpectralField on a fixed basis."""

    def __init__(self, basis: Basis, fn=None):
        self.basis = basis
        self._fn = fn

    @staticmethod
    def zero(basis: Basis) -> "ForceSpec":
        return ForceSpec(basis, None)

    @staticmethod
    def constant(field: SpectralField) -> "ForceSpec":
        return ForceSpec(field.basis, lambda t: field)

    @staticmethod
    def sinusoidal(field: SpectralField, period: float) -> "ForceSpec":
        """f(t) = sin(pi t / period) * field; vanishes at t = 0."""
        return ForceSpec(field.basis,
                         lambda t: math.sin(math.pi * t / period) * field)

    def coeffs_at(self, t: float):
        """Coefficient array of f(t), or None when the force is zero."""
        if self._fn is None:
            return None
        return self._fn(t).coeffs


def decay_factors(basis: Basis, dt: float) -> np.ndarray:
    """Per-mode exact diffusion factor exp(-nu*|kappa|^2*dt)."""
    return np.exp(-basis.stokes_symbol * dt)


def heun_if_step(c, dt, decay, rhs):
    """One integrating-factor Heun step; rhs(c, stage) gives the explicit part.

    Works on coefficient arrays with arbitrary leading batch dimensions.
    """
    f0 = rhs(c, 0)
    pred = decay * (c + dt * f0)
    f1 = rhs(pred, 1)
    return decay * c + (0.5 * dt) * (decay * f0 + f1)


def _check_diverged(c, step: int, cap: float):
    m = np.abs(c).max()
    if not np.isfinite(m) or m > cap:
        raise DivergedError(step)


def cfl_advisory(basis: Basis, u0: SpectralField, dt: float):
    """Log a warning when the explicit advection step looks under-resolved."""
    u1, u2 = to_physical_coeffs(basis, u0.coeffs)
    umax = float(np.sqrt(u1 ** 2 + u2 ** 2).max())
    kmax = math.sqrt(2.0) * basis.N * 2 * math.pi / basis.L
    if dt * umax * kmax > 1.0:
        log.warning("advisory: dt*|u|max*kmax = %.3g > 1; explicit advection "
                    "step may be unstable", dt * umax * kmax)


DIVERGENCE_CAP = 1e8       # any |c_k| above this aborts a run
DEFAULT_ENERGY_CAP = 1e6   # reject initial states with |u0|_H^2 above this


def solve_nse(u0: SpectralField, f: ForceSpec, grid: TimeGrid, *,
              energy_cap: float = DEFAULT_ENERGY_CAP) -> Trajectory:
    """Integrate du + Au dt + B(u) dt = f dt from u(0) = u0."""
    basis = u0.basis
    e0 = h_norm_sq_coeffs(basis, u0.coeffs)
    if e0 > energy_cap:
        raise ValueError(
            f"initial energy |u0|_H^2 = {e0:.3g} exceeds the cap {energy_cap:.3g}; "
            "the explicit advection step is not trustworthy at this amplitude")
    dt = grid.dt
    cfl_advisory(basis, u0, dt)
    decay = decay_factors(basis, dt)
    times = grid.times()
    # batch dimension of 1 so the arithmetic matches the ensemble engine
    # operation for operation (the G = 0 stochastic path must reproduce
    # this solver bitwise)
    c = np.broadcast_to(u0.coeffs, (1,) + u0.coeffs.shape).copy()
    fields = [SpectralField(basis, c[0], _skip_checks=True)]
    for n in range(grid.n_steps):
        def rhs(cc, stage, n=n):
            out = -advect_self_coeffs(basis, cc)
            fc = f.coeffs_at(times[n + 1] if stage else times[n])
            if fc is not None:
                out = out + fc
            return out
        c = heun_if_step(c, dt, decay, rhs)
        _check_diverged(c, n + 1, DIVERGENCE_CAP)
        fields.append(SpectralField(basis, c[0], _skip_checks=True))
    return Trajectory(t0=0.0, T=grid.T, dt=dt, fields=fields)


def _psi_values(psi) -> np.ndarray:
    """Accept a ControlField or a bare (m, n_steps) array of psi values."""
    if hasattr(psi, "as_psi"):
        return psi.as_psi()
    return np.asarray(psi, dtype=float)


def linearized_rhs(basis: Basis, eta_c, u0_c):
    """-B(eta, u0) - B(u0, eta) for coefficient arrays (batched)."""
    return -advect_coeffs(basis, eta_c, u0_c) - advect_coeffs(basis, u0_c, eta_c)


def skeleton_forcing(noise, u0_field: SpectralField, psi_col: np.ndarray):
    """sum_i psi_i * G(u0, y_i) * theta_i as a coefficient array."""
    weights = psi_col * noise.marks.weights
    return noise.G.combine(weights, u0_field.coeffs)


def solve_skeleton(psi, u0_traj: Trajectory, noise, grid: TimeGrid) -> Trajectory:
    """Solve the linearization around u0 forced by the psi-weighted noise map.

        d eta/dt = -A eta - B(eta, u0) - B(u0, eta)
                   + sum_i psi(y_i, t) G(u0(t), y_i) theta_i,    eta(0) = 0.

    psi holds one value per (mark, step), constant on each step; the map
    psi -> eta is exactly linear.
    """
    basis = u0_traj.basis
    if len(u0_traj) != grid.n_steps + 1 or abs(u0_traj.dt - grid.dt) > 1e-12 * grid.dt:
        raise TimeGridMismatchError("u0 trajectory does not match the time grid")
    vals = _psi_values(psi)
    if vals.shape != (len(noise.marks.weights), grid.n_steps):
        raise TimeGridMismatchError(
            f"control shape {vals.shape} != {(len(noise.marks.weights), grid.n_steps)}")
    dt = grid.dt
    decay = decay_factors(basis, dt)
    c = np.zeros_like(u0_traj[0].coeffs)
    fields = [SpectralField(basis, c, _skip_checks=True)]
    for n in range(grid.n_steps):
        phi0 = skeleton_forcing(noise, u0_traj[n], vals[:, n])
        phi1 = skeleton_forcing(noise, u0_traj[n + 1], vals[:, n])

        def rhs(cc, stage, n=n, phi0=phi0, phi1=phi1):
            u0c = u0_traj[n + 1].coeffs if stage else u0_traj[n].coeffs
            return linearized_rhs(basis, cc, u0c) + (phi1 if stage else phi0)
        c = heun_if_step(c, dt, decay, rhs)
        _check_diverged(c, n + 1, DIVERGENCE_CAP)
        fields.append(SpectralField(basis, c, _skip_checks=True))
    return Trajectory(t0=0.0, T=grid.T, dt=dt, fields=fields)


def solve_mild_forced(forcing, grid: TimeGrid) -> Trajectory:
    """Solve dZ = -AZ dt + f dt, Z(0) = 0, with f given on the grid points.

    ``forcing`` is a sequence of n_steps+1 SpectralFields (or a Trajectory);
    the same Heun stages as the full solver are used, with the advection
    terms absent.
    """
    fields_in = list(forcing)
    if len(fields_in) != grid.n_steps + 1:
        raise TimeGridMismatchError(
            f"need {grid.n_steps + 1} forcing fields, got {len(fields_in)}")
    basis = fields_in[0].basis
    dt = grid.dt
    decay = decay_factors(basis, dt)
    c = np.zeros_like(fields_in[0].coeffs)
    out = [SpectralField(basis, c, _skip_checks=True)]
    for n in range(grid.n_steps):
        def rhs(cc, stage, n=n):
            return fields_in[n + 1].coeffs if stage else fields_in[n].coeffs
        c = heun_if_step(c, dt, decay, rhs)
        out.append(SpectralField(basis, c, _skip_checks=True))
    return Trajectory(t0=0.0, T=grid.T, dt=dt, fields=out)


# ---------------------------------------------------------------------------
# diagnostics
# ---------------------------------------------------------------------------

def energy_balance_residual(traj: Trajectory, f: ForceSpec) -> float:
    """Max over grid times of the discrete energy-balance defect.

        |u(t)|^2 + 2 nu int_0^t |u|_V^2 ds - |u0|^2 - 2 int_0^t <f, u> ds

    Time integrals by the trapezoidal rule; O(dt^2) for the Heun scheme.
    """
    basis = traj.basis
    times = traj.times()
    e = np.array([h_norm_sq_coeffs(basis, u.coeffs) for u in traj.fields])
    d = np.array([v_norm_sq_coeffs(basis, u.coeffs) for u in traj.fields])
    p = np.zeros(len(traj))
    for i, t in enumerate(times):
        fc = f.coeffs_at(t)
        if fc is not None:
            p[i] = inner_h(SpectralField(basis, fc, _skip_checks=True), traj[i])
    dt = traj.dt
    cum_d = np.concatenate([[0.0], np.cumsum(0.5 * dt * (d[1:] + d[:-1]))])
    cum_p = np.concatenate([[0.0], np.cumsum(0.5 * dt * (p[1:] + p[:-1]))])
    res = e + 2 * basis.nu * cum_d - e[0] - 2 * cum_p
    return float(np.abs(res).max())
