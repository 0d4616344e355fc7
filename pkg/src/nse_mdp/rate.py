"""Moderate-deviation rate function by least-norm control of the skeleton map.

For a frozen reference trajectory u0 the discrete skeleton solver is an
exactly linear map Lam: psi -> eta(T).  The rate of reaching a terminal
state z is

    I(z) = min { 1/2 ||psi||^2_{L2(theta_T)} : Lam psi = z },

computed matrix-free by conjugate gradients on the normal operator
Lam Lam^*: solve Lam Lam^* w = z, then psi^* = Lam^* w.

The adjoint here is the transpose of the discrete stepper
(discretize-then-optimize), not a discretization of a continuous adjoint
equation, so the identity <Lam psi, v>_H = <psi, Lam^* v>_{L2(theta_T)}
holds at round-off and is enforced by tests.  Writing one forward step as

    eta_{n+1} = S_n eta_n + T_n psi_n,
    S_n = E + dt/2 (E L_n + L'_n E + dt L'_n E L_n),

with L_n (resp. L'_n) the linearization eta -> -B(eta,u0)-B(u0,eta) at the
step's left (right) state and E the diffusion factor, the backward
recursion is p_n = S_n^* p_{n+1} with terminal p_K = v, and

    (Lam^* v)[i, n] = 1/2 ( <G(u0(t_n), y_i),     E (I + dt L'^*_n) p_{n+1}>
                          + <G(u0(t_{n+1}), y_i), p_{n+1}> ),

the theta_i*dt quadrature weights of L2(theta_T) cancelling against the
same weights in the forcing.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import TimeGrid, TimeGridMismatchError, decay_factors, solve_skeleton
from .noise import ControlField, NoiseModel
from .spectral import (
    SpectralField,
    Trajectory,
    advect_coeffs,
    advect_transpose_coeffs,
    h_norm_sq_coeffs,
    random_field,
    symmetrize_coeffs,
)


class RateNotConvergedError(RuntimeError):
    """CG failed to reach the residual tolerance; carries the best iterate."""

    def __init__(self, result: "RateResult", message: str):
        self.result = result
        super().__init__(message)


@dataclass
class RateResult:
    I: float
    psi_star: ControlField
    residual: float            # |Lam psi* - target|_H / |target|_H
    iterations: int
    converged: bool
    regularized: bool = False


class SkeletonOperator:
    """The linear map psi -> eta(T) induced by the discrete skeleton solver.

    Immutable after construction; caches the per-step noise directions
    G(u0(t_n), y_i) that both the forward and the adjoint sweep use.
    """

    def __init__(self, u0_traj: Trajectory, noise: NoiseModel, grid: TimeGrid):
        noise.marks.require_finite("SkeletonOperator")
        if len(u0_traj) != grid.n_steps + 1 or abs(u0_traj.dt - grid.dt) > 1e-12 * grid.dt:
            raise TimeGridMismatchError("u0 trajectory does not match the grid")
        self.u0_traj = u0_traj
        self.noise = noise
        self.grid = grid
        self.basis = u0_traj.basis
        m = noise.marks.n_marks
        K = grid.n_steps
        nx = self.basis.n_axis
        # g[n, i] = coefficients of G(u0(t_n), y_i)
        self._g = np.empty((K + 1, m, nx, nx), dtype=np.complex128)
        for n in range(K + 1):
            for i in range(m):
                self._g[n, i] = noise.G.apply(u0_traj[n].coeffs, i)
        self._decay = decay_factors(self.basis, grid.dt)

    @property
    def n_marks(self) -> int:
        return self.noise.marks.n_marks

    def control_norm_sq(self, psi_vals: np.ndarray) -> float:
        """||psi||^2 in L2(theta_T) with the operator's quadrature weights."""
        w = self.noise.marks.weights
        return float(w @ (psi_vals ** 2).sum(axis=1)) * self.grid.dt

    def make_control(self, psi_vals: np.ndarray, a_eps: float = 1.0) -> ControlField:
        return ControlField.from_psi(self.noise.marks, self.grid, psi_vals, a_eps)

    # -- forward -----------------------------------------------------------

    def apply_forward(self, psi) -> SpectralField:
        """Terminal state eta(T) of the skeleton solve driven by psi."""
        eta = solve_skeleton(psi, self.u0_traj, self.noise, self.grid)
        return eta[-1]

    # -- adjoint -----------------------------------------------------------

    def _lin_adjoint(self, cc: np.ndarray, u0c: np.ndarray) -> np.ndarray:
        # adjoint of eta -> -B(eta, u0) - B(u0, eta) in H:
        #   w -> -P_H((grad u0)^T w) + B(u0, w)
        return -advect_transpose_coeffs(self.basis, u0c, cc) \
            + advect_coeffs(self.basis, u0c, cc)

    def apply_adjoint(self, v: SpectralField) -> np.ndarray:
        """(m, n_steps) array chi with <Lam psi, v>_H = <psi, chi>_{L2(theta_T)}."""
        if v.basis != self.basis:
            raise TimeGridMismatchError("terminal field lives on a different basis")
        basis = self.basis
        L2 = basis.L ** 2
        dt = self.grid.dt
        E = self._decay
        K = self.grid.n_steps
        chi = np.empty((self.n_marks, K))
        p = v.coeffs.copy()
        for n in range(K - 1, -1, -1):
            u0a = self.u0_traj[n].coeffs
            u0b = self.u0_traj[n + 1].coeffs
            r = self._lin_adjoint(p, u0b)
            a1 = E * p
            b1 = E * r
            q = a1 + dt * b1
            gq = self._g[n]
            gp = self._g[n + 1]
            chi[:, n] = 0.5 * L2 * (
                np.sum(gq.real * q.real + gq.imag * q.imag, axis=(1, 2))
                + np.sum(gp.real * p.real + gp.imag * p.imag, axis=(1, 2)))
            p = a1 + 0.5 * dt * (b1 + self._lin_adjoint(q, u0a))
            p = symmetrize_coeffs(basis, p)
        return chi


def _inner_field(basis, c, d) -> float:
    return basis.L ** 2 * float(np.sum(c.real * d.real + c.imag * d.imag))


def rate_terminal(op: SkeletonOperator, target: SpectralField, *,
                  tol: float = 1e-8, max_iter: int = 500,
                  mu: float = 0.0) -> RateResult:
    """Least-norm control reaching ``target`` at time T, and its cost.

    Conjugate gradients on (Lam Lam^* + mu I) w = target, matrix-free; each
    iteration is one adjoint plus one forward solve.  With the default
    mu = 0 a run that cannot reach ``tol`` raises RateNotConvergedError
    carrying the best iterate; with mu > 0 the regularized least-norm
    solution is returned and flagged, the (unregularized) residual telling
    the caller how reachable the target was.
    """
    basis = op.basis
    tnorm = np.sqrt(h_norm_sq_coeffs(basis, target.coeffs))
    if tnorm == 0.0:
        psi0 = np.zeros((op.n_marks, op.grid.n_steps))
        return RateResult(I=0.0, psi_star=op.make_control(psi0), residual=0.0,
                          iterations=0, converged=True, regularized=mu > 0)

    def normal_apply(wc):
        chi = op.apply_adjoint(SpectralField(basis, wc, _skip_checks=True))
        out = op.apply_forward(chi).coeffs
        if mu > 0:
            out = out + mu * wc
        return out, chi

    b = target.coeffs
    w = np.zeros_like(b)
    r = b.copy()
    rs = _inner_field(basis, r, r)
    p = r.copy()
    best_w, best_rs = w.copy(), rs
    iterations = 0
    stall = 0
    for it in range(1, max_iter + 1):
        try:
            q, _ = normal_apply(p)
        except Exception:
            break   # iterate grew past the solver caps: target unreachable
        pq = _inner_field(basis, p, q)
        if pq <= 0 or not np.isfinite(pq):
            break   # loss of positivity; stop on the best iterate
        alpha = rs / pq
        w = w + alpha * p
        r = r - alpha * q
        rs_new = _inner_field(basis, r, r)
        iterations = it
        if rs_new < 0.999 * best_rs:
            stall = 0
        else:
            stall += 1
            if stall >= 10:
                break   # stagnating residual: component outside range(Lam)
        if rs_new < best_rs:
            best_rs, best_w = rs_new, w.copy()
        if np.sqrt(rs_new) <= tol * tnorm:
            break
        p = r + (rs_new / rs) * p
        rs = rs_new

    psi = op.apply_adjoint(SpectralField(basis, best_w, _skip_checks=True))
    reached = op.apply_forward(psi)
    residual = float(np.sqrt(h_norm_sq_coeffs(basis, reached.coeffs - b)) / tnorm)
    result = RateResult(
        I=0.5 * op.control_norm_sq(psi),
        psi_star=op.make_control(psi),
        residual=residual,
        iterations=iterations,
        converged=residual <= tol * 10,
        regularized=mu > 0)
    if not result.converged and mu == 0.0:
        raise RateNotConvergedError(
            result, f"CG residual {residual:.3g} after {iterations} iterations "
                    f"(target may be outside the range of the skeleton map)")
    return result


def mode_directions(basis) -> list:
    """Unit fields exciting each retained mode, real and imaginary phases.

    One representative per conjugate pair; covers the whole real field
    space.
    """
    out = []
    N = basis.N
    seen = set()
    for k1 in range(-N, N + 1):
        for k2 in range(-N, N + 1):
            if (k1, k2) == (0, 0) or (-k1, -k2) in seen:
                continue
            seen.add((k1, k2))
            for val in (1.0, 1.0j):
                f = SpectralField.from_modes(basis, {(k1, k2): val})
                out.append(f)
    return out


@dataclass
class LevelSetResult:
    I_min: float
    direction: SpectralField
    target: SpectralField
    table: list                 # (direction index, I, residual) per direction
    skipped: int                # directions outside the reachable range


def principal_direction(op: SkeletonOperator, *, iters: int = 40,
                        seed: int = 0) -> SpectralField:
    """Dominant eigenvector of the reachability Gramian Lam Lam^*.

    Matrix-free power iteration; this is the terminal direction cheapest to
    reach per unit control norm, so it is where the level-set infimum of the
    rate function is attained.
    """
    basis = op.basis
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, 77])))
    v = random_field(basis, rng).coeffs
    for _ in range(iters):
        v = op.apply_forward(op.apply_adjoint(
            SpectralField(basis, v, _skip_checks=True))).coeffs
        n = np.sqrt(h_norm_sq_coeffs(basis, v))
        if n == 0:
            break
        v = v / n
    return SpectralField(basis, v, _skip_checks=True)


def rate_level_set(op: SkeletonOperator, r: float, norm_kind: str = "h", *,
                   directions=None, n_random: int = 32, seed: int = 0,
                   tol: float = 1e-8, max_iter: int = 500, mu: float = 0.0,
                   residual_cap: float = 1e-6,
                   include_principal: bool = True) -> LevelSetResult:
    """Approximate inf { I(eta) : |eta(T)| >= r } by a multi-start search.

    Directions are the basis modes plus ``n_random`` random unit fields
    (or an explicit list); each is normalized in the chosen norm, solved at
    unit radius, and scaled by r^2 through the quadratic homogeneity of I.
    With ``include_principal`` the dominant Gramian eigenvector joins the
    set, which pins the infimum when the map is rank-deficient.
    Directions whose least-norm solve cannot reach them (residual above
    ``residual_cap``) have I = +infinity and are skipped; this is the
    empty-constraint-set convention of the rate function, not an error.
    """
    if norm_kind not in ("h", "v"):
        raise ValueError("norm_kind must be 'h' or 'v'")
    basis = op.basis
    if r < 0:
        raise ValueError("radius must be >= 0")
    if r == 0.0:
        z = SpectralField.zero(basis)
        return LevelSetResult(I_min=0.0, direction=z, target=z, table=[], skipped=0)
    if directions is None:
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed])))
        directions = mode_directions(basis) + \
            [random_field(basis, rng) for _ in range(n_random)]
        if include_principal:
            directions.append(principal_direction(op, seed=seed))

    def norm_of(f: SpectralField) -> float:
        from .spectral import v_norm_sq_coeffs
        sq = h_norm_sq_coeffs(basis, f.coeffs) if norm_kind == "h" \
            else v_norm_sq_coeffs(basis, f.coeffs)
        return float(np.sqrt(sq))

    best = None
    table = []
    skipped = 0
    for idx, d in enumerate(directions):
        nd = norm_of(d)
        if nd == 0:
            continue
        unit = (1.0 / nd) * d
        try:
            res = rate_terminal(op, unit, tol=tol, max_iter=max_iter, mu=mu)
        except RateNotConvergedError as err:
            res = err.result
        if not np.isfinite(res.I):
            raise RateNotConvergedError(res, f"direction {idx}: non-finite rate")
        if res.residual > residual_cap:
            skipped += 1
            table.append((idx, float("inf"), res.residual))
            continue
        I_r = r * r * res.I
        table.append((idx, I_r, res.residual))
        if best is None or I_r < best[0]:
            best = (I_r, unit)
    if best is None:
        raise RateNotConvergedError(
            RateResult(float("inf"), op.make_control(np.zeros((op.n_marks, op.grid.n_steps))),
                       float("inf"), 0, False),
            "no direction in the search set is reachable by the skeleton map")
    return LevelSetResult(I_min=best[0], direction=best[1], target=r * best[1],
                          table=table, skipped=skipped)
