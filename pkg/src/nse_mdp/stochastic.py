"""Jump-driven SPDE simulation: u^eps, the controlled process, ensembles.

Time stepping uses the same integrating-factor Heun drift as the
deterministic solver (bitwise the same code path when G = 0), plus a
fixed-grid jump update: per step and mark the Poisson increment DN_i is
drawn at the running intensity and the state receives

    (eps * DN_i - theta_i * dt) * G(u(t-), y_i),

with G frozen at the pre-step (left-limit) state.  For the controlled
process the tilted measure has intensity (1/eps) * phi; combining its
compensator with the extra drift G(X)(phi - 1) theta dt collapses to the
same increment formula with thinned counts, which is what is implemented.

Counts are realized by count-level thinning: base counts are Poisson at
intensity (1/eps) * r_max * theta_i * dt and retained counts are Binomial
(base, phi/r_max), the exact law of event-level thinning for controls that
are constant on each step.  With phi identically 1 the binomial stage is
skipped, so a unit control reproduces the plain simulator bit for bit.

Replicas run in lockstep over mode arrays of shape (R, 2N+1, 2N+1); each
replica draws its jump counts from an independent substream derived from
(seed, replica-index), so results do not depend on chunking or thread
count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dynamics import (
    DIVERGENCE_CAP,
    DivergedError,
    TimeGrid,
    TimeGridMismatchError,
    decay_factors,
    heun_if_step,
)
from .noise import DEFAULT_EVENT_BUDGET, ControlField, EventBudgetError, NoiseModel, replica_rng
from .spectral import (
    SpectralField,
    Trajectory,
    advect_self_coeffs,
    h_norm_sq_coeffs,
    v_norm_sq_coeffs,
)

DEFAULT_CHUNK = 16384


@dataclass(frozen=True)
class ScalingSpec:
    """Moderate-deviation scale a(eps) = eps**gamma with 0 < gamma < 1/2."""

    eps: float
    gamma: float = 0.4

    def __post_init__(self):
        if not 0 < self.eps <= 1:
            raise ValueError("eps must lie in (0, 1]")
        if not 0 < self.gamma < 0.5:
            raise ValueError("gamma must lie in (0, 1/2) so that eps/a^2 -> 0")

    @property
    def a(self) -> float:
        return self.eps ** self.gamma

    @property
    def speed(self) -> float:
        """LDP speed eps / a(eps)^2 = eps**(1 - 2*gamma)."""
        return self.eps ** (1.0 - 2.0 * self.gamma)


@dataclass
class EnsembleResult:
    """Per-replica scalar diagnostics of one ensemble run."""

    replicas: np.ndarray          # replica indices
    sup_h2: np.ndarray            # sup_t |X|_H^2
    int_v2: np.ndarray            # int_0^T |X|_V^2 dt
    terminal_h2: np.ndarray       # |X(T)|_H^2
    sup_diff_h2: np.ndarray = None      # vs reference trajectory, if given
    int_diff_v2: np.ndarray = None
    terminal_diff_h2: np.ndarray = None
    trajectories: list = None
    total_jumps: np.ndarray = None


def _phi_values(phi, noise, grid):
    if phi is None:
        return None
    if isinstance(phi, ControlField):
        vals = phi.as_phi()
    else:
        vals = np.asarray(phi, dtype=float)
    if vals.shape != (noise.marks.n_marks, grid.n_steps):
        raise TimeGridMismatchError(
            f"control shape {vals.shape} != {(noise.marks.n_marks, grid.n_steps)}")
    if np.any(vals < 0):
        raise ValueError("phi must be nonnegative")
    if np.all(vals == 1.0):
        return None     # unit control: identical to the plain simulator
    return vals


def worker_count() -> int:
    """Worker pool bound from the NSE_MDP_THREADS environment variable."""
    import os
    try:
        return max(1, int(os.environ.get("NSE_MDP_THREADS", "1")))
    except ValueError:
        return 1


def run_jump_ensemble(scaling: ScalingSpec, u0: SpectralField, noise: NoiseModel,
                      grid: TimeGrid, seed: int, *, phi=None,
                      replicas=1, first_replica: int = 0,
                      ref_coeffs: np.ndarray = None,
                      collect_trajectories: bool = False,
                      chunk_size: int = DEFAULT_CHUNK,
                      workers: int = 1,
                      event_budget: float = DEFAULT_EVENT_BUDGET) -> EnsembleResult:
    """Simulate an ensemble of jump-driven trajectories in lockstep.

    ``ref_coeffs`` is an optional (n_steps+1, 2N+1, 2N+1) array; when given,
    per-replica sup/integral/terminal diagnostics of X - ref are tracked.
    Replica j uses the substream (seed, first_replica + j), so the result is
    independent of ``chunk_size`` ordering and ``workers``.
    """
    noise.marks.require_finite("jump simulation")
    basis = u0.basis
    m = noise.marks.n_marks
    theta = noise.marks.weights
    dt = grid.dt
    K = grid.n_steps
    phi_vals = _phi_values(phi, noise, grid)
    r_max = 1.0 if phi_vals is None else float(phi_vals.max())
    expected = (1.0 / scaling.eps) * r_max * noise.marks.total_mass * grid.T
    if expected > event_budget:
        raise EventBudgetError(
            f"expected {expected:.3g} jump events per replica exceeds the "
            f"budget {event_budget:.3g}")
    lam_base = (1.0 / scaling.eps) * r_max * theta * dt
    if ref_coeffs is not None and ref_coeffs.shape[0] != K + 1:
        raise TimeGridMismatchError("reference trajectory does not match the grid")

    decay = decay_factors(basis, dt)
    times = grid.times()
    force = noise.f
    comp = theta * dt               # compensator weights per mark

    idx_all = np.arange(replicas)
    res = EnsembleResult(
        replicas=first_replica + idx_all,
        sup_h2=np.zeros(replicas), int_v2=np.zeros(replicas),
        terminal_h2=np.zeros(replicas),
        sup_diff_h2=None if ref_coeffs is None else np.zeros(replicas),
        int_diff_v2=None if ref_coeffs is None else np.zeros(replicas),
        terminal_diff_h2=None if ref_coeffs is None else np.zeros(replicas),
        trajectories=[] if collect_trajectories else None,
        total_jumps=np.zeros(replicas, dtype=np.int64),
    )

    def run_chunk(lo: int, hi: int):
        R = hi - lo
        # jump counts per replica, drawn upfront from its own substream
        counts = np.empty((R, K, m), dtype=np.int64)
        for j in range(R):
            rng = replica_rng(seed, first_replica + lo + j)
            base = rng.poisson(lam_base, size=(K, m))
            if phi_vals is not None:
                p = (phi_vals.T / r_max)          # (K, m)
                base = rng.binomial(base, p)
            counts[j] = base
        res.total_jumps[lo:hi] = counts.sum(axis=(1, 2))

        c = np.broadcast_to(u0.coeffs, (R,) + u0.coeffs.shape).copy()
        sup_h2 = h_norm_sq_coeffs(basis, c)
        int_v2 = 0.5 * dt * v_norm_sq_coeffs(basis, c)
        if ref_coeffs is not None:
            diff = c - ref_coeffs[0]
            sup_d = h_norm_sq_coeffs(basis, diff)
            int_d = 0.5 * dt * v_norm_sq_coeffs(basis, diff)
        if collect_trajectories:
            chunks = [[SpectralField(basis, c[j], _skip_checks=True)] for j in range(R)]

        for n in range(K):
            def rhs(cc, stage, n=n):
                out = -advect_self_coeffs(basis, cc)
                if force is not None:
                    fc = force.coeffs_at(times[n + 1] if stage else times[n])
                    if fc is not None:
                        out = out + fc
                return out
            drift = heun_if_step(c, dt, decay, rhs)
            w = scaling.eps * counts[:, n, :] - comp       # (R, m)
            incr = noise.G.combine(w, c)
            # skip exactly-zero increments so a vanishing coefficient G
            # leaves the deterministic code path untouched bit for bit
            c = drift + incr if incr.any() else drift
            amax = np.abs(c).max()
            if not np.isfinite(amax) or amax > DIVERGENCE_CAP:
                bad = int(np.argmax(np.abs(c).reshape(R, -1).max(axis=1)))
                raise DivergedError(n + 1,
                                    f"replica {first_replica + lo + bad} diverged at step {n + 1}")
            h2 = h_norm_sq_coeffs(basis, c)
            v2 = v_norm_sq_coeffs(basis, c)
            sup_h2 = np.maximum(sup_h2, h2)
            int_v2 += dt * v2 if n < K - 1 else 0.5 * dt * v2
            if ref_coeffs is not None:
                diff = c - ref_coeffs[n + 1]
                dh2 = h_norm_sq_coeffs(basis, diff)
                dv2 = v_norm_sq_coeffs(basis, diff)
                sup_d = np.maximum(sup_d, dh2)
                int_d += dt * dv2 if n < K - 1 else 0.5 * dt * dv2
            if collect_trajectories:
                for j in range(R):
                    chunks[j].append(SpectralField(basis, c[j].copy(), _skip_checks=True))

        res.sup_h2[lo:hi] = sup_h2
        res.int_v2[lo:hi] = int_v2
        res.terminal_h2[lo:hi] = h_norm_sq_coeffs(basis, c)
        if ref_coeffs is not None:
            res.sup_diff_h2[lo:hi] = sup_d
            res.int_diff_v2[lo:hi] = int_d
            res.terminal_diff_h2[lo:hi] = h_norm_sq_coeffs(basis, c - ref_coeffs[K])
        if collect_trajectories:
            res.trajectories[lo:hi] = [
                Trajectory(t0=0.0, T=grid.T, dt=dt, fields=fl) for fl in chunks]

    if collect_trajectories:
        res.trajectories = [None] * replicas
    ranges = [(lo, min(lo + chunk_size, replicas))
              for lo in range(0, replicas, chunk_size)]
    if workers > 1 and len(ranges) > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(lambda r: run_chunk(*r), ranges))
    else:
        for lo, hi in ranges:
            run_chunk(lo, hi)
    return res


def simulate_u_eps(scaling: ScalingSpec, u0: SpectralField, noise: NoiseModel,
                   grid: TimeGrid, seed: int, *,
                   event_budget: float = DEFAULT_EVENT_BUDGET) -> Trajectory:
    """One trajectory of the jump-driven equation at noise level eps."""
    res = run_jump_ensemble(scaling, u0, noise, grid, seed, replicas=1,
                            collect_trajectories=True, event_budget=event_budget)
    return res.trajectories[0]


def simulate_controlled_X(scaling: ScalingSpec, u0: SpectralField, noise: NoiseModel,
                          phi_eps, grid: TimeGrid, seed: int, *,
                          event_budget: float = DEFAULT_EVENT_BUDGET) -> Trajectory:
    """One trajectory of the controlled process with tilted intensity phi/eps."""
    res = run_jump_ensemble(scaling, u0, noise, grid, seed, phi=phi_eps, replicas=1,
                            collect_trajectories=True, event_budget=event_budget)
    return res.trajectories[0]


def moderate_process(x_traj: Trajectory, u0_traj: Trajectory,
                     scaling: ScalingSpec) -> Trajectory:
    """Rescaled fluctuation Y = (X - u0)/a(eps), pointwise on the grid."""
    if len(x_traj) != len(u0_traj) or abs(x_traj.dt - u0_traj.dt) > 1e-12 * x_traj.dt:
        raise TimeGridMismatchError("trajectories live on different grids")
    inv_a = 1.0 / scaling.a
    fields = [inv_a * (x - u) for x, u in zip(x_traj.fields, u0_traj.fields)]
    return Trajectory(t0=x_traj.t0, T=x_traj.T, dt=x_traj.dt, fields=fields)


# ---------------------------------------------------------------------------
# run diagnostics and ensemble statistics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RunDiagnostics:
    """Scalar summary of one simulated trajectory."""

    config_hash: str
    seed: int
    replica: int
    sup_h2: float
    int_v2: float
    terminal_h: float
    terminal_v: float

    @staticmethod
    def from_trajectory(traj: Trajectory, config_hash: str, seed: int,
                        replica: int = 0) -> "RunDiagnostics":
        b = traj.basis
        h2 = np.array([h_norm_sq_coeffs(b, u.coeffs) for u in traj.fields])
        v2 = np.array([v_norm_sq_coeffs(b, u.coeffs) for u in traj.fields])
        dt = traj.dt
        return RunDiagnostics(
            config_hash=config_hash, seed=seed, replica=replica,
            sup_h2=float(h2.max()),
            int_v2=float(np.sum(0.5 * dt * (v2[1:] + v2[:-1]))),
            terminal_h=float(math.sqrt(h2[-1])),
            terminal_v=float(math.sqrt(v2[-1])))


def ensemble_stats(runs) -> dict:
    """Mean/variance/max table over RunDiagnostics with a fixed reduction order.

    Runs are sorted by (seed, replica) before reduction, so the output does
    not depend on input order.  Variances are population variances.
    """
    runs = sorted(runs, key=lambda r: (r.seed, r.replica))
    if len(runs) < 2:
        raise ValueError("ensemble_stats needs at least 2 runs")
    hashes = {r.config_hash for r in runs}
    if len(hashes) != 1:
        raise ValueError(f"config hashes differ: {sorted(hashes)}")
    table = {}
    for name in ("sup_h2", "int_v2", "terminal_h", "terminal_v"):
        x = np.array([getattr(r, name) for r in runs])
        table[name] = {
            "mean": float(x.mean()),
            "variance": float(x.var()),
            "max": float(x.max()),
        }
    table["count"] = len(runs)
    return table
