"""Mark space, Poisson random measures, controls, and the entropy cost.

The default mark space is finite: m marks y_1..y_m with positive weights
theta_i, so every integral over marks is an exact sum and the
exponential-integrability condition on the bound functions holds
automatically.  Continuous mark spaces on [0, 1] with a bounded density are
supported for sampling only; the control-field operations require finite
marks.

Controls are stored per (mark, step) and are piecewise constant in time on
the steps of the associated grid, so the cost integral is an exact finite
sum:  L_T(phi) = sum_{i,n} l(phi[i,n]) * theta_i * dt  with
l(r) = r log r - r + 1 and the 0*log 0 = 0 convention.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .dynamics import TimeGrid
from .spectral import Basis, SpectralField, h_norm_sq_coeffs


class EventBudgetError(RuntimeError):
    """Expected event count exceeds the configured budget."""


class ThinningRangeError(ValueError):
    """Auxiliary coordinates do not cover the requested intensity."""


DEFAULT_EVENT_BUDGET = 10_000_000


def replica_rng(seed: int, replica: int = 0) -> np.random.Generator:
    """Documented seed-splitting: (seed, replica-index) -> independent substream."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, replica])))


# ---------------------------------------------------------------------------
# mark space and noise coefficient
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MarkSpace:
    """Finite mark space {y_1..y_m} with weights, or [0,1] with a density."""

    weights: np.ndarray = None
    density: object = None          # callable on [0,1], bounded
    density_bound: float = None
    total_mass: float = None

    def __post_init__(self):
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=float)
            if w.ndim != 1 or np.any(w <= 0):
                raise ValueError("finite mark space needs a 1-D array of positive weights")
            object.__setattr__(self, "weights", w)
            object.__setattr__(self, "total_mass", float(w.sum()))
        else:
            if self.density is None or self.density_bound is None or self.total_mass is None:
                raise ValueError("continuous mark space needs density, density_bound, total_mass")

    @property
    def kind(self) -> str:
        return "finite" if self.weights is not None else "continuous"

    @property
    def n_marks(self) -> int:
        if self.kind != "finite":
            raise NotImplementedError("n_marks is only defined for finite mark spaces")
        return self.weights.size

    def require_finite(self, what: str):
        if self.kind != "finite":
            raise NotImplementedError(f"{what} requires a finite mark space")


class AffineCoefficient:
    """Noise coefficient G(x, y_i) = h_i * (base_i + lin * P_cap x).

    P_cap truncates to modes with max(|k1|,|k2|) <= cap.  The declared
    Condition-A bounds are L_G = |lin| * h and
    M_G(y_i) = h_i * max(|base_i|_H, |lin|), both exact for this family.
    """

    def __init__(self, basis: Basis, h, bases, lin: float = 0.0, cap: int = None):
        self.basis = basis
        self.h = np.asarray(h, dtype=float)
        if np.any(self.h < 0):
            raise ValueError("mark weights h must be nonnegative")
        if isinstance(bases, SpectralField):
            bases = [bases] * self.h.size
        if len(bases) != self.h.size:
            raise ValueError("need one base field per mark")
        self.bases = list(bases)
        self.lin = float(lin)
        self.cap = basis.N if cap is None else int(cap)
        a = basis._arrays()
        mask = (np.maximum(np.abs(a["k1"]), np.abs(a["k2"])) <= self.cap).astype(float)
        mask[basis.N, basis.N] = 0.0
        self._capmask = mask
        # h folded into the stacked bases so combine() is a single contraction
        self._base_stack = np.stack([w * b.coeffs for w, b in zip(self.h, self.bases)])

    def apply(self, c: np.ndarray, i: int) -> np.ndarray:
        """Coefficients of G(x, y_i) for state coefficients c (batched)."""
        out = np.broadcast_to(self._base_stack[i], c.shape).copy()
        if self.lin != 0.0:
            out += (self.h[i] * self.lin) * (self._capmask * c)
        return out

    def combine(self, weights: np.ndarray, c: np.ndarray) -> np.ndarray:
        """sum_i weights_i * G(x, y_i); weights (..., m), c (..., n, n)."""
        weights = np.asarray(weights, dtype=float)
        out = np.einsum("...m,mij->...ij", weights, self._base_stack)
        if self.lin != 0.0:
            s = weights @ self.h
            out += self.lin * s[..., None, None] * (self._capmask * c)
        return out

    def field(self, x: SpectralField, i: int) -> SpectralField:
        return SpectralField(self.basis, self.apply(x.coeffs, i), _skip_checks=True)

    def declared_LG(self) -> np.ndarray:
        return np.abs(self.lin) * self.h

    def declared_MG(self) -> np.ndarray:
        base_h = np.array([np.sqrt(h_norm_sq_coeffs(self.basis, b.coeffs))
                           for b in self.bases])
        return self.h * np.maximum(base_h, abs(self.lin))


class CallableCoefficient:
    """Wrap an arbitrary G(x: SpectralField, i) -> SpectralField rule.

    Slow path: combine() loops over marks and batch lanes; meant for tests
    and one-off experiments, not ensembles.
    """

    def __init__(self, basis: Basis, fn, n_marks: int):
        self.basis = basis
        self.fn = fn
        self.n_marks = n_marks

    def apply(self, c: np.ndarray, i: int) -> np.ndarray:
        if c.ndim == 2:
            return self.fn(SpectralField(self.basis, c, _skip_checks=True), i).coeffs
        flat = c.reshape(-1, *c.shape[-2:])
        out = np.stack([self.apply(lane, i) for lane in flat])
        return out.reshape(c.shape)

    def combine(self, weights: np.ndarray, c: np.ndarray) -> np.ndarray:
        weights = np.asarray(weights, dtype=float)
        out = np.zeros(np.broadcast_shapes(weights.shape[:-1] + c.shape[-2:], c.shape),
                       dtype=np.complex128)
        for i in range(self.n_marks):
            out += weights[..., i, None, None] * self.apply(c, i)
        return out

    def field(self, x: SpectralField, i: int) -> SpectralField:
        return SpectralField(self.basis, self.apply(x.coeffs, i), _skip_checks=True)


@dataclass
class NoiseModel:
    """Mark space, coefficient G with its declared bounds, and the force."""

    marks: MarkSpace
    G: object
    L_G: np.ndarray = None
    M_G: np.ndarray = None
    f: object = None                # ForceSpec or None

    def __post_init__(self):
        if self.L_G is None and hasattr(self.G, "declared_LG"):
            self.L_G = self.G.declared_LG()
        if self.M_G is None and hasattr(self.G, "declared_MG"):
            self.M_G = self.G.declared_MG()
        self.L_G = np.asarray(self.L_G, dtype=float)
        self.M_G = np.asarray(self.M_G, dtype=float)
        if self.marks.kind == "finite":
            w = self.marks.weights
            for name, arr in (("L_G", self.L_G), ("M_G", self.M_G)):
                if arr.shape != w.shape:
                    raise ValueError(f"{name} must have one entry per mark")
                if not np.isfinite(np.sum(arr ** 2 * w)):
                    raise ValueError(f"sum {name}^2 * theta must be finite")


# ---------------------------------------------------------------------------
# jump streams
# ---------------------------------------------------------------------------

@dataclass
class JumpStream:
    """Realized atoms (t_j, y_j) of a counting measure, optional thinning r."""

    times: np.ndarray
    marks: np.ndarray
    r: np.ndarray = None
    r_max: float = None
    T: float = None

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        marks = np.asarray(self.marks)
        self.marks = marks if np.issubdtype(marks.dtype, np.floating) \
            else marks.astype(int)
        if self.r is not None:
            self.r = np.asarray(self.r, dtype=float)
        if self.times.size > 1 and np.any(np.diff(self.times) <= 0):
            raise ValueError("event times must be strictly increasing")

    def __len__(self):
        return self.times.size

    def counts(self, n_marks: int) -> np.ndarray:
        return np.bincount(self.marks, minlength=n_marks)


def sample_prm(theta: float, marks: MarkSpace, grid: TimeGrid, rng_seed,
               *, r_max: float = None, replica: int = 0,
               event_budget: int = DEFAULT_EVENT_BUDGET) -> JumpStream:
    """Sample a Poisson random measure with intensity theta * dt * theta(dy).

    Per mark the event count is Poisson(theta*T*theta_i) with i.i.d. uniform
    times on [0, T].  With ``r_max`` given, every event carries an auxiliary
    coordinate r ~ U[0, r_max] for later thinning.  Reproducible from
    (rng_seed, replica).
    """
    if theta <= 0:
        raise ValueError("theta must be > 0")
    expected = theta * grid.T * marks.total_mass
    if expected > event_budget:
        raise EventBudgetError(
            f"expected {expected:.3g} events exceeds the budget {event_budget:.3g}")
    rng = replica_rng(rng_seed, replica)
    if marks.kind == "finite":
        lam = theta * grid.T * marks.weights
        counts = rng.poisson(lam)
        total = int(counts.sum())
        mark_idx = np.repeat(np.arange(marks.n_marks), counts)
    else:
        total = int(rng.poisson(theta * grid.T * marks.total_mass))
        # rejection sampling from the bounded density
        accepted = np.empty(0)
        while accepted.size < total:
            cand = rng.uniform(0.0, 1.0, size=max(32, 2 * (total - accepted.size)))
            dens = np.asarray([marks.density(x) for x in cand], dtype=float)
            if np.any(dens > marks.density_bound * (1 + 1e-12)):
                raise ValueError("density exceeds its declared bound")
            u = rng.uniform(0.0, marks.density_bound, size=cand.size)
            accepted = np.concatenate([accepted, cand[u <= dens]])
        mark_idx = accepted[:total]
    times = np.sort(rng.uniform(0.0, grid.T, size=total))
    # strict monotonicity: nudge exact ties upward (probability ~0 events)
    for j in np.flatnonzero(np.diff(times) <= 0):
        times[j + 1] = np.nextafter(times[j], np.inf)
    if marks.kind == "finite":
        # attach marks to sorted times by a random permutation
        mark_idx = mark_idx[rng.permutation(total)]
    r = rng.uniform(0.0, r_max, size=total) if r_max is not None else None
    return JumpStream(times=times, marks=mark_idx, r=r, r_max=r_max, T=grid.T)


def thin_to_control(base: JumpStream, phi: "ControlField") -> JumpStream:
    """Keep event (t, y, r) iff r <= phi(y, t); the result is N^phi.

    ``base`` must carry auxiliary coordinates with r_max >= max(phi).
    """
    if base.r is None or base.r_max is None:
        raise ThinningRangeError("base stream has no auxiliary r-coordinates")
    vals = phi.as_phi()
    if vals.max() > base.r_max:
        raise ThinningRangeError(
            f"r_max = {base.r_max} < max(phi) = {vals.max()}; thinning would be biased")
    if np.any(vals < 0):
        raise ValueError("phi must be nonnegative")
    step = np.minimum((base.times / phi.grid.dt).astype(int), phi.grid.n_steps - 1)
    keep = base.r <= vals[base.marks, step]
    return JumpStream(times=base.times[keep], marks=base.marks[keep],
                      r=base.r[keep], r_max=base.r_max, T=base.T)


def write_jump_stream(path, stream: JumpStream):
    """Persist a stream as CSV with columns t, mark_index, r."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "mark_index", "r"])
        r = stream.r if stream.r is not None else np.full(len(stream), np.nan)
        for t, m, rv in zip(stream.times, stream.marks, r):
            w.writerow([repr(float(t)), int(m), repr(float(rv))])


def read_jump_stream(path, *, r_max=None, T=None) -> JumpStream:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    times = np.array([float(r["t"]) for r in rows])
    marks = np.array([int(r["mark_index"]) for r in rows])
    rvals = np.array([float(r["r"]) for r in rows])
    if np.all(np.isnan(rvals)):
        rvals = None
    return JumpStream(times=times, marks=marks, r=rvals, r_max=r_max, T=T)


# ---------------------------------------------------------------------------
# controls and the entropy cost
# ---------------------------------------------------------------------------

def entropy_l(r):
    """l(r) = r log r - r + 1 with the continuous extension l(0) = 1."""
    r = np.asarray(r, dtype=float)
    out = np.where(r > 0, r * np.log(np.where(r > 0, r, 1.0)) - r + 1.0, 1.0)
    return out if out.ndim else float(out)


class ControlField:
    """Control values on marks x steps, stored either as phi or as psi.

    phi is the tilted jump intensity, psi = (phi - 1)/a_eps its
    moderate-deviation increment; a_eps is kept for conversion.  Values are
    piecewise constant in time on the steps of ``grid``.
    """

    def __init__(self, marks: MarkSpace, grid: TimeGrid, values, *,
                 stored_as: str = "psi", a_eps: float = 1.0):
        marks.require_finite("ControlField")
        values = np.asarray(values, dtype=float)
        if values.shape != (marks.n_marks, grid.n_steps):
            raise ValueError(
                f"values shape {values.shape} != {(marks.n_marks, grid.n_steps)}")
        if stored_as not in ("phi", "psi"):
            raise ValueError("stored_as must be 'phi' or 'psi'")
        if not np.all(np.isfinite(values)):
            raise ValueError("control values must be finite")
        if stored_as == "phi" and np.any(values < 0):
            raise ValueError("phi values must be nonnegative")
        self.marks = marks
        self.grid = grid
        self.values = values
        self.stored_as = stored_as
        self.a_eps = float(a_eps)

    @staticmethod
    def from_psi(marks, grid, psi_values, a_eps) -> "ControlField":
        return ControlField(marks, grid, psi_values, stored_as="psi", a_eps=a_eps)

    @staticmethod
    def from_phi(marks, grid, phi_values, a_eps) -> "ControlField":
        return ControlField(marks, grid, phi_values, stored_as="phi", a_eps=a_eps)

    def as_phi(self) -> np.ndarray:
        if self.stored_as == "phi":
            return self.values
        return 1.0 + self.a_eps * self.values

    def as_psi(self) -> np.ndarray:
        if self.stored_as == "psi":
            return self.values
        return (self.values - 1.0) / self.a_eps

    def l2_norm_sq(self) -> float:
        """||psi||^2 in L^2(theta_T): sum_i theta_i sum_n dt psi[i,n]^2."""
        psi = self.as_psi()
        return float(self.marks.weights @ (psi ** 2).sum(axis=1)) * self.grid.dt


def cost_LT(phi, marks: MarkSpace = None, grid: TimeGrid = None) -> float:
    """Entropy cost L_T(phi) = sum_{i,n} l(phi[i,n]) * theta_i * dt.

    ``phi`` may be a ControlField (marks/grid taken from it) or a bare
    (m, n_steps) array of nonnegative intensities.
    """
    if isinstance(phi, ControlField):
        marks, grid = phi.marks, phi.grid
        vals = phi.as_phi()
    else:
        vals = np.asarray(phi, dtype=float)
    if np.any(vals < 0):
        raise ValueError("phi must be nonnegative")
    marks.require_finite("cost_LT")
    return float(marks.weights @ entropy_l(vals).sum(axis=1)) * grid.dt


def control_class_check(phi: ControlField, M: float, eps: float, *,
                        gamma: float = 0.4) -> bool:
    """True iff L_T(phi) <= M * a(eps)^2 with a(eps) = eps**gamma."""
    a = eps ** gamma
    return cost_LT(phi) <= M * a * a


def psi_truncate(psi: ControlField, beta: float, eps: float, *,
                 gamma: float = 0.4) -> ControlField:
    """Entrywise psi * 1{|psi| <= beta/a(eps)}, the moderate-deviation
    truncation the convergence experiments apply to their controls."""
    if not 0 < beta <= 1:
        raise ValueError("beta must lie in (0, 1]")
    a = eps ** gamma
    vals = psi.as_psi()
    out = np.where(np.abs(vals) <= beta / a, vals, 0.0)
    return ControlField.from_psi(psi.marks, psi.grid, out, psi.a_eps)


# ---------------------------------------------------------------------------
# Condition A / B verification
# ---------------------------------------------------------------------------

@dataclass
class ConditionReport:
    passed: bool
    max_lipschitz_ratio: float
    max_growth_ratio: float
    violations: list = field(default_factory=list)
    notes: str = ""

    def __str__(self):
        status = "PASS" if self.passed else "FAIL"
        return (f"[{status}] lipschitz ratio max {self.max_lipschitz_ratio:.6g}, "
                f"growth ratio max {self.max_growth_ratio:.6g}; "
                f"{len(self.violations)} violation(s). {self.notes}")


def verify_condition_A(noise: NoiseModel, n_samples: int, *, seed: int = 0,
                       state_sampler=None, tol: float = 1e-12) -> ConditionReport:
    """Check the declared Lipschitz/growth bounds of G on sampled states.

    Over n_samples random state pairs and all marks, asserts
    |G(x1,y)-G(x2,y)|_H <= L_G(y) |x1-x2|_H and
    |G(x,y)|_H <= M_G(y) (1+|x|_H).  For finite marks the
    exponential-integrability condition on L_G, M_G holds automatically,
    which the report notes.
    """
    noise.marks.require_finite("verify_condition_A")
    basis = noise.G.basis
    rng = replica_rng(seed)
    if state_sampler is None:
        from .spectral import random_field
        state_sampler = lambda r: random_field(basis, r, amplitude=r.uniform(0.1, 3.0))
    max_lip, max_gro = 0.0, 0.0
    violations = []
    for s in range(n_samples):
        x1 = state_sampler(rng)
        x2 = state_sampler(rng)
        dx = np.sqrt(h_norm_sq_coeffs(basis, x1.coeffs - x2.coeffs))
        h1 = np.sqrt(h_norm_sq_coeffs(basis, x1.coeffs))
        for i in range(noise.marks.n_marks):
            g1 = noise.G.apply(x1.coeffs, i)
            g2 = noise.G.apply(x2.coeffs, i)
            dg = np.sqrt(h_norm_sq_coeffs(basis, g1 - g2))
            if dx > 0:
                bound = noise.L_G[i] * dx
                ratio = dg / bound if bound > 0 else (np.inf if dg > tol else 0.0)
                max_lip = max(max_lip, ratio)
                if dg > bound + tol * (1 + dx):
                    violations.append(("lipschitz", s, i, float(ratio)))
            g1n = np.sqrt(h_norm_sq_coeffs(basis, g1))
            gbound = noise.M_G[i] * (1.0 + h1)
            gratio = g1n / gbound if gbound > 0 else (np.inf if g1n > tol else 0.0)
            max_gro = max(max_gro, gratio)
            if g1n > gbound + tol * (1 + h1):
                violations.append(("growth", s, i, float(gratio)))
    return ConditionReport(
        passed=not violations,
        max_lipschitz_ratio=float(max_lip),
        max_growth_ratio=float(max_gro),
        violations=violations,
        notes="finite mark space: the exponential-integrability class "
              "condition on L_G, M_G holds automatically.")
