"""Divergence-free spectral representation of 2-D periodic velocity fields.

Every velocity field in this package lives on the torus [0, L)^2 and is
stored as one complex scalar per Fourier mode.  For a retained mode
k = (k1, k2) with 0 < max(|k1|, |k2|) <= N the velocity coefficient is

    u_hat(k) = i * c(k) * k_perp / |k|,      k_perp = (-k2, k1),

so the field is divergence-free and mean-zero by construction, and the
reality constraint is c(-k) = conj(c(k)).  The physical wavevector is
kappa = (2*pi/L) * k; for the default L = 2*pi the two coincide.

Normalization (fixed here, used everywhere):

    |u|_H^2  = integral |u|^2 dx  = L^2 * sum_k |c(k)|^2
    |u|_V^2  = integral |grad u|^2 dx = L^2 * sum_k |kappa|^2 |c(k)|^2

Quadratic products (advection terms) are evaluated pseudo-spectrally on a
padded physical grid of M >= ceil(dealias_factor*(2N+1)) points per
direction; M is further raised to 4N+1 so that the rectangle-rule
quadrature of quartic quantities (the L^4 norm) is exact as well.  Within
the truncation all products computed here are therefore exact up to
round-off, which is what lets the trilinear identities hold at 1e-10
tolerances instead of merely O(grid error).

All operations are pure functions of their inputs; SpectralFields are
immutable values, safe to share across threads, and scratch FFT arrays are
allocated per call.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class BasisMismatchError(ValueError):
    """Two fields built on different bases were combined."""


class GridMismatchError(ValueError):
    """A physical-grid array does not match the basis grid."""


@dataclass(frozen=True)
class Basis:
    """Spectral truncation: modes k with 0 < max(|k1|,|k2|) <= N.

    Parameters
    ----------
    N : int
        Truncation radius (>= 1).
    L : float
        Domain period (default 2*pi).
    nu : float
        Viscosity (> 0).
    dealias_factor : float
        Padding ratio for the physical grid, >= 1.5.
    """

    N: int
    nu: float
    L: float = 2.0 * math.pi
    dealias_factor: float = 1.5
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if self.N < 1:
            raise ValueError(f"N must be >= 1, got {self.N}")
        if self.nu <= 0:
            raise ValueError(f"nu must be > 0, got {self.nu}")
        if self.L <= 0:
            raise ValueError(f"L must be > 0, got {self.L}")
        if self.dealias_factor < 1.5:
            raise ValueError("dealias_factor must be >= 1.5")

    # -- derived layout ----------------------------------------------------

    @property
    def n_axis(self) -> int:
        """Modes per axis, 2N+1; array index i maps to k = i - N."""
        return 2 * self.N + 1

    @property
    def grid_size(self) -> int:
        """Padded physical grid size M per direction.

        M >= ceil(dealias_factor*(2N+1)) keeps quadratic products exact;
        M >= 4N+1 additionally makes quartic quadrature (L^4 norm) exact.
        """
        return max(math.ceil(self.dealias_factor * self.n_axis), 4 * self.N + 1)

    def _arrays(self):
        """Lazily build and cache the mode-index arrays."""
        if "k1" not in self._cache:
            N = self.N
            k = np.arange(-N, N + 1)
            K1, K2 = np.meshgrid(k, k, indexing="ij")
            kap = 2.0 * math.pi / self.L
            KSQ = (kap * K1) ** 2 + (kap * K2) ** 2
            absk = np.sqrt(K1.astype(float) ** 2 + K2.astype(float) ** 2)
            absk[N, N] = 1.0  # avoid 0/0 at the (excluded) zero mode
            # unit vector k_perp/|k|
            E1 = -K2 / absk
            E2 = K1 / absk
            M = self.grid_size
            self._cache.update(
                k1=K1, k2=K2, ksq=KSQ, e1=E1, e2=E2,
                kap1=kap * K1, kap2=kap * K2,
                fft_i=np.mod(K1, M), fft_j=np.mod(K2, M),
            )
        return self._cache

    @property
    def ksq(self) -> np.ndarray:
        """|kappa|^2 per mode (0 at the excluded center)."""
        return self._arrays()["ksq"]

    @property
    def stokes_symbol(self) -> np.ndarray:
        """Eigenvalues nu*|kappa|^2 of the Stokes operator, per mode."""
        return self.nu * self.ksq

    def n_modes(self) -> int:
        """Number of retained modes (excluding k = 0)."""
        return self.n_axis ** 2 - 1


def _check_same_basis(a: "SpectralField", b: "SpectralField"):
    if a.basis is not b.basis and a.basis != b.basis:
        raise BasisMismatchError("fields live on different bases")


def symmetrize_coeffs(basis: Basis, c: np.ndarray) -> np.ndarray:
    """Return coefficients with the reality constraint and zero mean enforced.

    c(-k) <- (c(-k) + conj(c(k)))/2 and c(0) <- 0.  Accepts arrays with
    leading batch dimensions; the mode axes are the last two.
    """
    out = 0.5 * (c + np.conj(c[..., ::-1, ::-1]))
    out[..., basis.N, basis.N] = 0.0
    return out


class SpectralField:
    """Immutable divergence-free velocity field (one complex scalar per mode)."""

    __slots__ = ("basis", "coeffs")

    def __init__(self, basis: Basis, coeffs: np.ndarray, *, _skip_checks: bool = False):
        coeffs = np.asarray(coeffs, dtype=np.complex128)
        if coeffs.shape != (basis.n_axis, basis.n_axis):
            raise ValueError(
                f"coeffs shape {coeffs.shape} != {(basis.n_axis, basis.n_axis)}")
        if not _skip_checks:
            coeffs = symmetrize_coeffs(basis, coeffs.copy())
        coeffs.flags.writeable = False
        object.__setattr__(self, "basis", basis)
        object.__setattr__(self, "coeffs", coeffs)

    def __setattr__(self, *a):
        raise AttributeError("SpectralField is immutable")

    # -- algebra -----------------------------------------------------------

    def __add__(self, other: "SpectralField") -> "SpectralField":
        _check_same_basis(self, other)
        return SpectralField(self.basis, self.coeffs + other.coeffs, _skip_checks=True)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        _check_same_basis(self, other)
        return SpectralField(self.basis, self.coeffs - other.coeffs, _skip_checks=True)

    def __mul__(self, scalar: float) -> "SpectralField":
        return SpectralField(self.basis, self.coeffs * float(scalar), _skip_checks=True)

    __rmul__ = __mul__

    def __neg__(self) -> "SpectralField":
        return SpectralField(self.basis, -self.coeffs, _skip_checks=True)

    @staticmethod
    def zero(basis: Basis) -> "SpectralField":
        return SpectralField(basis, np.zeros((basis.n_axis, basis.n_axis), dtype=np.complex128),
                             _skip_checks=True)

    @staticmethod
    def from_modes(basis: Basis, modes: dict) -> "SpectralField":
        """Build a field from {(k1, k2): complex c} entries.

        The conjugate entry at -k is filled in automatically unless given.
        """
        c = np.zeros((basis.n_axis, basis.n_axis), dtype=np.complex128)
        N = basis.N
        for (k1, k2), val in modes.items():
            if max(abs(k1), abs(k2)) > N or (k1 == 0 and k2 == 0):
                raise ValueError(f"mode {(k1, k2)} outside basis")
            c[k1 + N, k2 + N] = val
            if (-k1 + N, -k2 + N) != (k1 + N, k2 + N) and (-k1, -k2) not in modes:
                c[-k1 + N, -k2 + N] = np.conj(val)
        return SpectralField(basis, c)


@dataclass
class Trajectory:
    """Time-indexed sequence of SpectralFields on a uniform grid over [t0, T]."""

    t0: float
    T: float
    dt: float
    fields: list

    def __post_init__(self):
        expected = int(math.floor((self.T - self.t0) / self.dt + 0.5)) + 1
        if len(self.fields) != expected:
            raise ValueError(
                f"{len(self.fields)} fields inconsistent with dt={self.dt} "
                f"on [{self.t0}, {self.T}] (expected {expected})")
        b = self.fields[0].basis
        for f in self.fields[1:]:
            if f.basis is not b and f.basis != b:
                raise BasisMismatchError("trajectory fields must share one basis")

    @property
    def basis(self) -> Basis:
        return self.fields[0].basis

    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(len(self.fields))

    def __len__(self):
        return len(self.fields)

    def __getitem__(self, i) -> SpectralField:
        return self.fields[i]


# ---------------------------------------------------------------------------
# batched kernels: coefficient arrays of shape (..., 2N+1, 2N+1)
# ---------------------------------------------------------------------------

def velocity_spectrum(basis: Basis, c: np.ndarray):
    """Velocity coefficients (u1_hat, u2_hat) from scalar coefficients."""
    a = basis._arrays()
    u1 = 1j * c * a["e1"]
    u2 = 1j * c * a["e2"]
    return u1, u2


def scalar_from_velocity(basis: Basis, u1h: np.ndarray, u2h: np.ndarray) -> np.ndarray:
    """Leray-project velocity coefficients and return the scalar representation.

    Projection onto the divergence-free subspace keeps only the component
    along k_perp/|k|; the scalar is c = -i * (k_perp/|k|) . u_hat.
    """
    a = basis._arrays()
    c = -1j * (a["e1"] * u1h + a["e2"] * u2h)
    return symmetrize_coeffs(basis, c)


def _embed(basis: Basis, spec: np.ndarray) -> np.ndarray:
    """Place mode coefficients into a padded M x M FFT array (batched)."""
    a = basis._arrays()
    M = basis.grid_size
    out = np.zeros(spec.shape[:-2] + (M, M), dtype=np.complex128)
    out[..., a["fft_i"], a["fft_j"]] = spec
    return out

def _extract(basis: Basis, fftarr: np.ndarray) -> np.ndarray:
    """Pull retained-mode coefficients back out of a padded FFT array."""
    a = basis._arrays()
    return fftarr[..., a["fft_i"], a["fft_j"]]


def to_physical_coeffs(basis: Basis, c: np.ndarray):
    """Physical velocity components (u1, u2) on the padded grid (batched)."""
    M = basis.grid_size
    u1h, u2h = velocity_spectrum(basis, c)
    u1 = np.fft.ifft2(_embed(basis, u1h) * (M * M)).real
    u2 = np.fft.ifft2(_embed(basis, u2h) * (M * M)).real
    return u1, u2


def _gradients_physical(basis: Basis, c: np.ndarray):
    """Physical-space d_i u_j for the velocity of scalar coefficients c."""
    a = basis._arrays()
    M = basis.grid_size
    u1h, u2h = velocity_spectrum(basis, c)
    out = []
    for uh in (u1h, u2h):          # component j
        for kap in (a["kap1"], a["kap2"]):  # derivative direction i
            out.append(np.fft.ifft2(_embed(basis, 1j * kap * uh) * (M * M)).real)
    # order: d1 u1, d2 u1, d1 u2, d2 u2
    return out


def advect_coeffs(basis: Basis, cu: np.ndarray, cv: np.ndarray) -> np.ndarray:
    """Scalar coefficients of B(u, v) = P_H((u . grad) v), batched.

    Both inputs are scalar coefficient arrays on the same basis; the product
    is formed on the padded grid, so the result is exact within the
    truncation.
    """
    M = basis.grid_size
    u1, u2 = to_physical_coeffs(basis, cu)
    d1v1, d2v1, d1v2, d2v2 = _gradients_physical(basis, cv)
    w1 = u1 * d1v1 + u2 * d2v1
    w2 = u1 * d1v2 + u2 * d2v2
    w1h = _extract(basis, np.fft.fft2(w1)) / (M * M)
    w2h = _extract(basis, np.fft.fft2(w2)) / (M * M)
    return scalar_from_velocity(basis, w1h, w2h)


def advect_self_coeffs(basis: Basis, c: np.ndarray) -> np.ndarray:
    """Scalar coefficients of B(u, u) via the 2-D rotational form, batched.

    (u.grad)u = grad(|u|^2/2) + omega * u_perp and the projection kills the
    gradient part, so only one scalar product field is transformed each way:
    5 transforms instead of the 8 the general two-field path needs.  Exact
    within the truncation, like the general path.
    """
    a = basis._arrays()
    M = basis.grid_size
    u1h, u2h = velocity_spectrum(basis, c)
    scale = M * M
    u1 = np.fft.ifft2(_embed(basis, u1h) * scale).real
    u2 = np.fft.ifft2(_embed(basis, u2h) * scale).real
    # vorticity: omega_hat = i(kap1*u2_hat - kap2*u1_hat) = -|kap| c
    omega = np.fft.ifft2(_embed(basis, 1j * (a["kap1"] * u2h - a["kap2"] * u1h))
                         * scale).real
    w1h = _extract(basis, np.fft.fft2(omega * (-u2))) / scale
    w2h = _extract(basis, np.fft.fft2(omega * u1)) / scale
    return scalar_from_velocity(basis, w1h, w2h)


def advect_transpose_coeffs(basis: Basis, cu: np.ndarray, cw: np.ndarray) -> np.ndarray:
    """Scalar coefficients of P_H((grad u)^T w), batched.

    This is the H-adjoint of eta -> B(eta, u): <B(eta,u), w> = <eta, P((grad u)^T w)>.
    """
    M = basis.grid_size
    d1u1, d2u1, d1u2, d2u2 = _gradients_physical(basis, cu)
    w1, w2 = to_physical_coeffs(basis, cw)
    p1 = d1u1 * w1 + d1u2 * w2
    p2 = d2u1 * w1 + d2u2 * w2
    p1h = _extract(basis, np.fft.fft2(p1)) / (M * M)
    p2h = _extract(basis, np.fft.fft2(p2)) / (M * M)
    return scalar_from_velocity(basis, p1h, p2h)


def h_norm_sq_coeffs(basis: Basis, c: np.ndarray) -> np.ndarray:
    """|u|_H^2 per batch entry."""
    return basis.L ** 2 * np.sum(np.abs(c) ** 2, axis=(-2, -1))


def v_norm_sq_coeffs(basis: Basis, c: np.ndarray) -> np.ndarray:
    """|u|_V^2 per batch entry."""
    return basis.L ** 2 * np.sum(basis.ksq * np.abs(c) ** 2, axis=(-2, -1))


# ---------------------------------------------------------------------------
# public single-field operations
# ---------------------------------------------------------------------------

def norms(u: SpectralField):
    """Return (|u|_H, |u|_V, |u|_L4).

    H and V norms are spectral sums; the L^4 norm is a rectangle-rule
    quadrature on the padded grid, which is exact for this truncation.
    """
    b = u.basis
    h = math.sqrt(h_norm_sq_coeffs(b, u.coeffs))
    v = math.sqrt(v_norm_sq_coeffs(b, u.coeffs))
    u1, u2 = to_physical_coeffs(b, u.coeffs)
    w = (b.L / b.grid_size) ** 2
    l4 = float(np.sum((u1 * u1 + u2 * u2) ** 2) * w) ** 0.25
    return h, v, l4


def inner_h(u: SpectralField, w: SpectralField) -> float:
    """H (= L^2) inner product of two fields on the same basis."""
    _check_same_basis(u, w)
    c, d = u.coeffs, w.coeffs
    return u.basis.L ** 2 * float(np.sum(c.real * d.real + c.imag * d.imag))


def apply_stokes(u: SpectralField) -> SpectralField:
    """Stokes operator A u = -nu P_H Laplace u; diagonal nu*|kappa|^2 here."""
    return SpectralField(u.basis, u.basis.stokes_symbol * u.coeffs, _skip_checks=True)


def nonlinear_B(u: SpectralField, v: SpectralField) -> SpectralField:
    """B(u, v) = P_H((u . grad) v), dealiased pseudo-spectral evaluation."""
    _check_same_basis(u, v)
    return SpectralField(u.basis, advect_coeffs(u.basis, u.coeffs, v.coeffs),
                         _skip_checks=True)


def trilinear_b(u: SpectralField, v: SpectralField, w: SpectralField) -> float:
    """b(u, v, w) = integral (u . grad) v . w dx by exact grid quadrature."""
    _check_same_basis(u, v)
    _check_same_basis(u, w)
    b = u.basis
    M = b.grid_size
    u1, u2 = to_physical_coeffs(b, u.coeffs)
    d1v1, d2v1, d1v2, d2v2 = _gradients_physical(b, v.coeffs)
    w1, w2 = to_physical_coeffs(b, w.coeffs)
    integrand = (u1 * d1v1 + u2 * d2v1) * w1 + (u1 * d1v2 + u2 * d2v2) * w2
    return float(np.sum(integrand)) * (b.L / M) ** 2


def project_leray(basis: Basis, raw: np.ndarray) -> SpectralField:
    """Project a physical-grid vector field onto the stored representation.

    ``raw`` has shape (2, M, M) with M = basis.grid_size.  The transform
    keeps retained modes, removes the mean and the component parallel to k,
    and returns the scalar-coefficient field.  Idempotent on the range.
    """
    raw = np.asarray(raw, dtype=float)
    M = basis.grid_size
    if raw.shape != (2, M, M):
        raise GridMismatchError(f"expected shape {(2, M, M)}, got {raw.shape}")
    u1h = _extract(basis, np.fft.fft2(raw[0])) / (M * M)
    u2h = _extract(basis, np.fft.fft2(raw[1])) / (M * M)
    return SpectralField(basis, scalar_from_velocity(basis, u1h, u2h), _skip_checks=True)


def to_physical(u: SpectralField) -> np.ndarray:
    """Velocity on the padded physical grid, shape (2, M, M)."""
    u1, u2 = to_physical_coeffs(u.basis, u.coeffs)
    return np.stack([u1, u2])


def random_field(basis: Basis, rng: np.random.Generator, *, amplitude: float = 1.0,
                 decay: float = 1.0) -> SpectralField:
    """Random smooth field: c(k) ~ amplitude * CN(0,1) / |k|^decay, symmetrized."""
    n = basis.n_axis
    c = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    a = basis._arrays()
    absk = np.sqrt(a["k1"].astype(float) ** 2 + a["k2"].astype(float) ** 2)
    absk[basis.N, basis.N] = 1.0
    c *= amplitude / absk ** decay
    return SpectralField(basis, c)
