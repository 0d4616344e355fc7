"""Trajectory snapshot files.

Layout (all little-endian):

    bytes 0-3    magic "NSE1"
    int64        N            truncation radius
    int64        n_steps      number of time steps (file holds n_steps+1 fields)
    float64      dt
    float64      nu

then, for each of the n_steps+1 grid times in order, the scalar mode
coefficients as (real, imag) float64 pairs.  Mode order is row-major over
the (2N+1) x (2N+1) index square, k1 = i - N outer, k2 = j - N inner, with
the k = (0, 0) entry skipped.

The header does not carry the domain period or the start time; files are
written and read with the default period L = 2*pi and t0 = 0, and the
writer refuses anything else rather than silently dropping it.
"""

from __future__ import annotations

import math
import struct

import numpy as np

from .spectral import Basis, SpectralField, Trajectory

MAGIC = b"NSE1"
_HEADER = struct.Struct("<4sqqdd")


class SnapshotFormatError(ValueError):
    pass


def _mode_mask(basis: Basis) -> np.ndarray:
    mask = np.ones((basis.n_axis, basis.n_axis), dtype=bool)
    mask[basis.N, basis.N] = False
    return mask


def write_trajectory(path, traj: Trajectory):
    basis = traj.basis
    if abs(basis.L - 2 * math.pi) > 1e-12 or abs(traj.t0) > 1e-12:
        raise SnapshotFormatError(
            "snapshot format records only (N, n_steps, dt, nu); refusing a "
            "trajectory with a non-default period or start time")
    mask = _mode_mask(basis)
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, basis.N, len(traj) - 1, traj.dt, basis.nu))
        for f in traj.fields:
            c = f.coeffs[mask]
            flat = np.empty(2 * c.size)
            flat[0::2] = c.real
            flat[1::2] = c.imag
            fh.write(flat.astype("<f8").tobytes())


def read_trajectory(path, *, dealias_factor: float = 1.5) -> Trajectory:
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        if len(head) != _HEADER.size:
            raise SnapshotFormatError("truncated header")
        magic, N, n_steps, dt, nu = _HEADER.unpack(head)
        if magic != MAGIC:
            raise SnapshotFormatError(f"bad magic {magic!r}")
        basis = Basis(N=int(N), nu=float(nu), dealias_factor=dealias_factor)
        mask = _mode_mask(basis)
        n_vals = 2 * (basis.n_axis ** 2 - 1)
        fields = []
        for _ in range(int(n_steps) + 1):
            raw = fh.read(8 * n_vals)
            if len(raw) != 8 * n_vals:
                raise SnapshotFormatError("truncated payload")
            flat = np.frombuffer(raw, dtype="<f8")
            c = np.zeros((basis.n_axis, basis.n_axis), dtype=np.complex128)
            c[mask] = flat[0::2] + 1j * flat[1::2]
            fields.append(SpectralField(basis, c, _skip_checks=True))
        if fh.read(1):
            raise SnapshotFormatError("trailing bytes after the last field")
    return Trajectory(t0=0.0, T=float(n_steps) * float(dt), dt=float(dt), fields=fields)
