"""Trajectory snapshot format round-trip and layout checks."""

import struct

import numpy as np
import pytest

from nse_mdp.dynamics import ForceSpec, TimeGrid, solve_nse
from nse_mdp.snapshots import SnapshotFormatError, read_trajectory, write_trajectory
from nse_mdp.spectral import Basis, SpectralField, Trajectory, random_field


def test_roundtrip_exact(tmp_path):
    basis = Basis(N=3, nu=0.7)
    rng = np.random.default_rng(1)
    u0 = random_field(basis, rng, amplitude=0.4)
    grid = TimeGrid(T=0.25, n_steps=10)
    tr = solve_nse(u0, ForceSpec.zero(basis), grid)
    path = tmp_path / "run.bin"
    write_trajectory(path, tr)
    back = read_trajectory(path)
    assert back.basis.N == 3
    assert back.basis.nu == 0.7
    assert back.dt == tr.dt
    assert len(back) == len(tr)
    for a, b in zip(tr.fields, back.fields):
        np.testing.assert_array_equal(a.coeffs, b.coeffs)


def test_header_layout(tmp_path):
    basis = Basis(N=1, nu=0.5)
    z = SpectralField.zero(basis)
    tr = Trajectory(t0=0.0, T=0.2, dt=0.1, fields=[z, z, z])
    path = tmp_path / "h.bin"
    write_trajectory(path, tr)
    raw = path.read_bytes()
    magic, N, n_steps, dt, nu = struct.unpack_from("<4sqqdd", raw)
    assert magic == b"NSE1"
    assert (N, n_steps) == (1, 2)
    assert (dt, nu) == (0.1, 0.5)
    # payload: 3 fields x 8 modes x 2 float64
    assert len(raw) == struct.calcsize("<4sqqdd") + 3 * 8 * 2 * 8


def test_mode_order_documented(tmp_path):
    # mode (k1, k2) = (-1, 0) is the 2nd entry of the row-major square with
    # the center skipped: (-1,-1), (-1,0), (-1,1), (0,-1), (0,1), (1,*)
    basis = Basis(N=1, nu=0.5)
    f = SpectralField.from_modes(basis, {(1, 0): 2.0 + 1.0j})
    tr = Trajectory(t0=0.0, T=0.1, dt=0.1, fields=[f, f])
    path = tmp_path / "o.bin"
    write_trajectory(path, tr)
    vals = np.frombuffer(path.read_bytes()[struct.calcsize("<4sqqdd"):], dtype="<f8")
    first = vals[:16].reshape(8, 2)
    np.testing.assert_allclose(first[1], [2.0, -1.0])   # conjugate at (-1, 0)
    np.testing.assert_allclose(first[6], [2.0, 1.0])    # (1, 0) entry
    assert np.all(first[[0, 2, 3, 4, 5, 7]] == 0)


def test_refuses_nonstandard_domain(tmp_path):
    basis = Basis(N=1, nu=0.5, L=1.0)
    z = SpectralField.zero(basis)
    tr = Trajectory(t0=0.0, T=0.1, dt=0.1, fields=[z, z])
    with pytest.raises(SnapshotFormatError):
        write_trajectory(tmp_path / "x.bin", tr)


def test_corrupt_files(tmp_path):
    p = tmp_path / "bad.bin"
    p.write_bytes(b"JUNK" + b"\0" * 36)
    with pytest.raises(SnapshotFormatError):
        read_trajectory(p)
    basis = Basis(N=1, nu=0.5)
    z = SpectralField.zero(basis)
    tr = Trajectory(t0=0.0, T=0.1, dt=0.1, fields=[z, z])
    good = tmp_path / "good.bin"
    write_trajectory(good, tr)
    raw = good.read_bytes()
    (tmp_path / "trunc.bin").write_bytes(raw[:-8])
    with pytest.raises(SnapshotFormatError):
        read_trajectory(tmp_path / "trunc.bin")
    (tmp_path / "trail.bin").write_bytes(raw + b"\0")
    with pytest.raises(SnapshotFormatError):
        read_trajectory(tmp_path / "trail.bin")
