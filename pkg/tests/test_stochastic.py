"""Jump-SPDE simulator tests: exactness contracts, martingale compensation."""

import math

import numpy as np
import pytest

from nse_mdp.dynamics import ForceSpec, TimeGrid, solve_nse
from nse_mdp.noise import (
    AffineCoefficient,
    ControlField,
    EventBudgetError,
    MarkSpace,
    NoiseModel,
)
from nse_mdp.spectral import Basis, SpectralField, inner_h, random_field
from nse_mdp.stochastic import (
    RunDiagnostics,
    ScalingSpec,
    ensemble_stats,
    moderate_process,
    run_jump_ensemble,
    simulate_controlled_X,
    simulate_u_eps,
)


@pytest.fixture
def basis():
    return Basis(N=3, nu=0.5)


@pytest.fixture
def grid():
    return TimeGrid(T=0.4, n_steps=40)


@pytest.fixture
def marks():
    return MarkSpace(weights=np.array([1.0, 0.5]))


def make_noise(basis, marks, *, lin=0.2, f=None, amp=0.25):
    g0 = SpectralField.from_modes(basis, {(1, 0): amp, (0, 1): 0.6j * amp})
    G = AffineCoefficient(basis, h=[1.0, 0.6], bases=g0, lin=lin, cap=2)
    return NoiseModel(marks=marks, G=G, f=f)


def test_scaling_spec_validation():
    s = ScalingSpec(eps=1e-2, gamma=0.4)
    assert s.a == pytest.approx(1e-2 ** 0.4)
    assert s.speed == pytest.approx(1e-2 ** 0.2)
    with pytest.raises(ValueError):
        ScalingSpec(eps=0.0)
    with pytest.raises(ValueError):
        ScalingSpec(eps=0.1, gamma=0.5)
    with pytest.raises(ValueError):
        ScalingSpec(eps=0.1, gamma=0.0)


def test_zero_G_reproduces_deterministic_bitwise(basis, grid, marks):
    rng = np.random.default_rng(1)
    u0 = random_field(basis, rng, amplitude=0.4)
    f = ForceSpec.sinusoidal(SpectralField.from_modes(basis, {(1, 1): 0.08}), period=0.4)
    noise = NoiseModel(marks=marks,
                       G=AffineCoefficient(basis, h=[0.0, 0.0],
                                           bases=SpectralField.zero(basis), lin=0.0),
                       f=f)
    det = solve_nse(u0, f, grid)
    sto = simulate_u_eps(ScalingSpec(eps=0.05), u0, noise, grid, seed=7)
    for a, b in zip(det.fields, sto.fields):
        assert np.array_equal(a.coeffs, b.coeffs)


def test_unit_control_reproduces_plain_simulator_bitwise(basis, grid, marks):
    rng = np.random.default_rng(2)
    u0 = random_field(basis, rng, amplitude=0.4)
    noise = make_noise(basis, marks)
    sc = ScalingSpec(eps=0.02)
    plain = simulate_u_eps(sc, u0, noise, grid, seed=11)
    phi1 = ControlField.from_phi(marks, grid, np.ones((2, grid.n_steps)), a_eps=sc.a)
    ctrl = simulate_controlled_X(sc, u0, noise, phi1, grid, seed=11)
    for a, b in zip(plain.fields, ctrl.fields):
        assert np.array_equal(a.coeffs, b.coeffs)


def test_seed_determinism(basis, grid, marks):
    rng = np.random.default_rng(3)
    u0 = random_field(basis, rng, amplitude=0.4)
    noise = make_noise(basis, marks)
    sc = ScalingSpec(eps=0.05)
    t1 = simulate_u_eps(sc, u0, noise, grid, seed=5)
    t2 = simulate_u_eps(sc, u0, noise, grid, seed=5)
    for a, b in zip(t1.fields, t2.fields):
        assert np.array_equal(a.coeffs, b.coeffs)
    t3 = simulate_u_eps(sc, u0, noise, grid, seed=6)
    assert any(not np.array_equal(a.coeffs, b.coeffs)
               for a, b in zip(t1.fields, t3.fields))


def test_eps_sweep_gap_decreases(basis, grid, marks):
    rng = np.random.default_rng(4)
    u0 = random_field(basis, rng, amplitude=0.4)
    noise = make_noise(basis, marks)
    det = solve_nse(u0, ForceSpec.zero(basis), grid)
    ref = np.stack([f.coeffs for f in det.fields])
    gaps = []
    for eps in (1e-1, 1e-2, 1e-3):
        res = run_jump_ensemble(ScalingSpec(eps=eps), u0, noise, grid, seed=13,
                                replicas=60, ref_coeffs=ref)
        gaps.append(res.sup_diff_h2.mean())
    assert gaps[0] > gaps[1] > gaps[2], gaps


def test_uniform_moment_bound_recorded(basis, grid, marks):
    rng = np.random.default_rng(5)
    u0 = random_field(basis, rng, amplitude=0.4)
    noise = make_noise(basis, marks)
    bounds = []
    for eps in (1e-1, 1e-2, 1e-3):
        res = run_jump_ensemble(ScalingSpec(eps=eps), u0, noise, grid, seed=17,
                                replicas=40)
        bounds.append(res.sup_h2.mean() + res.int_v2.mean())
    # discrete analogue of the uniform second-moment estimate
    assert max(bounds) < 10 * (bounds[-1] + 1e-12)


def test_compensation_martingale(basis, grid, marks):
    # constant G, u0 = 0, f = 0: the deterministic solution is 0 and the
    # compensated jump integral is mean zero, so E<u(T), probe> ~ 0
    noise = make_noise(basis, marks, lin=0.0, amp=0.4)
    u0 = SpectralField.zero(basis)
    probe = SpectralField.from_modes(basis, {(1, 0): 1.0})
    sc = ScalingSpec(eps=1e-3)
    reps = 400
    res = run_jump_ensemble(sc, u0, noise, grid, seed=23, replicas=reps,
                            collect_trajectories=True)
    vals = np.array([inner_h(tr[-1], probe) for tr in res.trajectories])
    se = vals.std() / math.sqrt(reps)
    assert abs(vals.mean()) <= 3 * se + 1e-12


def test_event_budget_refusal(basis, grid, marks):
    u0 = SpectralField.zero(basis)
    noise = make_noise(basis, marks)
    with pytest.raises(EventBudgetError):
        simulate_u_eps(ScalingSpec(eps=1e-6), u0, noise, grid, seed=0,
                       event_budget=1000)


# ---------------------------------------------------------------------------
# moderate process
# ---------------------------------------------------------------------------

def test_moderate_process_zero_and_linearity(basis, grid):
    rng = np.random.default_rng(6)
    u0 = random_field(basis, rng, amplitude=0.4)
    det = solve_nse(u0, ForceSpec.zero(basis), grid)
    sc = ScalingSpec(eps=1e-2)
    y = moderate_process(det, det, sc)
    assert all(np.all(f.coeffs == 0) for f in y.fields)
    pert = random_field(basis, rng, amplitude=0.1)
    from nse_mdp.spectral import Trajectory
    shifted = Trajectory(t0=det.t0, T=det.T, dt=det.dt,
                         fields=[f + pert for f in det.fields])
    y1 = moderate_process(shifted, det, sc)
    shifted2 = Trajectory(t0=det.t0, T=det.T, dt=det.dt,
                          fields=[f + 2.0 * pert for f in det.fields])
    y2 = moderate_process(shifted2, det, sc)
    np.testing.assert_allclose(y2[5].coeffs, 2.0 * y1[5].coeffs, rtol=1e-12)


def test_moderate_process_grid_mismatch(basis):
    rng = np.random.default_rng(7)
    u0 = random_field(basis, rng, amplitude=0.3)
    a = solve_nse(u0, ForceSpec.zero(basis), TimeGrid(T=0.4, n_steps=40))
    b = solve_nse(u0, ForceSpec.zero(basis), TimeGrid(T=0.4, n_steps=20))
    from nse_mdp.dynamics import TimeGridMismatchError
    with pytest.raises(TimeGridMismatchError):
        moderate_process(a, b, ScalingSpec(eps=0.1))


# ---------------------------------------------------------------------------
# ensemble statistics
# ---------------------------------------------------------------------------

def diag(seed, rep, *, h="c0ffee", sup=1.0, iv=2.0, th=0.5, tv=1.5):
    return RunDiagnostics(config_hash=h, seed=seed, replica=rep, sup_h2=sup,
                          int_v2=iv, terminal_h=th, terminal_v=tv)


def test_ensemble_stats_identical_runs():
    t = ensemble_stats([diag(1, 0), diag(1, 1), diag(1, 2)])
    assert t["sup_h2"]["variance"] == 0.0
    assert t["sup_h2"]["mean"] == 1.0
    assert t["count"] == 3


def test_ensemble_stats_hand_computed():
    t = ensemble_stats([diag(1, 0, sup=1.0), diag(1, 1, sup=3.0)])
    assert t["sup_h2"]["mean"] == 2.0
    assert t["sup_h2"]["variance"] == 1.0   # population variance
    assert t["sup_h2"]["max"] == 3.0


def test_ensemble_stats_order_invariant():
    runs = [diag(3, 0, sup=5.0), diag(1, 0, sup=1.0), diag(2, 0, sup=2.0)]
    assert ensemble_stats(runs) == ensemble_stats(list(reversed(runs)))


def test_ensemble_stats_errors():
    with pytest.raises(ValueError):
        ensemble_stats([diag(1, 0)])
    with pytest.raises(ValueError):
        ensemble_stats([diag(1, 0), diag(1, 1, h="other")])


def test_uncontrolled_sweep_decreases_at_full_ensemble(basis, grid, marks):
    # plain (uncontrolled) simulator: mean-square gap to the deterministic
    # flow decreases across the eps sweep at ensemble size 200
    rng = np.random.default_rng(8)
    u0 = random_field(basis, rng, amplitude=0.4)
    noise = make_noise(basis, marks)
    det = solve_nse(u0, ForceSpec.zero(basis), grid)
    ref = np.stack([f.coeffs for f in det.fields])
    gaps = []
    for eps in (1e-1, 1e-2, 1e-3):
        res = run_jump_ensemble(ScalingSpec(eps=eps), u0, noise, grid, seed=29,
                                replicas=200, ref_coeffs=ref)
        gaps.append(res.sup_diff_h2.mean())
    assert gaps[0] > gaps[1] > gaps[2], gaps


def test_controlled_with_zero_G_equals_deterministic(basis, grid, marks):
    rng = np.random.default_rng(9)
    u0 = random_field(basis, rng, amplitude=0.4)
    f = ForceSpec.zero(basis)
    noise = NoiseModel(marks=marks,
                       G=AffineCoefficient(basis, h=[0.0, 0.0],
                                           bases=SpectralField.zero(basis), lin=0.0),
                       f=f)
    det = solve_nse(u0, f, grid)
    sc = ScalingSpec(eps=0.05)
    phi = ControlField.from_phi(marks, grid, 1.0 + 0.3 * np.ones((2, grid.n_steps)),
                                a_eps=sc.a)
    ctrl = simulate_controlled_X(sc, u0, noise, phi, grid, seed=30)
    for a, b in zip(det.fields, ctrl.fields):
        np.testing.assert_array_equal(a.coeffs, b.coeffs)
