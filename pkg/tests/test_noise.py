"""Poisson sampling, thinning, the entropy cost, and Condition A checks."""

import math

import numpy as np
import pytest
from scipy import stats

from nse_mdp.dynamics import TimeGrid
from nse_mdp.noise import (
    AffineCoefficient,
    CallableCoefficient,
    ControlField,
    EventBudgetError,
    JumpStream,
    MarkSpace,
    NoiseModel,
    ThinningRangeError,
    control_class_check,
    cost_LT,
    entropy_l,
    psi_truncate,
    read_jump_stream,
    sample_prm,
    thin_to_control,
    verify_condition_A,
    write_jump_stream,
)
from nse_mdp.spectral import Basis, SpectralField


@pytest.fixture
def marks():
    return MarkSpace(weights=np.array([1.0, 0.5]))


@pytest.fixture
def grid():
    return TimeGrid(T=1.0, n_steps=16)


def poisson_gof_pvalue(counts, lam):
    """Chi-square goodness of fit of integer counts against Poisson(lam)."""
    counts = np.asarray(counts)
    n = counts.size
    kmax = int(counts.max())
    # bin the upper tail so every expected count is at least ~5
    edges = list(range(kmax + 2))
    exp_pmf = stats.poisson.pmf(np.arange(kmax + 1), lam)
    while len(edges) > 2 and exp_pmf[edges[-2]:].sum() * n < 5:
        edges.pop(-2)
    obs, exp = [], []
    lo = 0
    for hi in edges[1:]:
        obs.append(np.sum((counts >= lo) & (counts < hi)))
        if hi == edges[-1]:
            exp.append(n * (1 - stats.poisson.cdf(lo - 1, lam)))
        else:
            exp.append(n * exp_pmf[lo:hi].sum())
        lo = hi
    obs, exp = np.array(obs, dtype=float), np.array(exp)
    chi2 = np.sum((obs - exp) ** 2 / exp)
    return 1 - stats.chi2.cdf(chi2, df=len(obs) - 1)


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------

def test_sample_prm_empty_marks(grid):
    empty = MarkSpace(weights=np.array([]))
    s = sample_prm(2.0, empty, grid, rng_seed=0)
    assert len(s) == 0


def test_sample_prm_mean_count(grid):
    # theta = 2, T = 1, single mark with weight 3: mean count 6
    marks = MarkSpace(weights=np.array([3.0]))
    reps = 20000
    counts = np.array([len(sample_prm(2.0, marks, grid, rng_seed=5, replica=r))
                       for r in range(reps)])
    se = math.sqrt(6.0 / reps)
    assert abs(counts.mean() - 6.0) <= 3 * se


def test_sample_prm_chi_square(grid, marks):
    reps = 20000
    theta = 1.5
    per_mark = np.array([sample_prm(theta, marks, grid, rng_seed=11, replica=r).counts(2)
                         for r in range(reps)])
    for i in range(2):
        p = poisson_gof_pvalue(per_mark[:, i], theta * grid.T * marks.weights[i])
        assert p > 0.01, f"mark {i}: p={p}"


def test_sample_prm_reproducible(grid, marks):
    a = sample_prm(2.0, marks, grid, rng_seed=3, r_max=1.0)
    b = sample_prm(2.0, marks, grid, rng_seed=3, r_max=1.0)
    np.testing.assert_array_equal(a.times, b.times)
    np.testing.assert_array_equal(a.marks, b.marks)
    np.testing.assert_array_equal(a.r, b.r)
    c = sample_prm(2.0, marks, grid, rng_seed=4, r_max=1.0)
    assert len(c) != len(a) or not np.array_equal(a.times, c.times)


def test_sample_prm_event_budget(grid, marks):
    with pytest.raises(EventBudgetError):
        sample_prm(1e9, marks, grid, rng_seed=0, event_budget=10_000)


def test_sample_prm_times_strictly_increasing(grid, marks):
    s = sample_prm(50.0, marks, grid, rng_seed=8)
    assert np.all(np.diff(s.times) > 0)


def test_continuous_mark_space_sampling(grid):
    cont = MarkSpace(density=lambda x: 2.0 * x, density_bound=2.0, total_mass=1.0)
    s = sample_prm(40.0, cont, grid, rng_seed=2)
    assert np.all((0 <= s.marks) & (s.marks <= 1))
    # density 2x: mean mark 2/3
    assert abs(s.marks.mean() - 2 / 3) < 0.1
    with pytest.raises(NotImplementedError):
        cont.require_finite("x")


# ---------------------------------------------------------------------------
# thinning
# ---------------------------------------------------------------------------

def test_thinning_zero_control(grid, marks):
    base = sample_prm(3.0, marks, grid, rng_seed=1, r_max=3.0)
    phi = ControlField.from_phi(marks, grid, np.zeros((2, 16)), a_eps=1.0)
    assert len(thin_to_control(base, phi)) == 0


def test_thinning_full_retention(grid, marks):
    base = sample_prm(1.0, marks, grid, rng_seed=1, r_max=1.0)
    phi = ControlField.from_phi(marks, grid, np.ones((2, 16)), a_eps=1.0)
    assert len(thin_to_control(base, phi)) == len(base)


def test_thinning_matches_direct_sampling(grid, marks):
    # thinning a rate-3 base down to phi = 1.2 must look like direct
    # sampling at rate 1.2
    reps = 20000
    theta = 1.2
    phi = ControlField.from_phi(marks, grid, np.full((2, 16), theta), a_eps=1.0)
    thinned = np.array([
        thin_to_control(sample_prm(3.0, marks, grid, rng_seed=21, replica=r, r_max=3.0),
                        phi).counts(2)
        for r in range(reps)])
    for i in range(2):
        p = poisson_gof_pvalue(thinned[:, i], theta * grid.T * marks.weights[i])
        assert p > 0.01, f"mark {i}: p={p}"


def test_thinning_unbiased(grid, marks):
    # E[count of N^phi on [0,T] x {mark}] = int phi dtheta_T, within 3 sigma
    reps = 5000
    rng = np.random.default_rng(17)
    phi_vals = rng.uniform(0.2, 2.4, size=(2, 16))
    phi = ControlField.from_phi(marks, grid, phi_vals, a_eps=1.0)
    counts = np.array([
        thin_to_control(sample_prm(2.5, marks, grid, rng_seed=31, replica=r, r_max=2.5),
                        phi).counts(2)
        for r in range(reps)])
    dt = grid.dt
    for i in range(2):
        expect = phi_vals[i].sum() * dt * marks.weights[i]
        se = math.sqrt(expect / reps)
        assert abs(counts[:, i].mean() - expect) <= 3 * se


def test_thinning_requires_r(grid, marks):
    base = sample_prm(1.0, marks, grid, rng_seed=0)
    phi = ControlField.from_phi(marks, grid, np.ones((2, 16)), a_eps=1.0)
    with pytest.raises(ThinningRangeError):
        thin_to_control(base, phi)


def test_thinning_r_max_too_small(grid, marks):
    base = sample_prm(1.0, marks, grid, rng_seed=0, r_max=1.0)
    phi = ControlField.from_phi(marks, grid, np.full((2, 16), 1.5), a_eps=1.0)
    with pytest.raises(ThinningRangeError):
        thin_to_control(base, phi)


def test_compensation_monte_carlo(grid, marks):
    # for phi = theta the compensated count over a rectangle averages to 0
    # at the Monte Carlo rate
    reps = 4000
    theta = 2.0
    B_T = 0.5   # rectangle [0, 0.5] x {mark 0}
    vals = []
    for r in range(reps):
        s = sample_prm(theta, marks, grid, rng_seed=41, replica=r)
        n_B = int(np.sum((s.times <= B_T) & (s.marks == 0)))
        vals.append(n_B - theta * B_T * marks.weights[0])
    mean = np.mean(vals)
    se = np.std(vals) / math.sqrt(reps)
    assert abs(mean) <= 3 * se


def test_jump_stream_csv_roundtrip(tmp_path, grid, marks):
    s = sample_prm(5.0, marks, grid, rng_seed=13, r_max=2.0)
    path = tmp_path / "jumps.csv"
    write_jump_stream(path, s)
    back = read_jump_stream(path, r_max=2.0, T=grid.T)
    np.testing.assert_array_equal(back.times, s.times)
    np.testing.assert_array_equal(back.marks, s.marks)
    np.testing.assert_array_equal(back.r, s.r)


# ---------------------------------------------------------------------------
# cost functional and control classes
# ---------------------------------------------------------------------------

def test_entropy_l_properties():
    r = np.linspace(0.0, 5.0, 501)
    vals = entropy_l(r)
    assert np.all(vals >= 0)
    assert entropy_l(1.0) == 0.0
    assert entropy_l(0.0) == 1.0
    assert np.all(vals[r != 1.0] > 0)
    # convexity on the grid
    assert np.all(np.diff(vals, 2) >= -1e-12)


def test_cost_unit_control_is_zero(grid, marks):
    phi = ControlField.from_phi(marks, grid, np.ones((2, 16)), a_eps=0.5)
    assert cost_LT(phi) == 0.0


def test_cost_single_mark_e():
    # l(e) = e - e + 1 = 1; with weight 1 and T = 1 the cost is exactly 1
    marks = MarkSpace(weights=np.array([1.0]))
    grid = TimeGrid(T=1.0, n_steps=8)
    phi = ControlField.from_phi(marks, grid, np.full((1, 8), math.e), a_eps=1.0)
    assert cost_LT(phi) == pytest.approx(1.0, rel=1e-14)


def test_cost_extended_precision_oracle(grid, marks):
    rng = np.random.default_rng(5)
    vals = rng.uniform(0.0, 3.0, size=(2, 16))
    phi = ControlField.from_phi(marks, grid, vals, a_eps=1.0)
    got = cost_LT(phi)
    terms = []
    for i in range(2):
        for n in range(16):
            r = vals[i, n]
            l = r * math.log(r) - r + 1.0 if r > 0 else 1.0
            terms.append(l * marks.weights[i] * grid.dt)
    assert got == pytest.approx(math.fsum(terms), rel=1e-12)


def test_cost_rejects_negative(grid, marks):
    with pytest.raises(ValueError):
        cost_LT(np.full((2, 16), -0.1), marks, grid)


def test_cost_taylor_link_to_quadratic_norm(grid, marks):
    rng = np.random.default_rng(6)
    psi_vals = rng.standard_normal((2, 16))
    psi = ControlField.from_psi(marks, grid, psi_vals, a_eps=1.0)
    half_norm = 0.5 * psi.l2_norm_sq()
    a = 1e-3
    phi = ControlField.from_phi(marks, grid, 1.0 + a * psi_vals, a_eps=a)
    assert cost_LT(phi) / a ** 2 == pytest.approx(half_norm, rel=1e-3)


def test_control_class_check(grid, marks):
    eps = 1e-2
    a = eps ** 0.4
    assert control_class_check(
        ControlField.from_phi(marks, grid, np.ones((2, 16)), a_eps=a), 0.0, eps)
    psi_vals = 0.5 * np.ones((2, 16))
    phi = ControlField.from_phi(marks, grid, 1.0 + a * psi_vals, a_eps=a)
    # cost ~ a^2/2 ||psi||^2 = a^2 * 0.1875 * T ... below M = 1
    assert control_class_check(phi, 1.0, eps)
    big = ControlField.from_phi(marks, grid, np.full((2, 16), 50.0), a_eps=a)
    assert not control_class_check(big, 1.0, eps)


def test_psi_truncate(grid, marks):
    eps, gamma = 1e-2, 0.4
    a = eps ** gamma
    cut = 0.5 / a
    vals = np.array([[0.3 * cut] * 16, [2.0 * cut] * 16])
    psi = ControlField.from_psi(marks, grid, vals, a_eps=a)
    out = psi_truncate(psi, beta=0.5, eps=eps, gamma=gamma)
    np.testing.assert_array_equal(out.values[0], vals[0])   # kept
    np.testing.assert_array_equal(out.values[1], 0.0)       # zeroed
    small = psi_truncate(ControlField.from_psi(marks, grid, 0.1 * vals, a_eps=a),
                         beta=1.0, eps=eps, gamma=gamma)
    np.testing.assert_array_equal(small.values, 0.1 * vals)
    with pytest.raises(ValueError):
        psi_truncate(psi, beta=1.5, eps=eps)


def test_control_field_conversions(grid, marks):
    a = 0.25
    psi_vals = np.linspace(-1, 1, 32).reshape(2, 16)
    psi = ControlField.from_psi(marks, grid, psi_vals, a_eps=a)
    np.testing.assert_allclose(psi.as_phi(), 1.0 + a * psi_vals)
    phi = ControlField.from_phi(marks, grid, psi.as_phi(), a_eps=a)
    np.testing.assert_allclose(phi.as_psi(), psi_vals, atol=1e-15)
    with pytest.raises(ValueError):
        ControlField.from_phi(marks, grid, np.full((2, 16), -0.5), a_eps=a)


# ---------------------------------------------------------------------------
# Condition A verification
# ---------------------------------------------------------------------------

def test_condition_A_affine_passes(marks):
    b = Basis(N=3, nu=1.0)
    g0 = SpectralField.from_modes(b, {(1, 0): 0.3, (1, 1): 0.2j})
    G = AffineCoefficient(b, h=[1.0, 0.6], bases=g0, lin=0.4, cap=2)
    noise = NoiseModel(marks=marks, G=G)
    rep = verify_condition_A(noise, n_samples=100, seed=1)
    assert rep.passed, str(rep)
    assert rep.max_lipschitz_ratio <= 1 + 1e-12
    assert rep.max_growth_ratio <= 1 + 1e-12
    assert "automatically" in rep.notes


def test_condition_A_halved_lipschitz_fails(marks):
    b = Basis(N=3, nu=1.0)
    g0 = SpectralField.from_modes(b, {(1, 0): 0.3})
    G = AffineCoefficient(b, h=[1.0, 0.6], bases=g0, lin=0.4, cap=3)
    noise = NoiseModel(marks=marks, G=G, L_G=0.5 * G.declared_LG(),
                       M_G=G.declared_MG())
    rep = verify_condition_A(noise, n_samples=50, seed=2)
    assert not rep.passed
    # cap = N: the projection is the identity, so the observed ratio is 2
    assert rep.max_lipschitz_ratio == pytest.approx(2.0, rel=1e-10)
    assert any(v[0] == "lipschitz" for v in rep.violations)


def test_condition_A_constant_G_zero_lipschitz(marks):
    b = Basis(N=3, nu=1.0)
    g0 = SpectralField.from_modes(b, {(1, 0): 0.3})
    G = AffineCoefficient(b, h=[1.0, 0.6], bases=g0, lin=0.0)
    noise = NoiseModel(marks=marks, G=G)
    np.testing.assert_array_equal(noise.L_G, 0.0)
    rep = verify_condition_A(noise, n_samples=50, seed=3)
    assert rep.passed


def test_callable_coefficient_matches_affine(marks):
    b = Basis(N=2, nu=1.0)
    g0 = SpectralField.from_modes(b, {(1, 0): 0.3})
    G = AffineCoefficient(b, h=[1.0, 0.6], bases=g0, lin=0.4, cap=1)
    Gc = CallableCoefficient(b, lambda x, i: G.field(x, i), n_marks=2)
    rng = np.random.default_rng(0)
    from nse_mdp.spectral import random_field
    x = random_field(b, rng)
    w = np.array([0.7, -0.2])
    np.testing.assert_allclose(Gc.combine(w, x.coeffs), G.combine(w, x.coeffs),
                               atol=1e-14)
