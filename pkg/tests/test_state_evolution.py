"""State evolution: section expectation, recursion, asymptotic wave."""

import math

import numpy as np
import pytest
from scipy.integrate import quad

from scsparc.params import LN2, CouplingParams, build_base_matrix, derive_code_params
from scsparc.state_evolution import (
    SectionExpectation,
    asymptotic_se,
    psi_step_bounds,
    mc_expectation_E,
    progression_report,
    run_se,
    se_step,
)


def quad_expectation_M2(tau):
    """1-D quadrature oracle for M=2: the posterior mass on the true entry
    depends only on the Gaussian difference D = (U2 - U1)/sqrt(2)."""

    def integrand(u):
        d = math.sqrt(2.0) * u  # U2 - U1 ~ N(0, 2)
        return (
            1.0 / (1.0 + math.exp(d / math.sqrt(tau) - 1.0 / tau))
        ) * math.exp(-u * u / 2.0) / math.sqrt(2 * math.pi)

    val, err = quad(integrand, -12, 12, limit=200)
    assert err < 1e-7
    return val


@pytest.mark.parametrize("tau", [0.05, 0.2, 1.0])
def test_expectation_matches_quadrature_M2(tau):
    n = 100_000
    est = mc_expectation_E(tau, 2, n_samples=n, seed=0)
    oracle = quad_expectation_M2(tau)
    # binomial-style standard error bound for a [0,1] variable
    se = 0.5 / math.sqrt(n)
    assert abs(est - oracle) < 3 * se
    # the low-variance estimator must agree much more tightly
    cond = SectionExpectation(2, n_samples=20_000, seed=1)(tau)
    assert abs(cond - oracle) < 5e-3


def test_expectation_tau_to_zero():
    # as tau -> 0 the true entry dominates and E -> 1
    assert mc_expectation_E(1e-4, 4, n_samples=10_000, seed=0) >= 1 - 1e-3
    assert SectionExpectation(4, 10_000, seed=0)(1e-4) >= 1 - 1e-3


def test_expectation_monotone_in_tau():
    # common random numbers across a 20-point grid
    exp = SectionExpectation(16, n_samples=5_000, seed=2)
    grid = np.geomspace(0.01, 5.0, 20)
    vals = [exp(t) for t in grid]
    assert all(a >= b for a, b in zip(vals, vals[1:]))


def test_expectation_estimators_agree():
    for tau, M in [(0.1, 8), (0.3, 64), (1.0, 512)]:
        a = SectionExpectation(M, 20_000, seed=3)(tau)
        b = mc_expectation_E(tau, M, 200_000, seed=4)
        assert abs(a - b) < 5e-3


def test_se_step_interior_phi():
    # with psi = 1 an interior row of the band matrix sees
    # phi = sigma2 + vartheta * P (only when every band column is interior,
    # i.e. row r collects omega band entries of value (1-rho)P*R/omega)
    coupling = CouplingParams(omega=3, Lambda=12)
    P, sigma2 = 1.0, 0.25
    W = build_base_matrix(coupling, P)
    psi = np.ones(W.cols)
    phi = sigma2 + W.entries @ psi / W.cols
    # interior row r in [omega-1, Lambda-1]: omega entries of P*rows/omega
    interior = phi[3:11]
    expected = sigma2 + P * W.rows / W.cols
    assert np.allclose(interior, expected)
    assert math.isclose(P * W.rows / W.cols, coupling.vartheta * P)


def test_se_step_tau_formula():
    params = derive_code_params(
        1.0 * LN2, 8, CouplingParams(2, 4), 32, P=1.0, sigma2=0.1
    )
    W = params.base
    exp = SectionExpectation(8, 2000, seed=0)
    psi = np.full(W.cols, 0.5)
    phi, tau, psi_next = se_step(W, psi, params.sigma2, params.R, 8, exp)
    # oracle: direct loop evaluation of the definitions
    for r in range(W.rows):
        assert math.isclose(phi[r], params.sigma2 + W.entries[r].dot(psi) / W.cols)
    for c in range(W.cols):
        info = np.mean(W.entries[:, c] / phi)
        assert math.isclose(tau[c], (params.R / math.log(8)) / info)
        assert math.isclose(psi_next[c], 1.0 - exp(tau[c]), abs_tol=1e-12)
    assert np.all((psi_next >= 0) & (psi_next <= 1))


def test_run_se_threshold_one():
    params = derive_code_params(
        1.0 * LN2, 8, CouplingParams(2, 4), 32, P=1.0, sigma2=0.1
    )
    traj = run_se(params.base, params, threshold=1.0, t_max=10)
    assert traj.iterations == 0
    assert traj.reached_threshold


def test_run_se_decodes_well_below_capacity():
    # snr=15 (capacity 2 bits), rate 1 bit: psi must hit the floor
    params = derive_code_params(
        1.0 * LN2, 32, CouplingParams(3, 8), 64, P=1.0, sigma2=1 / 15
    )
    traj = run_se(params.base, params, threshold=1e-2, t_max=60, mc_samples=4000)
    assert traj.reached_threshold
    # wave decodes from the edges inward: edge blocks fall first
    mid_t = max(1, traj.iterations // 2)
    psi_mid = traj.psi[mid_t]
    assert psi_mid[0] <= psi_mid[len(psi_mid) // 2] + 1e-12
    assert psi_mid[-1] <= psi_mid[len(psi_mid) // 2] + 1e-12


def test_run_se_uncoupled_stall():
    # a 1x1 base matrix at a rate near capacity stalls above threshold
    snr = 15.0
    R = 0.98 * 0.5 * math.log1p(snr)
    params = derive_code_params(
        R, 64, CouplingParams(1, 1), 64, P=1.0, sigma2=1 / snr
    )
    traj = run_se(params.base, params, threshold=1e-2, t_max=60, mc_samples=4000)
    assert not traj.reached_threshold
    assert traj.psi[-1][0] > 0.5


def test_run_se_psi_monotone():
    params = derive_code_params(
        1.2 * LN2, 16, CouplingParams(3, 8), 64, P=1.0, sigma2=1 / 15
    )
    traj = run_se(params.base, params, threshold=1e-4, t_max=30, mc_samples=4000)
    diffs = np.diff(traj.psi, axis=0)
    assert np.all(diffs <= 1e-9)


def test_asymptotic_se_monotone_and_symmetric():
    W = build_base_matrix(CouplingParams(4, 16), 1.0)
    hist = asymptotic_se(W, R=0.6, sigma2=1 / 15)
    assert np.all(np.diff(hist, axis=0) <= 0)  # 0/1, nonincreasing
    for row in hist:
        assert np.array_equal(row, row[::-1])  # symmetric wave


def test_asymptotic_one_shot_rate():
    # rate low enough that the very first iteration decodes every block
    snr = 15.0
    coupling = CouplingParams(6, 32)
    vt = coupling.vartheta
    delta = 0.1
    R = 0.9 * (1.0 - 0.0) / (2.0 + delta) * snr / (1.0 + vt * snr)
    W = build_base_matrix(coupling, 1.0)
    hist = asymptotic_se(W, R=R, sigma2=1 / snr)
    assert np.all(hist[1] == 0.0)


def test_progression_report_flagship():
    snr = 15.0
    rep = progression_report(R=1.5 * LN2, snr=snr, omega=6, Lambda=32, M=512)
    vt = 1 + 5 / 32
    assert math.isclose(rep.vartheta, vt)
    assert math.isclose(rep.Delta, 0.5 / vt * math.log1p(vt * snr) - 1.5 * LN2)
    assert math.isclose(rep.g, (1 + vt * snr) * rep.Delta / (vt * snr**2) * 6)
    assert rep.feasible == (rep.Delta > 0 and 6 > rep.omega_min)
    if rep.feasible:
        assert rep.T_bound == math.ceil(32 / (2 * rep.g))


def test_psi_step_bounds_formula():
    M, delta, k = 2**20, 0.3, 1.0
    lo, hi = psi_step_bounds(nu=2.5, M=M, delta=delta, delta_tilde=0.2, k=k)
    floor = M ** (-k * delta**2) / (delta * math.sqrt(math.log(M)))
    assert math.isclose(hi, 1.0 - (1.0 - floor))
    assert lo == 0.0  # nu not below 2 - delta_tilde
    lo2, _ = psi_step_bounds(nu=1.0, M=M, delta=delta, delta_tilde=0.2)
    assert math.isclose(lo2, 1.0 - M ** (-0.2**2))


def test_expectation_validation():
    with pytest.raises(ValueError):
        SectionExpectation(1)
    with pytest.raises(ValueError):
        SectionExpectation(4)(0.0)
    with pytest.raises(ValueError):
        mc_expectation_E(-1.0, 4)
