"""State evolution for the AMP decoder.

The recursion tracks, per iteration, the residual variance phi_r of each
row block, the effective observation noise tau_c at the denoiser for each
column block, and the predicted per-block NMSE psi_c. The expectation that
drives psi is evaluated by Monte Carlo with common random numbers, so a
whole trajectory reuses one sample of section noise and the monotonicity
of the recursion is preserved. An asymptotic (large section size) variant
replaces the expectation with a 0/1 threshold and yields the analytic
decoding-wave predictions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .params import BaseMatrix, CouplingParams, SparcParams

__all__ = [
    "SectionExpectation",
    "mc_expectation_E",
    "se_step",
    "run_se",
    "SeTrajectory",
    "asymptotic_se",
    "ProgressionReport",
    "progression_report",
    "psi_step_bounds",
]

DEFAULT_MC_SAMPLES = 10_000


class SectionExpectation:
    """Expected posterior mass on the correct entry of a section.

    For a section observed in Gaussian noise of effective variance tau, the
    denoiser puts mass exp(U_1/sqrt(tau)) / (exp(U_1/sqrt(tau)) +
    exp(-1/tau) * sum_{j>=2} exp(U_j/sqrt(tau))) on the true entry, with
    U_1..U_M standard normal. Instances hold one fixed sample matrix, so
    repeated calls across tau values share the same randomness.

    The true-entry coordinate U_1 is integrated out exactly by
    Gauss-Hermite quadrature; Monte Carlo is only over the interference
    term sum_{j>=2} exp(U_j/sqrt(tau)). This cuts the estimator variance
    by orders of magnitude, which matters because errors in the expectation
    compound across state-evolution iterations and shift the predicted
    decoding wave.
    """

    GH_NODES = 64

    def __init__(self, M: int, n_samples: int = DEFAULT_MC_SAMPLES, seed=0):
        if M < 2:
            raise ValueError("M must be >= 2")
        if n_samples < 1:
            raise ValueError("n_samples must be >= 1")
        self.M = M
        self.n_samples = n_samples
        rng = np.random.default_rng(seed)
        self._U = rng.standard_normal((n_samples, M - 1))
        nodes, wts = np.polynomial.hermite.hermgauss(self.GH_NODES)
        self._gh_x = math.sqrt(2.0) * nodes
        self._gh_w = wts / math.sqrt(math.pi)

    def __call__(self, tau: float) -> float:
        if tau <= 0:
            raise ValueError(f"tau must be positive, got {tau}")
        b = 1.0 / math.sqrt(tau)
        # log of the interference sum, per Monte Carlo sample
        log_s = logsumexp(self._U * b, axis=1)
        # E = mean over samples and quadrature nodes of
        # sigmoid(1/tau + u*b - log_s), the posterior mass on the true entry
        arg = (1.0 / tau) + self._gh_x[np.newaxis, :] * b - log_s[:, np.newaxis]
        vals = _sigmoid(arg) @ self._gh_w
        return float(vals.mean())


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    e = np.exp(x[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def mc_expectation_E(
    tau: float, M: int, n_samples: int = DEFAULT_MC_SAMPLES, seed=0
) -> float:
    """Plain Monte Carlo estimate of the section expectation at tau.

    Draws n_samples sections of M standard normals and averages the
    posterior mass on the true entry, evaluated via logsumexp. Common
    random numbers across tau values: the sample depends only on the seed.
    """
    if tau <= 0:
        raise ValueError(f"tau must be positive, got {tau}")
    if M < 2:
        raise ValueError("M must be >= 2")
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    rng = np.random.default_rng(seed)
    U = rng.standard_normal((n_samples, M))
    x = U / math.sqrt(tau)
    x[:, 0] += 1.0 / tau
    vals = np.exp(x[:, 0] - logsumexp(x, axis=1))
    return float(vals.mean())


def se_step(
    W: BaseMatrix,
    psi: np.ndarray,
    sigma2: float,
    R: float,
    M: int,
    expectation: SectionExpectation,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """One state-evolution step; returns (phi, tau, psi_next).

    phi_r = sigma2 + (1/C) sum_c W_rc psi_c
    tau_c = (R/ln M) * [(1/R_blocks) sum_r W_rc/phi_r]^{-1}
    psi_next_c = 1 - E(tau_c)
    """
    psi = np.asarray(psi, dtype=float)
    if np.any((psi < 0) | (psi > 1)):
        raise ValueError("psi entries must lie in [0, 1]")
    Wm = W.entries
    phi = sigma2 + Wm @ psi / W.cols
    col_info = (Wm / phi[:, np.newaxis]).mean(axis=0)
    if np.any(col_info <= 0):
        raise ZeroDivisionError("a base-matrix column is identically zero")
    tau = (R / math.log(M)) / col_info
    # tau values repeat across symmetric columns; evaluate each one once
    psi_next = np.empty(W.cols)
    cache: dict[float, float] = {}
    for c, t in enumerate(tau):
        if t not in cache:
            cache[t] = 1.0 - expectation(t)
        psi_next[c] = cache[t]
    return phi, tau, np.clip(psi_next, 0.0, 1.0)


@dataclass
class SeTrajectory:
    """Per-iteration state-evolution arrays.

    psi has shape (T+1, C) with psi[0] = 1; phi, sigma, tau, nu have shape
    (T, ...) where row t holds the values used to produce psi[t+1].
    sigma_perp and tau_perp are the increment-variance diagnostics
    sigma_r^t (1 - sigma_r^t/sigma_r^{t-1}) and the tau analogue, with the
    t=0 rows equal to sigma^0 and tau^0.
    """

    psi: np.ndarray
    phi: np.ndarray
    sigma: np.ndarray
    tau: np.ndarray
    nu: np.ndarray
    sigma_perp: np.ndarray
    tau_perp: np.ndarray
    threshold: float
    reached_threshold: bool

    @property
    def iterations(self) -> int:
        return self.phi.shape[0]


def run_se(
    W: BaseMatrix,
    params: SparcParams,
    threshold: float = 1e-4,
    t_max: int = 200,
    mc_samples: int = DEFAULT_MC_SAMPLES,
    seed=0,
) -> SeTrajectory:
    """Iterate state evolution until every psi_c <= threshold or t_max.

    Common random numbers are reused across all tau evaluations of the run.
    """
    if not 0.0 < threshold < 1.0:
        # threshold == 1 is allowed as the trivial stop-at-start case
        if threshold != 1.0:
            raise ValueError("stop threshold must lie in (0, 1]")
    expectation = SectionExpectation(params.M, mc_samples, seed)
    psi_hist = [np.ones(W.cols)]
    phi_hist, sigma_hist, tau_hist = [], [], []
    reached = bool(np.all(psi_hist[0] <= threshold))
    t = 0
    while not reached and t < t_max:
        phi, tau, psi_next = se_step(
            W, psi_hist[-1], params.sigma2, params.R, params.M, expectation
        )
        phi_hist.append(phi)
        sigma_hist.append(phi - params.sigma2)
        tau_hist.append(tau)
        psi_hist.append(psi_next)
        reached = bool(np.all(psi_next <= threshold))
        t += 1

    psi = np.array(psi_hist)
    phi = np.array(phi_hist).reshape(t, W.rows)
    sigma = np.array(sigma_hist).reshape(t, W.rows)
    tau = np.array(tau_hist).reshape(t, W.cols)
    nu = 1.0 / (tau * math.log(params.M)) if t else tau.copy()

    sigma_perp = sigma.copy()
    tau_perp = tau.copy()
    if t > 1:
        sigma_perp[1:] = sigma[1:] * (1.0 - sigma[1:] / sigma[:-1])
        tau_perp[1:] = tau[1:] * (1.0 - tau[1:] / tau[:-1])

    return SeTrajectory(
        psi=psi,
        phi=phi,
        sigma=sigma,
        tau=tau,
        nu=nu,
        sigma_perp=sigma_perp,
        tau_perp=tau_perp,
        threshold=threshold,
        reached_threshold=reached,
    )


def asymptotic_se(
    W: BaseMatrix, R: float, sigma2: float, t_max: int | None = None
) -> np.ndarray:
    """Large-M state evolution: psi is 0/1 per block.

    psi_c flips to 0 once (1/(R * R_blocks)) sum_r W_rc/phi_r exceeds 2.
    Returns the psi trajectory, shape (T+1, C); iteration stops when psi
    stops changing or everything is decoded.
    """
    Wm = W.entries
    if t_max is None:
        t_max = 2 * W.cols + 10
    psi = np.ones(W.cols)
    hist = [psi.copy()]
    for _ in range(t_max):
        phi = sigma2 + Wm @ psi / W.cols
        stat = (Wm / phi[:, np.newaxis]).sum(axis=0) / (R * W.rows)
        psi_next = np.where(stat > 2.0, 0.0, 1.0)
        hist.append(psi_next)
        if np.array_equal(psi_next, psi):
            break
        psi = psi_next
        if not psi.any():
            break
    return np.array(hist)


@dataclass(frozen=True)
class ProgressionReport:
    """Analytic decoding-progression quantities for an (omega, Lambda) code.

    Delta is the gap between the coupled capacity expression and the rate;
    g is the predicted decoding-wave speed in column blocks per iteration,
    valid when omega exceeds omega_min. f_M_delta is the NMSE floor used to
    declare a block decoded.
    """

    vartheta: float
    Delta: float
    rho_star: float
    g: float
    omega_min: float
    T_bound: int | None
    delta_star: float
    f_M_delta: float
    feasible: bool


def progression_report(
    R: float, snr: float, omega: int, Lambda: int, M: int, k: float = 1.0
) -> ProgressionReport:
    """Evaluate the decoding-progression formulas (rate R in nats).

    The constant k in the NMSE floor is not pinned down by theory; it is a
    configuration knob with default 1.
    """
    if snr <= 0:
        raise ValueError("snr must be positive")
    coupling = CouplingParams(omega=omega, Lambda=Lambda)
    vartheta = coupling.vartheta
    Delta = 0.5 / vartheta * math.log1p(vartheta * snr) - R
    rho_star = min(Delta / (3.0 * snr), 0.5) if Delta > 0 else 0.0
    g = (1.0 + vartheta * snr) * Delta / (vartheta * snr**2) * omega
    omega_min = (vartheta * snr**2 / (1.0 + vartheta * snr)) / Delta if Delta > 0 else math.inf
    feasible = Delta > 0 and omega > omega_min
    T_bound = math.ceil(Lambda / (2.0 * g)) if g > 0 else None
    delta_star = min(Delta / (3.0 * R), 1.0 / 3.0) if Delta > 0 else 1.0 / 3.0
    f_M_delta = M ** (-k * delta_star**2) / (delta_star * math.sqrt(math.log(M)))
    return ProgressionReport(
        vartheta=vartheta,
        Delta=Delta,
        rho_star=rho_star,
        g=g,
        omega_min=omega_min,
        T_bound=T_bound,
        delta_star=delta_star,
        f_M_delta=f_M_delta,
        feasible=feasible,
    )


def psi_step_bounds(
    nu: float,
    M: int,
    delta: float,
    delta_tilde: float,
    k: float = 1.0,
    k1: float = 1.0,
) -> tuple[float, float]:
    """Diagnostic bounds on the next psi given nu = 1/(tau ln M).

    lower = (1 - M^{-k1 dt^2}) * 1{nu < 2 - dt}
    upper = 1 - (1 - M^{-k d^2}/(d sqrt(ln M))) * 1{nu > 2 + d}

    The constants k, k1 are configuration, not theory-pinned values. Both
    bounds are vacuous (0, 1) when nu falls between the two thresholds.
    """
    if not 0.0 < delta < 0.5:
        raise ValueError("delta must lie in (0, 1/2)")
    if not 0.0 < delta_tilde < 1.0:
        raise ValueError("delta_tilde must lie in (0, 1)")
    lower = (1.0 - M ** (-k1 * delta_tilde**2)) if nu < 2.0 - delta_tilde else 0.0
    if nu > 2.0 + delta:
        floor = M ** (-k * delta**2) / (delta * math.sqrt(math.log(M)))
        upper = 1.0 - (1.0 - floor)
    else:
        upper = 1.0
    return lower, upper
