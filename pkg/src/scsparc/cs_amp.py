"""AMP for compressed sensing with spatially coupled measurement matrices.

The measurement matrix has independent Gaussian blocks with variances given
by a base matrix whose columns sum to one; the signal prior is a generic
Gaussian mixture (Bernoulli-Gauss as the main case). State evolution tracks
the per-column-block mean squared error, with the scalar expectations
computed by Gauss-Hermite quadrature, and predicts the per-iteration MSE of
the matching AMP recursion.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .params import CouplingParams, build_base_matrix

__all__ = [
    "MixturePrior",
    "bernoulli_gauss_prior",
    "BgBayesDenoiser",
    "SoftThresholdDenoiser",
    "CsModel",
    "build_cs_base_matrix",
    "cs_design_matrix",
    "cs_mse_expectation",
    "cs_se_step",
    "run_cs_se",
    "cs_amp_decode",
    "CsSeTrajectory",
    "CsDecodeResult",
]

GH_NODES = 64


@dataclass(frozen=True)
class MixturePrior:
    """Gaussian mixture prior; an atom is a component with zero variance."""

    weights: tuple
    means: tuple
    variances: tuple

    def __post_init__(self):
        assert len(self.weights) == len(self.means) == len(self.variances)
        assert math.isclose(sum(self.weights), 1.0, rel_tol=1e-12)
        assert all(w >= 0 for w in self.weights)
        assert all(v >= 0 for v in self.variances)

    @property
    def second_moment(self) -> float:
        return sum(
            w * (m * m + v)
            for w, m, v in zip(self.weights, self.means, self.variances)
        )

    def sample(self, size: int, rng: np.random.Generator) -> np.ndarray:
        comp = rng.choice(len(self.weights), size=size, p=self.weights)
        means = np.asarray(self.means)[comp]
        stds = np.sqrt(np.asarray(self.variances))[comp]
        return means + stds * rng.standard_normal(size)


def bernoulli_gauss_prior(eps: float, v: float) -> MixturePrior:
    """Zero with probability 1-eps, N(0, v) with probability eps."""
    if not 0.0 < eps <= 1.0:
        raise ValueError(f"eps must be in (0, 1], got {eps}")
    if v <= 0:
        raise ValueError(f"v must be positive, got {v}")
    if eps == 1.0:
        return MixturePrior((1.0,), (0.0,), (v,))
    return MixturePrior((1.0 - eps, eps), (0.0, 0.0), (0.0, v))


class BgBayesDenoiser:
    """Posterior mean under a Bernoulli-Gauss prior in Gaussian noise.

    For s = beta + N(0, tau) with beta ~ BG(eps, v), the posterior mean is
    pi * kappa * s with kappa = v/(v+tau) and pi the posterior probability
    that beta is nonzero. With eps = 1 this is the Wiener filter kappa*s.
    """

    def __init__(self, eps: float, v: float):
        self.prior = bernoulli_gauss_prior(eps, v)
        self.eps = eps
        self.v = v

    def __call__(self, s: np.ndarray, tau: float) -> tuple[np.ndarray, np.ndarray]:
        s = np.asarray(s, dtype=float)
        v, eps = self.v, self.eps
        kappa = v / (v + tau)
        if eps == 1.0:
            return kappa * s, np.full_like(s, kappa)
        # exponent clipped from below only through the stable 1/(1+e^x) form
        log_ratio = (
            math.log((1.0 - eps) / eps)
            + 0.5 * math.log((v + tau) / tau)
            - s * s * v / (2.0 * tau * (v + tau))
        )
        pi = 1.0 / (1.0 + np.exp(np.clip(log_ratio, -700, 700)))
        f = pi * kappa * s
        fprime = kappa * pi + kappa * s * s * pi * (1.0 - pi) * v / (tau * (v + tau))
        return f, fprime


class SoftThresholdDenoiser:
    """Soft thresholding at alpha * sqrt(tau); the classic minimax choice
    for sparse signals when the prior is unknown."""

    def __init__(self, alpha: float):
        if alpha <= 0:
            raise ValueError(f"alpha must be positive, got {alpha}")
        self.alpha = alpha
        self.prior = None

    def __call__(self, s: np.ndarray, tau: float) -> tuple[np.ndarray, np.ndarray]:
        s = np.asarray(s, dtype=float)
        thresh = self.alpha * math.sqrt(tau)
        f = np.sign(s) * np.maximum(np.abs(s) - thresh, 0.0)
        return f, (np.abs(s) > thresh).astype(float)


@dataclass(frozen=True)
class CsModel:
    """Compressed-sensing problem: n noisy Gaussian measurements of a
    length-p signal, with blockwise measurement variances W_rc * R / n."""

    W: np.ndarray
    p: int
    n: int
    sigma2: float
    prior: MixturePrior

    def __post_init__(self):
        W = np.ascontiguousarray(np.asarray(self.W, dtype=float))
        assert W.ndim == 2 and np.all(W >= 0)
        W.setflags(write=False)
        object.__setattr__(self, "W", W)
        if self.p % self.cols != 0:
            raise ValueError("number of column blocks must divide p")
        if self.n % self.rows != 0:
            raise ValueError("number of row blocks must divide n")
        if self.sigma2 < 0:
            raise ValueError("sigma2 must be nonnegative")

    @property
    def rows(self) -> int:
        return self.W.shape[0]

    @property
    def cols(self) -> int:
        return self.W.shape[1]

    @property
    def delta(self) -> float:
        return self.n / self.p

    @property
    def rows_per_block(self) -> int:
        return self.n // self.rows

    @property
    def cols_per_block(self) -> int:
        return self.p // self.cols


def build_cs_base_matrix(coupling: CouplingParams) -> np.ndarray:
    """Coupled base matrix with unit column sums (each column averages
    1/rows), obtained by rescaling the unit-power band construction."""
    base = build_base_matrix(coupling, 1.0)
    return base.entries / base.rows


def cs_design_matrix(model: CsModel, seed) -> np.ndarray:
    """Dense measurement matrix with independent N(0, W_rc/(n/rows))
    entries in block (r, c). Columns have unit expected norm when the base
    matrix columns sum to one."""
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((model.n, model.p))
    mr, mc = model.rows_per_block, model.cols_per_block
    scale = np.sqrt(model.W / mr)
    A *= np.repeat(np.repeat(scale, mr, axis=0), mc, axis=1)
    return A


def cs_mse_expectation(denoiser, prior: MixturePrior, tau: float) -> float:
    """E[(f(beta + sqrt(tau) G) - beta)^2] for beta ~ prior, G ~ N(0,1),
    by tensor-product Gauss-Hermite quadrature (exact atoms handled in 1D).
    """
    assert tau > 0
    nodes, wts = np.polynomial.hermite.hermgauss(GH_NODES)
    g = math.sqrt(2.0) * nodes
    wn = wts / math.sqrt(math.pi)
    total = 0.0
    for w, m, v in zip(prior.weights, prior.means, prior.variances):
        if v == 0.0:
            beta = np.array([m])
            wb = np.array([1.0])
        else:
            beta = m + math.sqrt(v) * g
            wb = wn
        s = beta[:, np.newaxis] + math.sqrt(tau) * g[np.newaxis, :]
        f, _ = denoiser(s, tau)
        err = (f - beta[:, np.newaxis]) ** 2
        total += w * float(wb @ err @ wn)
    return total


def cs_se_step(
    psi: np.ndarray, model: CsModel, denoiser
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """One state-evolution step: effective noise phi_r per row block,
    observation variance tau_c per column block, and the next per-block
    MSE psi."""
    W = model.W
    phi = model.sigma2 + (model.cols_per_block / model.rows_per_block) * (W @ psi)
    tau = 1.0 / ((W / phi[:, np.newaxis]).sum(axis=0))
    prior = denoiser.prior
    if prior is None:
        prior = model.prior
    psi_next = np.array([cs_mse_expectation(denoiser, prior, t) for t in tau])
    return phi, tau, psi_next


@dataclass
class CsSeTrajectory:
    psi: np.ndarray  # (T+1, C), per-coordinate MSE per column block
    phi: np.ndarray  # (T, R)
    tau: np.ndarray  # (T, C)

    @property
    def mse_pred(self) -> np.ndarray:
        """Predicted MSE per signal coordinate at each iteration."""
        return self.psi.mean(axis=1)


def run_cs_se(model: CsModel, denoiser, t_max: int = 50) -> CsSeTrajectory:
    """Iterate state evolution from psi = E[beta^2] for t_max steps."""
    psi = np.full(model.cols, model.prior.second_moment)
    psis, phis, taus = [psi], [], []
    for _ in range(t_max):
        phi, tau, psi = cs_se_step(psi, model, denoiser)
        phis.append(phi)
        taus.append(tau)
        psis.append(psi)
    return CsSeTrajectory(np.array(psis), np.array(phis), np.array(taus))


@dataclass
class CsDecodeResult:
    x_hat: np.ndarray
    iterations: int
    mse_trace: np.ndarray | None  # empirical per-coordinate MSE, if truth given
    phi_trace: np.ndarray
    tau_trace: np.ndarray


def cs_amp_decode(
    A: np.ndarray,
    y: np.ndarray,
    model: CsModel,
    denoiser,
    t_max: int = 50,
    x_true: np.ndarray | None = None,
) -> CsDecodeResult:
    """AMP with blockwise coefficients estimated online from the residual.

    z^t = y - A x^t + upsilon ⊙ z^{t-1}; the per-row-block Onsager term is
    the trace of the denoiser Jacobian weighted by the previous block
    coefficients. The effective observation is s = x^t + (Q ⊙ A)^T z^t with
    Q_rc = tau_c / phi_r, and x^{t+1} = f(s) per column block.
    """
    mr, mc = model.rows_per_block, model.cols_per_block
    W = model.W
    x = np.zeros(model.p)
    z = y.copy()
    prev = None  # (phi, tau, block-mean of f')
    mse_rows = []
    phis, taus = [], []

    for t in range(t_max):
        if prev is not None:
            phi_prev, tau_prev, fmean_prev = prev
            upsilon = (mc / mr) * (W @ (tau_prev * fmean_prev)) / phi_prev
            z = y - A @ x + np.repeat(upsilon, mr) * z
        phi = (z * z).reshape(model.rows, mr).mean(axis=1)
        tau = 1.0 / ((W / phi[:, np.newaxis]).sum(axis=0))
        # Q = outer(1/phi, tau) is rank one, so (Q ⊙ A)^T z factorizes
        s = x + np.repeat(tau, mc) * (A.T @ (z / np.repeat(phi, mr)))
        x_new = np.empty_like(x)
        fmean = np.empty(model.cols)
        for c in range(model.cols):
            sl = slice(c * mc, (c + 1) * mc)
            f, fp = denoiser(s[sl], tau[c])
            x_new[sl] = f
            fmean[c] = fp.mean()
        x = x_new
        prev = (phi, tau, fmean)
        phis.append(phi)
        taus.append(tau)
        if x_true is not None:
            mse_rows.append(float(np.mean((x - x_true) ** 2)))

    return CsDecodeResult(
        x_hat=x,
        iterations=t_max,
        mse_trace=np.array(mse_rows) if x_true is not None else None,
        phi_trace=np.array(phis),
        tau_trace=np.array(taus),
    )
