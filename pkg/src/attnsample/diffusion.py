"""Variance-preserving forward process, deterministic DDIM stepping,
re-noising between sampled steps, and the closed-form Gaussian-mixture
epsilon oracle.

The noise table uses the scaled-linear beta schedule
``beta_t = (sqrt(b1) + (t-1)/(T-1) * (sqrt(bT) - sqrt(b1)))**2`` with
b1 = 0.00085, bT = 0.012 and T = 1000. ``alpha_bar[0]`` is defined as 1 so
that stepping to t_prev = 0 lands exactly on the clean-sample prediction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .errors import ScheduleError

DEFAULT_T = 1000
DEFAULT_BETA_START = 0.00085
DEFAULT_BETA_END = 0.012


@dataclass(frozen=True)
class NoiseSchedule:
    """Beta / alpha-bar tables for the T-step forward process.

    ``beta[t-1]`` is the variance increment at step t (1-based);
    ``alpha_bar[t]`` is the cumulative signal retention, with
    ``alpha_bar[0] == 1``.
    """

    T: int
    beta: np.ndarray
    alpha_bar: np.ndarray = field(init=False)

    def __post_init__(self):
        beta = np.asarray(self.beta, dtype=np.float64)
        if beta.shape != (self.T,):
            raise ScheduleError(f"beta must have length T={self.T}")
        if np.any(beta <= 0) or np.any(beta >= 1):
            raise ScheduleError("beta values must lie in (0, 1)")
        if np.any(np.diff(beta) < 0):
            raise ScheduleError("beta must be non-decreasing")
        alpha_bar = np.empty(self.T + 1, dtype=np.float64)
        alpha_bar[0] = 1.0
        alpha_bar[1:] = np.cumprod(1.0 - beta)
        if alpha_bar[self.T] <= 0:
            raise ScheduleError("alpha_bar underflowed to zero")
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "alpha_bar", alpha_bar)

    @classmethod
    def scaled_linear(
        cls,
        T: int = DEFAULT_T,
        beta_start: float = DEFAULT_BETA_START,
        beta_end: float = DEFAULT_BETA_END,
    ) -> "NoiseSchedule":
        i = np.arange(T, dtype=np.float64)
        root = np.sqrt(beta_start) + i / (T - 1) * (
            np.sqrt(beta_end) - np.sqrt(beta_start)
        )
        return cls(T=T, beta=root**2)

    def _check_t(self, t: int) -> None:
        if not 1 <= t <= self.T:
            raise ScheduleError(f"timestep {t} outside [1, {self.T}]")


def q_sample(
    schedule: NoiseSchedule, x0: np.ndarray, t: int, noise: np.ndarray
) -> np.ndarray:
    """Forward marginal z_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) noise."""
    schedule._check_t(t)
    x0 = np.asarray(x0, dtype=np.float32)
    noise = np.asarray(noise, dtype=np.float32)
    if noise.shape != x0.shape:
        raise ScheduleError(f"noise shape {noise.shape} != x0 shape {x0.shape}")
    ab = schedule.alpha_bar[t]
    return (
        np.float32(np.sqrt(ab)) * x0 + np.float32(np.sqrt(1.0 - ab)) * noise
    )


def ddim_step(
    schedule: NoiseSchedule,
    z_t: np.ndarray,
    eps_hat: np.ndarray,
    t: int,
    t_prev: int,
) -> np.ndarray:
    """Deterministic (eta = 0) update from z_t to z_{t_prev}.

    Predicts x0 from the epsilon estimate, then re-applies the forward
    marginal coefficients of t_prev with the same epsilon.
    """
    schedule._check_t(t)
    if not 0 <= t_prev < t:
        raise ScheduleError(f"need 0 <= t_prev < t, got t_prev={t_prev}, t={t}")
    z_t = np.asarray(z_t, dtype=np.float32)
    eps_hat = np.asarray(eps_hat, dtype=np.float32)
    ab_t = schedule.alpha_bar[t]
    ab_p = schedule.alpha_bar[t_prev]
    x0_hat = (z_t - np.float32(np.sqrt(1.0 - ab_t)) * eps_hat) / np.float32(
        np.sqrt(ab_t)
    )
    return (
        np.float32(np.sqrt(ab_p)) * x0_hat
        + np.float32(np.sqrt(1.0 - ab_p)) * eps_hat
    )


def renoise(
    schedule: NoiseSchedule,
    z_tprev: np.ndarray,
    t_prev: int,
    t: int,
    noise: np.ndarray,
) -> np.ndarray:
    """Forward conditional between two sampled steps (one jump, h >= 1 raw
    timesteps): z_t = sqrt(r) z_{t_prev} + sqrt(1 - r) noise with
    r = abar_t / abar_{t_prev}.
    """
    schedule._check_t(t)
    if not 0 <= t_prev < t:
        raise ScheduleError(f"need t_prev < t, got t_prev={t_prev}, t={t}")
    z_tprev = np.asarray(z_tprev, dtype=np.float32)
    noise = np.asarray(noise, dtype=np.float32)
    if noise.shape != z_tprev.shape:
        raise ScheduleError("noise shape mismatch")
    ratio = schedule.alpha_bar[t] / schedule.alpha_bar[t_prev]
    return (
        np.float32(np.sqrt(ratio)) * z_tprev
        + np.float32(np.sqrt(1.0 - ratio)) * noise
    )


@dataclass(frozen=True)
class GMMPrior:
    """Diagonal Gaussian mixture over clean samples.

    weights: (K,), positive, summing to 1; means: (K, D); variances: (K, D),
    strictly positive.
    """

    weights: np.ndarray
    means: np.ndarray
    variances: np.ndarray

    def __post_init__(self):
        w = np.atleast_1d(np.asarray(self.weights, dtype=np.float64))
        m = np.atleast_2d(np.asarray(self.means, dtype=np.float64))
        v = np.atleast_2d(np.asarray(self.variances, dtype=np.float64))
        if np.any(w <= 0) or abs(w.sum() - 1.0) > 1e-9:
            raise ValueError("weights must be positive and sum to 1")
        if m.shape != v.shape or m.shape[0] != w.shape[0]:
            raise ValueError("means/variances must be (K, D) matching weights")
        if np.any(v <= 0):
            raise ValueError("variances must be strictly positive")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "means", m)
        object.__setattr__(self, "variances", v)

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        comps = rng.choice(len(self.weights), size=n, p=self.weights)
        eps = rng.standard_normal((n, self.dim))
        return self.means[comps] + np.sqrt(self.variances[comps]) * eps


def gmm_eps(
    schedule: NoiseSchedule, z_t: np.ndarray, t: int, prior: GMMPrior
) -> np.ndarray:
    """Exact epsilon prediction for a GMM prior under the VP marginal.

    Component responsibilities come from N(z_t; sqrt(abar) mu_i,
    abar sigma_i^2 + (1 - abar) I); the posterior mean over x0 then gives
    eps_hat = (z_t - sqrt(abar) E[x0 | z_t]) / sqrt(1 - abar).

    Accepts z_t of shape (..., D) and is vectorized over leading axes.
    """
    schedule._check_t(t)
    z = np.asarray(z_t, dtype=np.float64)
    squeeze = False
    if z.ndim == 1:
        z = z[None, :]
        squeeze = True
    if z.shape[-1] != prior.dim:
        raise ValueError(f"z_t last axis {z.shape[-1]} != prior dim {prior.dim}")
    ab = schedule.alpha_bar[t]
    sab = np.sqrt(ab)
    marg_var = ab * prior.variances + (1.0 - ab)  # (K, D)
    diff = z[..., None, :] - sab * prior.means  # (..., K, D)
    log_lik = -0.5 * np.sum(
        diff**2 / marg_var + np.log(2.0 * np.pi * marg_var), axis=-1
    )
    log_post = np.log(prior.weights) + log_lik
    log_post -= logsumexp(log_post, axis=-1, keepdims=True)
    resp = np.exp(log_post)  # (..., K)
    # Per-component posterior mean of x0 given z_t (conjugate Gaussian).
    gain = sab * prior.variances / marg_var  # (K, D)
    comp_mean = prior.means + gain * diff  # (..., K, D)
    e_x0 = np.sum(resp[..., :, None] * comp_mean, axis=-2)  # (..., D)
    eps = (z - sab * e_x0) / np.sqrt(1.0 - ab)
    if squeeze:
        eps = eps[0]
    return eps.astype(np.float32)


def gmm_log_marginal(
    schedule: NoiseSchedule, z_t: np.ndarray, t: int, prior: GMMPrior
) -> np.ndarray:
    """log p_t(z_t) under the VP marginal of the mixture (float64)."""
    schedule._check_t(t)
    z = np.asarray(z_t, dtype=np.float64)
    squeeze = False
    if z.ndim == 1:
        z = z[None, :]
        squeeze = True
    ab = schedule.alpha_bar[t]
    marg_var = ab * prior.variances + (1.0 - ab)
    diff = z[..., None, :] - np.sqrt(ab) * prior.means
    log_lik = -0.5 * np.sum(
        diff**2 / marg_var + np.log(2.0 * np.pi * marg_var), axis=-1
    )
    out = logsumexp(np.log(prior.weights) + log_lik, axis=-1)
    return out[0] if squeeze else out
