"""Model-free diffusion math.

Variance schedules, closed-form forward noising, DDPM/DDIM reverse steps and
classifier-free guidance. Everything here is a pure function of its inputs;
no model, device or global state is involved. Timesteps are 1-based
(t = 1 .. T) and the cumulative product at t = 0 is defined as 1 so the
reverse recursions have an algebraic base case.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch


@dataclass(frozen=True)
class NoiseSchedule:
    """Per-step variances and the arrays derived from them.

    ``betas[i]`` is the variance added at timestep ``t = i + 1``. ``sigmas``
    holds the posterior standard deviation used by the stochastic reverse
    step; ``sigmas[0]`` (t = 1) is always zero.
    """

    betas: torch.Tensor
    alphas: torch.Tensor
    alpha_bars: torch.Tensor
    sigmas: torch.Tensor

    @property
    def T(self) -> int:
        return int(self.betas.shape[0])

    def alpha_bar(self, t: int) -> float:
        """Cumulative alpha product at timestep t, with alpha_bar(0) == 1."""
        if t == 0:
            return 1.0
        self._check_t(t)
        return float(self.alpha_bars[t - 1])

    def beta(self, t: int) -> float:
        self._check_t(t)
        return float(self.betas[t - 1])

    def alpha(self, t: int) -> float:
        self._check_t(t)
        return float(self.alphas[t - 1])

    def sigma(self, t: int) -> float:
        self._check_t(t)
        return float(self.sigmas[t - 1])

    def _check_t(self, t: int) -> None:
        if not 1 <= t <= self.T:
            raise ValueError(f"timestep {t} outside [1, {self.T}]")


@dataclass(frozen=True)
class NoisedSample:
    """A forward-noised tensor together with the exact Gaussian draw used."""

    x_t: torch.Tensor
    t: int
    eps: torch.Tensor


def make_schedule(
    T: int,
    beta_min: float = 1e-4,
    beta_max: float = 0.02,
    kind: str = "linear",
) -> NoiseSchedule:
    """Build a variance schedule of length T.

    Only the linear schedule is supported: betas interpolate from beta_min
    to beta_max. Derived arrays: alphas = 1 - betas, alpha_bars = cumprod,
    sigmas[t]^2 = (1 - alpha_bar(t-1)) / (1 - alpha_bar(t)) * beta_t.
    """
    if kind != "linear":
        raise ValueError(f"unknown schedule kind {kind!r}")
    if T < 1:
        raise ValueError("T must be >= 1")
    if not (0.0 < beta_min <= beta_max < 1.0):
        raise ValueError("need 0 < beta_min <= beta_max < 1")

    betas = torch.linspace(beta_min, beta_max, T, dtype=torch.float64)
    alphas = 1.0 - betas
    alpha_bars = torch.cumprod(alphas, dim=0)
    prev_bars = torch.cat([torch.ones(1, dtype=torch.float64), alpha_bars[:-1]])
    sigmas = torch.sqrt((1.0 - prev_bars) / (1.0 - alpha_bars) * betas)
    return NoiseSchedule(betas=betas, alphas=alphas, alpha_bars=alpha_bars, sigmas=sigmas)


def _check_shapes(a: torch.Tensor, b: torch.Tensor, what: str) -> None:
    if a.shape != b.shape:
        raise ValueError(f"{what}: shape mismatch {tuple(a.shape)} vs {tuple(b.shape)}")


def forward_noise(
    x0: torch.Tensor, t: int, eps: torch.Tensor, schedule: NoiseSchedule
) -> NoisedSample:
    """Closed-form forward process: x_t = sqrt(a_bar_t) x0 + sqrt(1 - a_bar_t) eps."""
    _check_shapes(x0, eps, "forward_noise")
    schedule._check_t(t)
    a_bar = schedule.alpha_bar(t)
    x_t = (a_bar**0.5) * x0 + ((1.0 - a_bar) ** 0.5) * eps
    return NoisedSample(x_t=x_t, t=t, eps=eps)


def ddpm_step(
    x_t: torch.Tensor,
    t: int,
    eps_pred: torch.Tensor,
    schedule: NoiseSchedule,
    z: torch.Tensor,
) -> torch.Tensor:
    """One stochastic reverse step.

    x_{t-1} = (x_t - beta_t / sqrt(1 - a_bar_t) * eps_pred) / sqrt(alpha_t)
              + sigma_t * z

    The caller supplies z; pass zeros at t = 1 for a deterministic last step.
    """
    _check_shapes(x_t, eps_pred, "ddpm_step")
    _check_shapes(x_t, z, "ddpm_step z")
    schedule._check_t(t)
    a = schedule.alpha(t)
    a_bar = schedule.alpha_bar(t)
    beta = schedule.beta(t)
    mean = (x_t - beta / ((1.0 - a_bar) ** 0.5) * eps_pred) / (a**0.5)
    return mean + schedule.sigma(t) * z


def ddim_step(
    x_t: torch.Tensor,
    t: int,
    t_prev: int,
    eps_pred: torch.Tensor,
    schedule: NoiseSchedule,
) -> tuple[torch.Tensor, torch.Tensor]:
    """One deterministic (ODE-form) reverse step, allowing timestep skips.

    Returns (x_prev, x0_hat) where x0_hat inverts the forward map given the
    predicted noise and x_prev re-noises x0_hat to level t_prev. t_prev = 0
    returns x0_hat itself.
    """
    _check_shapes(x_t, eps_pred, "ddim_step")
    schedule._check_t(t)
    if not 0 <= t_prev < t:
        raise ValueError(f"need 0 <= t_prev < t, got t_prev={t_prev}, t={t}")
    a_bar = schedule.alpha_bar(t)
    a_bar_prev = schedule.alpha_bar(t_prev)
    x0_hat = (x_t - ((1.0 - a_bar) ** 0.5) * eps_pred) / (a_bar**0.5)
    x_prev = (a_bar_prev**0.5) * x0_hat + ((1.0 - a_bar_prev) ** 0.5) * eps_pred
    return x_prev, x0_hat


def cfg_predict(
    eps_cond: torch.Tensor, eps_uncond: torch.Tensor, s: float
) -> torch.Tensor:
    """Classifier-free guidance: (1 + s) * eps_cond - s * eps_uncond."""
    _check_shapes(eps_cond, eps_uncond, "cfg_predict")
    if s < 0:
        raise ValueError("guidance scale must be >= 0")
    return (1.0 + s) * eps_cond - s * eps_uncond
