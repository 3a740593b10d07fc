"""Denoising-diffusion machinery for dual motion.

The denoiser is trained to predict the clean motion (x0 parameterization);
guidance combines the conditioned and unconditioned predictions as
``s * cond + (1 - s) * uncond``, and ancestral sampling uses the standard
posterior derived from the predicted x0. A strided step subset can replace
the full schedule for fast sampling.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import torch

from .errors import ContractError, NumericError


@dataclass(frozen=True)
class DiffusionSchedule:
    betas: torch.Tensor  # (T,)
    alpha_bars: torch.Tensor  # (T,) cumulative products of 1 - beta

    @property
    def timesteps(self) -> int:
        return self.betas.shape[0]


@dataclass(frozen=True)
class GuidanceConfig:
    scale: float
    null_condition: object | None = None  # the encoded empty-text bundle

    def __post_init__(self):
        if self.scale < 0:
            raise ValueError(f"guidance scale must be >= 0, got {self.scale}")


@dataclass(frozen=True)
class LossWeights:
    lambda_distance: float = 0.5

    def __post_init__(self):
        if self.lambda_distance < 0:
            raise ValueError(f"lambda_distance must be >= 0, got {self.lambda_distance}")


def make_schedule(
    timesteps: int, beta_start: float = 1e-4, beta_end: float = 0.02
) -> DiffusionSchedule:
    """Linear beta schedule and its cumulative alpha products."""
    if timesteps < 1:
        raise ValueError(f"timesteps must be >= 1, got {timesteps}")
    if not (0.0 < beta_start <= beta_end < 1.0):
        raise ValueError(
            f"need 0 < beta_start <= beta_end < 1, got ({beta_start}, {beta_end})"
        )
    betas = torch.linspace(beta_start, beta_end, timesteps, dtype=torch.float64)
    alpha_bars = torch.cumprod(1.0 - betas, dim=0)
    return DiffusionSchedule(betas=betas, alpha_bars=alpha_bars)


def _gather(values: torch.Tensor, t: torch.Tensor | int, like: torch.Tensor) -> torch.Tensor:
    """Pick per-sample schedule entries and shape them for broadcasting."""
    t = torch.as_tensor(t)
    out = values.to(like.dtype)[t]
    if t.ndim == 0:
        return out
    return out.view(-1, *([1] * (like.ndim - 1)))


def q_sample(
    x0: torch.Tensor,
    t: torch.Tensor | int,
    noise: torch.Tensor,
    schedule: DiffusionSchedule,
) -> torch.Tensor:
    """Forward-noise x0 to step t: sqrt(a_bar)*x0 + sqrt(1-a_bar)*noise."""
    t_arr = torch.as_tensor(t)
    if torch.any(t_arr < 0) or torch.any(t_arr >= schedule.timesteps):
        raise ValueError(f"t out of range [0, {schedule.timesteps})")
    if noise.shape != x0.shape:
        raise ValueError(f"noise shape {noise.shape} != x0 shape {x0.shape}")
    ab = _gather(schedule.alpha_bars, t, x0)
    return torch.sqrt(ab) * x0 + torch.sqrt(1.0 - ab) * noise


def reconstruction_loss(pred_x0: torch.Tensor, x0: torch.Tensor) -> torch.Tensor:
    """Mean squared error over all persons, frames and channels."""
    if pred_x0.shape != x0.shape:
        raise ValueError(f"shape mismatch: {pred_x0.shape} vs {x0.shape}")
    return torch.mean((pred_x0 - x0) ** 2)


def guided_output(
    cond_out: torch.Tensor, uncond_out: torch.Tensor, scale: float
) -> torch.Tensor:
    """Classifier-free combination: scale*cond + (1-scale)*uncond."""
    if cond_out.shape != uncond_out.shape:
        raise ValueError(f"shape mismatch: {cond_out.shape} vs {uncond_out.shape}")
    return scale * cond_out + (1.0 - scale) * uncond_out


def total_loss(
    recon: torch.Tensor | float,
    distance_ce: torch.Tensor | float,
    weights: LossWeights,
) -> torch.Tensor:
    recon = torch.as_tensor(recon)
    distance_ce = torch.as_tensor(distance_ce)
    if not (torch.isfinite(recon) and torch.isfinite(distance_ce)):
        raise NumericError("loss terms must be finite")
    return recon + weights.lambda_distance * distance_ce


def respaced_steps(timesteps: int, num_steps: int) -> list[int]:
    """Uniformly strided ascending subset of [0, T) ending at T-1."""
    if not (1 <= num_steps <= timesteps):
        raise ValueError(f"num_steps must be in [1, {timesteps}], got {num_steps}")
    if num_steps == 1:
        return [timesteps - 1]
    picks = torch.linspace(0, timesteps - 1, num_steps).round().to(torch.long)
    return sorted(set(int(p) for p in picks))


DenoiserFn = Callable[[torch.Tensor, torch.Tensor, torch.Tensor], tuple[torch.Tensor, torch.Tensor]]


def sample(
    denoiser: DenoiserFn,
    shape: tuple[int, int, int],
    schedule: DiffusionSchedule,
    guidance_scale: float = 1.0,
    uncond_denoiser: DenoiserFn | None = None,
    seed: int | None = None,
    generator: torch.Generator | None = None,
    num_steps: int | None = None,
    dtype: torch.dtype = torch.float32,
) -> tuple[torch.Tensor, torch.Tensor]:
    """Ancestral sampling of both persons' feature sequences.

    ``denoiser(x1, x2, t)`` predicts the clean features for both persons at
    (batched) step t. When ``uncond_denoiser`` is given, predictions are
    combined with ``guided_output`` before the posterior update. Returns
    two (B, S, D) tensors; fully deterministic per seed/generator.
    """
    if generator is None:
        generator = torch.Generator()
        generator.manual_seed(0 if seed is None else seed)
    batch, frames, width = shape
    steps = (
        list(range(schedule.timesteps))
        if num_steps is None
        else respaced_steps(schedule.timesteps, num_steps)
    )
    alpha_bars = schedule.alpha_bars.to(dtype)

    x1 = torch.randn(shape, generator=generator, dtype=dtype)
    x2 = torch.randn(shape, generator=generator, dtype=dtype)
    for i in reversed(range(len(steps))):
        t = steps[i]
        ab_t = alpha_bars[t]
        ab_prev = alpha_bars[steps[i - 1]] if i > 0 else torch.ones((), dtype=dtype)
        beta_eff = 1.0 - ab_t / ab_prev
        t_batch = torch.full((batch,), t, dtype=torch.long)

        pred1, pred2 = denoiser(x1, x2, t_batch)
        if uncond_denoiser is not None:
            null1, null2 = uncond_denoiser(x1, x2, t_batch)
            pred1 = guided_output(pred1, null1, guidance_scale)
            pred2 = guided_output(pred2, null2, guidance_scale)
        for pred in (pred1, pred2):
            if pred.shape != (batch, frames, width):
                raise ContractError(
                    f"denoiser returned shape {tuple(pred.shape)}, expected {shape}"
                )

        # posterior q(x_prev | x_t, x0) for the respaced chain
        coef_x0 = torch.sqrt(ab_prev) * beta_eff / (1.0 - ab_t)
        coef_xt = torch.sqrt(1.0 - beta_eff) * (1.0 - ab_prev) / (1.0 - ab_t)
        var = beta_eff * (1.0 - ab_prev) / (1.0 - ab_t)
        x1 = coef_x0 * pred1 + coef_xt * x1
        x2 = coef_x0 * pred2 + coef_xt * x2
        if i > 0:
            std = torch.sqrt(var)
            x1 = x1 + std * torch.randn(shape, generator=generator, dtype=dtype)
            x2 = x2 + std * torch.randn(shape, generator=generator, dtype=dtype)
    return x1, x2
