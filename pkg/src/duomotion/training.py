"""Training loop: Adam with cosine step-size decay, condition dropout,
reconstruction + distance losses, deterministic per seed on one worker.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from .config import RunConfig
from .denoiser import ConditionBatch, DualMotionModel, ThreeStageDenoiser
from .diffusion import (
    DiffusionSchedule,
    LossWeights,
    make_schedule,
    q_sample,
    reconstruction_loss,
    total_loss,
)
from .encoding import TextFeatureEncoder
from .errors import NumericError
from .interaction import distance_cross_entropy, gt_distance_profile
from .motion import DualMotion, feature_dim, segment_bounds
from .text import PromptRecord, decompose_prompt

CHECKPOINT_NAME = "checkpoint.dmck"


def cosine_lr(step: int, total_steps: int, lr_start: float, lr_end: float) -> float:
    """Cosine decay from lr_start (step 0) to lr_end (final step)."""
    if total_steps <= 1:
        return lr_start
    progress = min(max(step / (total_steps - 1), 0.0), 1.0)
    return lr_end + 0.5 * (lr_start - lr_end) * (1.0 + float(np.cos(np.pi * progress)))


def build_model(config: RunConfig) -> DualMotionModel:
    """Construct encoder + denoiser with seeded initialization."""
    config.validate()
    torch.manual_seed(config.train.seed)
    encoder = TextFeatureEncoder(feature_dim=config.model.text_dim)
    denoiser = ThreeStageDenoiser(
        motion_width=feature_dim(config.data.joint_count),
        latent_dim=config.model.latent_dim,
        text_dim=config.model.text_dim,
        frame_count=config.data.frame_count,
        segment_count=config.model.segment_count,
        stage_layers=(
            config.model.stage1_layers,
            config.model.graph_layers,
            config.model.stage3_layers,
        ),
        lambda_stage2=config.model.lambda_stage2,
        lambda_stage3=config.model.lambda_stage3,
        max_timesteps=config.diffusion.timesteps,
        share_person_weights=config.model.share_person_weights,
        graph_mask_mode=config.model.graph_mask_mode,
        pe_scale=config.model.pe_scale,
    )
    return DualMotionModel(encoder, denoiser)


def motion_tensor(samples: list[DualMotion]) -> torch.Tensor:
    """Stack samples into (n, 2, S, D) float32."""
    rows = [
        np.stack([m.person1.frames, m.person2.frames], axis=0) for m in samples
    ]
    return torch.as_tensor(np.stack(rows, axis=0), dtype=torch.float32)


def compute_normalization(x0: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
    """Per-channel mean/std over samples, persons and frames."""
    flat = x0.reshape(-1, x0.shape[-1])
    return flat.mean(dim=0), flat.std(dim=0)


def apply_condition_dropout(
    cond: ConditionBatch, drop: torch.Tensor, null_row: torch.Tensor
) -> ConditionBatch:
    """Replace dropped samples' text features with the null token."""
    if not bool(drop.any()):
        return cond

    def mix(feats: torch.Tensor, valid: torch.Tensor):
        null_feats = torch.zeros_like(feats)
        null_feats[:, 0] = null_row
        null_valid = torch.zeros_like(valid)
        null_valid[:, 0] = True
        return (
            torch.where(drop.view(-1, 1, 1), null_feats, feats),
            torch.where(drop.view(-1, 1), null_valid, valid),
        )

    overall, overall_valid = mix(cond.overall, cond.overall_valid)
    p1, p1_valid = mix(cond.person1, cond.person1_valid)
    p2, p2_valid = mix(cond.person2, cond.person2_valid)
    return ConditionBatch(overall, overall_valid, p1, p1_valid, p2, p2_valid)


@dataclass
class TrainResult:
    model: DualMotionModel
    schedule: DiffusionSchedule
    history: list[dict] = field(default_factory=list)
    checkpoint_path: Path | None = None
    fingerprint: str = ""


def _prepare_records(
    dataset: list[tuple[DualMotion, str]],
    cache: dict[str, tuple[str, str]] | None,
) -> list[PromptRecord]:
    return [decompose_prompt(prompt, cache) for _, prompt in dataset]


def _check_dataset(config: RunConfig, dataset: list[tuple[DualMotion, str]]) -> None:
    if not dataset:
        raise ValueError("dataset must be non-empty")
    for motion, _ in dataset:
        if motion.frame_count != config.data.frame_count:
            raise ValueError(
                f"sample {motion.id!r} has {motion.frame_count} frames, "
                f"config expects {config.data.frame_count}"
            )
        if motion.joint_count != config.data.joint_count:
            raise ValueError(
                f"sample {motion.id!r} has {motion.joint_count} joints, "
                f"config expects {config.data.joint_count}"
            )


def train(
    config: RunConfig,
    dataset: list[tuple[DualMotion, str]],
    out_dir: str | Path | None = None,
    cache: dict[str, tuple[str, str]] | None = None,
    log_every: int = 0,
) -> TrainResult:
    """Train a model on (dual motion, prompt) samples."""
    config.validate()
    _check_dataset(config, dataset)
    tcfg = config.train
    if tcfg.num_threads > 0:
        torch.set_num_threads(tcfg.num_threads)
    out_path = Path(out_dir) if out_dir is not None else None
    if out_path is not None:
        out_path.mkdir(parents=True, exist_ok=True)

    model = build_model(config)
    schedule = make_schedule(
        config.diffusion.timesteps, config.diffusion.beta_start, config.diffusion.beta_end
    )
    records = _prepare_records(dataset, cache)
    layout = segment_bounds(config.data.frame_count, config.model.segment_count)
    gt_profiles = torch.as_tensor(
        np.stack([gt_distance_profile(m, layout).weights for m, _ in dataset]),
        dtype=torch.float32,
    )

    x0_all = motion_tensor([m for m, _ in dataset])
    if tcfg.normalize_features:
        mean, std = compute_normalization(x0_all)
        model.set_normalization(mean, std)
    x0_all = model.normalize(x0_all)

    weights = LossWeights(lambda_distance=tcfg.lambda_distance)
    opt = torch.optim.Adam(model.parameters(), lr=tcfg.lr_start, foreach=True)
    gen = torch.Generator().manual_seed(tcfg.seed)
    n = len(dataset)
    history: list[dict] = []

    model.train()
    for step in range(tcfg.steps):
        lr = cosine_lr(step, tcfg.steps, tcfg.lr_start, tcfg.lr_end)
        for group in opt.param_groups:
            group["lr"] = lr

        idx = torch.randint(0, n, (min(tcfg.batch_size, n),), generator=gen)
        batch = x0_all[idx]
        t = torch.randint(0, schedule.timesteps, (batch.shape[0],), generator=gen)
        noise = torch.randn(batch.shape, generator=gen)
        x_t = q_sample(batch, t, noise, schedule)

        cond = model.encode_conditions([records[int(i)] for i in idx])
        drop = torch.rand(batch.shape[0], generator=gen) < tcfg.condition_dropout
        cond = apply_condition_dropout(cond, drop, model.encoder.null_token[0])

        pred1, pred2, profile = model.denoiser(x_t[:, 0], x_t[:, 1], t, cond)
        recon = reconstruction_loss(torch.stack([pred1, pred2], dim=1), batch)
        distance = distance_cross_entropy(profile, gt_profiles[idx])
        if not bool(torch.isfinite(recon) and torch.isfinite(distance)):
            _dump_nan_batch(out_path, step, idx, t, recon, distance)
            raise NumericError(f"non-finite loss at step {step}")
        loss = total_loss(recon, distance, weights)

        opt.zero_grad()
        loss.backward()
        torch.nn.utils.clip_grad_norm_(model.parameters(), tcfg.grad_clip, foreach=True)
        opt.step()

        entry = {
            "step": step,
            "loss": float(loss.detach()),
            "recon": float(recon.detach()),
            "distance": float(distance.detach()),
            "lr": lr,
        }
        history.append(entry)
        if log_every and (step % log_every == 0 or step == tcfg.steps - 1):
            print(
                f"step {step:6d}  loss {entry['loss']:.5f}  "
                f"recon {entry['recon']:.5f}  distance {entry['distance']:.5f}"
            )
        if (
            out_path is not None
            and tcfg.checkpoint_every
            and (step + 1) % tcfg.checkpoint_every == 0
            and step + 1 < tcfg.steps
        ):
            _save(out_path / f"checkpoint_{step + 1:06d}.dmck", model, opt, config, step + 1)

    model.eval()
    ckpt_path = None
    if out_path is not None:
        ckpt_path = out_path / CHECKPOINT_NAME
        _save(ckpt_path, model, opt, config, tcfg.steps)
    return TrainResult(
        model=model,
        schedule=schedule,
        history=history,
        checkpoint_path=ckpt_path,
        fingerprint=config.fingerprint(),
    )


def _save(path: Path, model, opt, config: RunConfig, step: int) -> None:
    from .checkpoint import save_checkpoint

    save_checkpoint(
        path,
        dict(model.state_dict()),
        fingerprint=config.fingerprint(),
        step=step,
        optimizer_state=opt.state_dict(),
        extra={"config": config.to_dict()},
    )


def _dump_nan_batch(out_path, step, idx, t, recon, distance) -> None:
    dump = {
        "step": step,
        "sample_indices": [int(i) for i in idx],
        "timesteps": [int(v) for v in t],
        "recon": float(recon),
        "distance": float(distance),
    }
    target = (out_path or Path(".")) / "nan_dump.json"
    try:
        target.write_text(json.dumps(dump, indent=2), encoding="utf-8")
    except OSError:
        pass


def load_model(config: RunConfig, checkpoint_path: str | Path, force: bool = False):
    """Rebuild a model from a checkpoint, enforcing the config fingerprint."""
    from .checkpoint import load_checkpoint

    ckpt = load_checkpoint(checkpoint_path)
    if not force and ckpt.fingerprint != config.fingerprint():
        raise ValueError(
            f"checkpoint fingerprint {ckpt.fingerprint} does not match config "
            f"{config.fingerprint()}; pass force=True to override"
        )
    model = build_model(config)
    model.load_state_dict(ckpt.model_state)
    model.eval()
    return model, ckpt


def evaluate_reconstruction(
    model: DualMotionModel,
    dataset: list[tuple[DualMotion, str]],
    schedule: DiffusionSchedule,
    t_values: tuple[int, ...] = (50, 250, 500, 750, 950),
    seed: int = 0,
    cache: dict[str, tuple[str, str]] | None = None,
) -> float:
    """Deterministic conditioned reconstruction loss (no dropout)."""
    records = _prepare_records(dataset, cache)
    x0 = model.normalize(motion_tensor([m for m, _ in dataset]))
    gen = torch.Generator().manual_seed(seed)
    losses = []
    with torch.no_grad():
        cond = model.encode_conditions(records)
        for t in t_values:
            t_batch = torch.full((x0.shape[0],), min(t, schedule.timesteps - 1))
            noise = torch.randn(x0.shape, generator=gen)
            x_t = q_sample(x0, t_batch, noise, schedule)
            pred1, pred2, _ = model.denoiser(x_t[:, 0], x_t[:, 1], t_batch, cond)
            losses.append(
                float(reconstruction_loss(torch.stack([pred1, pred2], dim=1), x0))
            )
    return float(np.mean(losses))
