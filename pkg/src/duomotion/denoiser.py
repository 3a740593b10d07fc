"""Three-stage denoiser: self-learning, adaptive adjustment, refinement.

Motion features enter through a projection (identity-initialized when the
widths match), each stage re-injects a projected timestep embedding into
the residual stream, and a final head maps back to motion width. The
denoiser predicts clean features for both persons and also returns the
predicted distance profile for supervision and inspection.
"""
from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn

from .attention import SelfLearningStage
from .encoding import TextFeatureEncoder, TextBundle, sinusoidal_table
from .interaction import AdaptiveStage
from .motion import SegmentLayout, segment_bounds
from .refinement import RefinementStage


@dataclass
class ConditionBatch:
    """Padded per-batch text features for the three conditioning streams."""

    overall: torch.Tensor  # (B, N, L)
    overall_valid: torch.Tensor  # (B, N) bool
    person1: torch.Tensor
    person1_valid: torch.Tensor
    person2: torch.Tensor
    person2_valid: torch.Tensor

    @property
    def batch_size(self) -> int:
        return self.overall.shape[0]


def pad_features(rows: list[torch.Tensor]) -> tuple[torch.Tensor, torch.Tensor]:
    """Stack (n_i, L) feature matrices into (B, N_max, L) plus a valid mask."""
    n_max = max(r.shape[0] for r in rows)
    out = rows[0].new_zeros(len(rows), n_max, rows[0].shape[1])
    valid = torch.zeros(len(rows), n_max, dtype=torch.bool, device=rows[0].device)
    for i, r in enumerate(rows):
        out[i, : r.shape[0]] = r
        valid[i, : r.shape[0]] = True
    return out, valid


def condition_from_bundles(bundles: list[TextBundle]) -> ConditionBatch:
    overall, overall_valid = pad_features([b.overall for b in bundles])
    p1, p1_valid = pad_features([b.person1 for b in bundles])
    p2, p2_valid = pad_features([b.person2 for b in bundles])
    return ConditionBatch(overall, overall_valid, p1, p1_valid, p2, p2_valid)


def _identity_or_default(layer: nn.Linear) -> None:
    if layer.in_features == layer.out_features:
        with torch.no_grad():
            layer.weight.copy_(torch.eye(layer.out_features))
            layer.bias.zero_()


class _TimestepInjection(nn.Module):
    def __init__(self, dim: int):
        super().__init__()
        self.net = nn.Sequential(nn.Linear(dim, dim), nn.SiLU(), nn.Linear(dim, dim))

    def forward(self, temb: torch.Tensor) -> torch.Tensor:
        return self.net(temb)


class ThreeStageDenoiser(nn.Module):
    def __init__(
        self,
        motion_width: int,
        latent_dim: int = 64,
        text_dim: int = 64,
        frame_count: int = 60,
        segment_count: int = 3,
        stage_layers: tuple[int, int, int] = (2, 2, 3),
        lambda_stage2: float = 0.1,
        lambda_stage3: float = 0.1,
        max_timesteps: int = 1000,
        share_person_weights: bool = False,
        graph_mask_mode: str = "hadamard",
        pe_scale: float = 6.0,
    ):
        super().__init__()
        self.motion_width = motion_width
        self.latent_dim = latent_dim
        self.frame_count = frame_count
        self.layout: SegmentLayout = segment_bounds(frame_count, segment_count)

        self.input_proj = nn.Linear(motion_width, latent_dim)
        _identity_or_default(self.input_proj)
        # zero-initialized readout: predictions start at the (normalized)
        # data mean instead of echoing the noisy input
        self.head = nn.Linear(latent_dim, motion_width)
        with torch.no_grad():
            self.head.weight.zero_()
            self.head.bias.zero_()

        self.register_buffer("time_table", sinusoidal_table(max_timesteps, latent_dim))
        self.time_inject = nn.ModuleList(_TimestepInjection(latent_dim) for _ in range(3))

        self.stage1 = SelfLearningStage(
            latent_dim,
            text_dim,
            layers=stage_layers[0],
            max_frames=frame_count,
            share_weights=share_person_weights,
            pe_scale=pe_scale,
        )
        self.stage2 = AdaptiveStage(
            latent_dim,
            text_dim,
            frame_count,
            self.layout,
            layers=stage_layers[1],
            lambda_mix=lambda_stage2,
            mask_mode=graph_mask_mode,
        )
        self.stage3 = RefinementStage(
            latent_dim,
            text_dim,
            layers=stage_layers[2],
            lambda_mix=lambda_stage3,
            max_frames=frame_count,
            share_weights=share_person_weights,
            pe_scale=pe_scale,
        )

    def _temb(self, t: torch.Tensor | int, like: torch.Tensor) -> torch.Tensor:
        t = torch.as_tensor(t, dtype=torch.long, device=like.device)
        emb = self.time_table.to(like.dtype)[t]
        if t.ndim == 0:
            return emb  # (latent,) broadcasts over frames and batch
        return emb.unsqueeze(-2)  # (B, 1, latent) broadcasts over frames

    def features(
        self,
        x1: torch.Tensor,
        x2: torch.Tensor,
        t: torch.Tensor | int,
        cond: ConditionBatch,
    ) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
        """Latent features after all three stages, plus the profile."""
        h1 = self.input_proj(x1)
        h2 = self.input_proj(x2)

        temb = self._temb(t, h1)
        t1, t2, t3 = (inject(temb) for inject in self.time_inject)
        h1, h2 = self.stage1(
            h1 + t1,
            h2 + t1,
            cond.person1,
            cond.person2,
            cond.person1_valid,
            cond.person2_valid,
        )
        h1, h2, profile = self.stage2(
            h1 + t2, h2 + t2, cond.overall, cond.overall_valid
        )
        h1, h2 = self.stage3(h1 + t3, h2 + t3, cond.overall, cond.overall_valid)
        return h1, h2, profile

    def forward(
        self,
        x1: torch.Tensor,
        x2: torch.Tensor,
        t: torch.Tensor | int,
        cond: ConditionBatch,
    ) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
        """Predict clean features for both persons; also return the profile."""
        h1, h2, profile = self.features(x1, x2, t, cond)
        return self.head(h1), self.head(h2), profile


def zero_residual_paths(denoiser: ThreeStageDenoiser) -> None:
    """Zero every parameter that writes into the residual stream.

    Covers the value projections of both attention stages, the highlight
    map, the graph adjacencies, and the timestep injections, making each
    stage an exact identity on its features.
    """
    with torch.no_grad():
        for layers in (denoiser.stage1.layers_person1, denoiser.stage1.layers_person2):
            for layer in layers:
                layer.value_motion.weight.zero_()
                layer.value_text.weight.zero_()
        for adjacency in denoiser.stage2.adjacencies:
            adjacency.zero_()
        for layers in (denoiser.stage3.layers_person1, denoiser.stage3.layers_person2):
            for layer in layers:
                layer.value_motion.weight.zero_()
                layer.value_text.weight.zero_()
                layer.value_partner.weight.zero_()
        for highlight in (denoiser.stage3.highlight_person1, denoiser.stage3.highlight_person2):
            highlight.map.weight.zero_()
            highlight.map.bias.zero_()
        for inject in denoiser.time_inject:
            inject.net[-1].weight.zero_()
            inject.net[-1].bias.zero_()


class DualMotionModel(nn.Module):
    """Text encoder + denoiser + feature normalization stats."""

    def __init__(self, encoder: TextFeatureEncoder, denoiser: ThreeStageDenoiser):
        super().__init__()
        self.encoder = encoder
        self.denoiser = denoiser
        width = denoiser.motion_width
        self.register_buffer("feat_mean", torch.zeros(width))
        self.register_buffer("feat_std", torch.ones(width))

    def set_normalization(self, mean: torch.Tensor, std: torch.Tensor) -> None:
        self.feat_mean.copy_(mean)
        self.feat_std.copy_(torch.clamp(std, min=1e-6))

    def normalize(self, features: torch.Tensor) -> torch.Tensor:
        return (features - self.feat_mean) / self.feat_std

    def denormalize(self, features: torch.Tensor) -> torch.Tensor:
        return features * self.feat_std + self.feat_mean

    def encode_conditions(self, records) -> ConditionBatch:
        """Batch-encode decomposed prompt records into a condition batch."""
        overall, overall_valid = self.encoder.encode_batch([r.overall for r in records])
        p1, p1_valid = self.encoder.encode_batch([r.person1 for r in records])
        p2, p2_valid = self.encoder.encode_batch([r.person2 for r in records])
        return ConditionBatch(overall, overall_valid, p1, p1_valid, p2, p2_valid)

    def null_condition(self, batch_size: int) -> ConditionBatch:
        null = self.encoder.encode("").unsqueeze(0).expand(batch_size, -1, -1)
        valid = torch.ones(batch_size, null.shape[1], dtype=torch.bool)
        return ConditionBatch(null, valid, null, valid, null, valid)
