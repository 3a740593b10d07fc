"""Distance-aware interaction modeling between the two persons.

A small MLP predicts, from the overall prompt features, a softmax weight
per temporal segment (near segments get high weight). The ground-truth
counterpart applies 1 - softmax to per-segment mean inter-person joint
distances, so closer segments again carry larger weights. Segment weights
become per-frame coefficients whose pairwise products fill the cross
blocks of the interaction weight matrix; that matrix masks a learnable
frame-to-frame adjacency, and graph reasoning propagates features over the
stacked [own; partner] sequence.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from .errors import ContractError
from .motion import DualMotion, SegmentLayout

LOG_EPS = 1e-8


@dataclass(frozen=True)
class DistanceProfile:
    """K segment weights, either predicted (softmax) or ground truth (1 - softmax)."""

    weights: np.ndarray
    kind: str  # "predicted" | "ground_truth"

    def __post_init__(self):
        object.__setattr__(
            self, "weights", np.asarray(self.weights, dtype=np.float64).reshape(-1)
        )
        if self.kind not in ("predicted", "ground_truth"):
            raise ValueError(f"unknown profile kind {self.kind!r}")

    @property
    def segment_count(self) -> int:
        return self.weights.shape[0]


class DistancePredictor(nn.Module):
    """Pool prompt tokens, then an MLP to K segment logits."""

    def __init__(self, text_dim: int, segment_count: int, hidden: int = 64):
        super().__init__()
        self.mlp = nn.Sequential(
            nn.Linear(text_dim, hidden),
            nn.ReLU(),
            nn.Linear(hidden, segment_count),
        )

    def forward(
        self, words: torch.Tensor, valid: torch.Tensor | None = None
    ) -> torch.Tensor:
        """Softmax segment weights, shape (..., K)."""
        if words.shape[-2] < 1:
            raise ValueError("need at least one token row")
        if valid is None:
            pooled = words.mean(dim=-2)
        else:
            w = valid.to(words.dtype).unsqueeze(-1)
            pooled = (words * w).sum(dim=-2) / w.sum(dim=-2)
        return torch.softmax(self.mlp(pooled), dim=-1)


def predict_distance(words: torch.Tensor, predictor: DistancePredictor) -> DistanceProfile:
    """Predicted profile for a single prompt's (N_w, L) features."""
    with torch.no_grad():
        weights = predictor(words)
    return DistanceProfile(weights.detach().cpu().numpy(), kind="predicted")


def gt_distance_profile(motion: DualMotion, layout: SegmentLayout) -> DistanceProfile:
    """Ground-truth profile from per-segment mean inter-person joint distance."""
    if layout.frame_count != motion.frame_count:
        raise ValueError(
            f"layout covers {layout.frame_count} frames, motion has {motion.frame_count}"
        )
    dist = np.linalg.norm(
        motion.person1.positions().astype(np.float64)
        - motion.person2.positions().astype(np.float64),
        axis=-1,
    )  # (S, N_j)
    means = []
    for lo, hi in layout.bounds:
        if hi <= lo:
            raise ValueError(f"zero-length segment [{lo}, {hi})")
        means.append(dist[lo:hi].mean())
    means = np.asarray(means)
    exp = np.exp(means - means.max())
    return DistanceProfile(1.0 - exp / exp.sum(), kind="ground_truth")


def distance_cross_entropy(pre: torch.Tensor, gt: torch.Tensor) -> torch.Tensor:
    """-sum(gt * log(pre + eps)), averaged over any leading batch dims."""
    if pre.shape != gt.shape:
        raise ValueError(f"shape mismatch: {tuple(pre.shape)} vs {tuple(gt.shape)}")
    if torch.any(pre < 0):
        raise ContractError("predicted profile has negative entries")
    ce = -(gt * torch.log(pre + LOG_EPS)).sum(dim=-1)
    return ce.mean()


def distance_loss(pre: DistanceProfile, gt: DistanceProfile) -> float:
    """Cross entropy between a predicted and a ground-truth profile."""
    if pre.segment_count != gt.segment_count:
        raise ValueError(
            f"segment counts differ: {pre.segment_count} vs {gt.segment_count}"
        )
    return float(
        distance_cross_entropy(
            torch.as_tensor(pre.weights), torch.as_tensor(gt.weights)
        )
    )


def _segment_index(layout: SegmentLayout, device) -> torch.Tensor:
    sizes = [hi - lo for lo, hi in layout.bounds]
    return torch.repeat_interleave(
        torch.arange(layout.segment_count, device=device),
        torch.tensor(sizes, device=device),
    )


def interaction_weight_matrix(
    profile: torch.Tensor,
    layout: SegmentLayout,
    segment_index: torch.Tensor | None = None,
) -> torch.Tensor:
    """Block matrix: identity self blocks, coefficient-product cross blocks.

    ``profile`` (..., K) -> (..., 2S, 2S), differentiable in the profile.
    """
    if profile.shape[-1] != layout.segment_count:
        raise ValueError(
            f"profile length {profile.shape[-1]} != segment count {layout.segment_count}"
        )
    S = layout.frame_count
    if segment_index is None:
        segment_index = _segment_index(layout, profile.device)
    coef = profile[..., segment_index]  # (..., S)
    cross = coef.unsqueeze(-1) * coef.unsqueeze(-2)  # (..., S, S)
    eye = torch.eye(S, dtype=profile.dtype, device=profile.device)
    eye = eye.expand(cross.shape)
    top = torch.cat([eye, cross], dim=-1)
    bottom = torch.cat([cross, eye], dim=-1)
    return torch.cat([top, bottom], dim=-2)


def build_interaction_weights(
    profile: DistanceProfile | np.ndarray, layout: SegmentLayout
) -> np.ndarray:
    """Numpy-facing wrapper around :func:`interaction_weight_matrix`."""
    weights = profile.weights if isinstance(profile, DistanceProfile) else profile
    t = torch.as_tensor(np.asarray(weights, dtype=np.float64))
    return interaction_weight_matrix(t, layout).numpy()


def graph_reasoning(
    x_pair: torch.Tensor,
    adjacency: torch.Tensor,
    w_inter: torch.Tensor,
    mask_mode: str = "hadamard",
) -> torch.Tensor:
    """One propagation step over the masked adjacency, ReLU activation.

    ``mask_mode`` selects how the interaction weights combine with the
    adjacency: elementwise ("hadamard", default) or matrix product
    ("matmul").
    """
    if x_pair.shape[-2] != adjacency.shape[-1]:
        raise ValueError(
            f"stacked frames {x_pair.shape[-2]} != adjacency size {adjacency.shape[-1]}"
        )
    if mask_mode == "hadamard":
        effective = w_inter * adjacency
    elif mask_mode == "matmul":
        effective = w_inter @ adjacency
    else:
        raise ValueError(f"unknown mask_mode {mask_mode!r}")
    return torch.relu(effective @ x_pair)


class AdaptiveStage(nn.Module):
    """Distance prediction plus residual interaction-aware graph reasoning."""

    def __init__(
        self,
        motion_dim: int,
        text_dim: int,
        frame_count: int,
        layout: SegmentLayout,
        layers: int = 2,
        lambda_mix: float = 0.1,
        mask_mode: str = "hadamard",
        init_seed: int | None = None,
    ):
        super().__init__()
        if layout.frame_count != frame_count:
            raise ValueError("layout does not cover the configured frame count")
        self.layout = layout
        self.lambda_mix = lambda_mix
        self.mask_mode = mask_mode
        self.predictor = DistancePredictor(text_dim, layout.segment_count)
        gen = None
        if init_seed is not None:
            gen = torch.Generator()
            gen.manual_seed(init_seed)
        size = 2 * frame_count
        self.adjacencies = nn.ParameterList(
            nn.Parameter(
                torch.eye(size) + 0.01 * torch.randn(size, size, generator=gen)
            )
            for _ in range(layers)
        )
        self.register_buffer(
            "segment_index", _segment_index(layout, torch.device("cpu"))
        )

    def _propagate(self, pair: torch.Tensor, w_inter: torch.Tensor) -> torch.Tensor:
        for adjacency in self.adjacencies:
            pair = graph_reasoning(pair, adjacency, w_inter, self.mask_mode)
        return pair

    def forward(
        self,
        x1: torch.Tensor,
        x2: torch.Tensor,
        overall: torch.Tensor,
        overall_valid: torch.Tensor | None = None,
    ) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
        """Returns (person1, person2, predicted profile (..., K))."""
        frames = x1.shape[-2]
        profile = self.predictor(overall, overall_valid)
        w_inter = interaction_weight_matrix(profile, self.layout, self.segment_index)
        g1 = self._propagate(torch.cat([x1, x2], dim=-2), w_inter)[..., :frames, :]
        g2 = self._propagate(torch.cat([x2, x1], dim=-2), w_inter)[..., :frames, :]
        y1 = self.lambda_mix * g1 + x1
        y2 = self.lambda_mix * g2 + x2
        return y1, y2, profile
