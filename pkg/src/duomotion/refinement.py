"""Overall-level refinement: keyframe highlighting plus partner-aware attention.

A per-frame similarity between layer-normalized motion features and the
layer-normalized sentence feature is mapped by an affine (1 -> D, applied
per frame) to a highlight map that is residually mixed into the features.
The following mixed attention draws keys/values from the person's own
motion, the overall prompt tokens, and the partner's motion.
"""
from __future__ import annotations

import torch
from torch import nn

from .attention import factored_attention
from .encoding import SentenceFeature, sinusoidal_table


class HighlightKeyframes(nn.Module):
    """Residual sentence-relevance map over frames."""

    def __init__(self, motion_dim: int, lambda_mix: float = 0.1):
        super().__init__()
        self.norm_motion = nn.LayerNorm(motion_dim)
        self.norm_sentence = nn.LayerNorm(motion_dim)
        self.map = nn.Linear(1, motion_dim)
        self.lambda_mix = lambda_mix

    def attention_map(self, x: torch.Tensor, sentence: torch.Tensor) -> torch.Tensor:
        similarity = self.norm_motion(x) @ self.norm_sentence(sentence).transpose(-2, -1)
        return self.map(similarity)  # (..., S, D)

    def forward(self, x: torch.Tensor, sentence: torch.Tensor) -> torch.Tensor:
        return x + self.lambda_mix * self.attention_map(x, sentence)


class InteractiveAttention(nn.Module):
    """Mixed attention with self-motion, overall-text and partner-motion keys."""

    def __init__(self, motion_dim: int, text_dim: int, attn_dim: int | None = None):
        super().__init__()
        attn_dim = motion_dim if attn_dim is None else attn_dim
        self.query_motion = nn.Linear(motion_dim, attn_dim, bias=False)
        self.key_motion = nn.Linear(motion_dim, attn_dim, bias=False)
        self.value_motion = nn.Linear(motion_dim, motion_dim, bias=False)
        self.key_text = nn.Linear(text_dim, attn_dim, bias=False)
        self.value_text = nn.Linear(text_dim, motion_dim, bias=False)
        self.key_partner = nn.Linear(motion_dim, attn_dim, bias=False)
        self.value_partner = nn.Linear(motion_dim, motion_dim, bias=False)

    def forward(
        self,
        x_self: torch.Tensor,
        text: torch.Tensor,
        x_partner: torch.Tensor,
        text_valid: torch.Tensor | None = None,
    ) -> torch.Tensor:
        query = self.query_motion(x_self)
        key = torch.cat(
            [self.key_motion(x_self), self.key_text(text), self.key_partner(x_partner)],
            dim=-2,
        )
        value = torch.cat(
            [
                self.value_motion(x_self),
                self.value_text(text),
                self.value_partner(x_partner),
            ],
            dim=-2,
        )
        key_valid = None
        if text_valid is not None:
            self_valid = torch.ones(x_self.shape[:-1], dtype=torch.bool, device=x_self.device)
            partner_valid = torch.ones(
                x_partner.shape[:-1], dtype=torch.bool, device=x_partner.device
            )
            key_valid = torch.cat([self_valid, text_valid, partner_valid], dim=-1)
        return factored_attention(query, key, value, key_valid)


class RefinementStage(nn.Module):
    """Highlight both persons, then stacked partner-aware attention layers.

    Layers advance both persons in lockstep: at every layer each person
    attends to the partner's features from the same depth.
    """

    def __init__(
        self,
        motion_dim: int,
        text_dim: int,
        layers: int = 3,
        lambda_mix: float = 0.1,
        max_frames: int = 512,
        share_weights: bool = False,
        pe_scale: float = 1.0,
    ):
        super().__init__()
        self.sentence = SentenceFeature(text_dim, motion_dim)
        self.highlight_person1 = HighlightKeyframes(motion_dim, lambda_mix)
        self.layers_person1 = nn.ModuleList(
            InteractiveAttention(motion_dim, text_dim) for _ in range(layers)
        )
        if share_weights:
            self.highlight_person2 = self.highlight_person1
            self.layers_person2 = self.layers_person1
        else:
            self.highlight_person2 = HighlightKeyframes(motion_dim, lambda_mix)
            self.layers_person2 = nn.ModuleList(
                InteractiveAttention(motion_dim, text_dim) for _ in range(layers)
            )
        self.register_buffer(
            "positions", pe_scale * sinusoidal_table(max_frames, motion_dim)
        )

    def forward(
        self,
        x1: torch.Tensor,
        x2: torch.Tensor,
        overall: torch.Tensor,
        overall_valid: torch.Tensor | None = None,
    ) -> tuple[torch.Tensor, torch.Tensor]:
        sentence = self.sentence(overall, overall_valid)
        h1 = self.highlight_person1(x1, sentence)
        h2 = self.highlight_person2(x2, sentence)
        pe = self.positions[: h1.shape[-2]]
        for layer1, layer2 in zip(self.layers_person1, self.layers_person2):
            y1 = h1 + layer1(h1 + pe, overall, h2 + pe, overall_valid)
            y2 = h2 + layer2(h2 + pe, overall, h1 + pe, overall_valid)
            h1, h2 = y1, y2
        return h1, h2
