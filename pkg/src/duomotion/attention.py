"""Mixed attention over motion and text, and the per-person first stage.

The attention uses the factored (linear-complexity) form: keys are
normalized with a softmax along the token axis per feature column, queries
with a softmax along the feature axis per row, and the two are combined
through a compact context matrix. Key/value rows concatenate projected
motion frames with projected text tokens. All projections are bias-free
("trainable matrices"), so zeroing the value projections makes a residual
block an exact identity.

Modules accept unbatched (S, D) inputs or any leading batch dimensions.
"""
from __future__ import annotations

import torch
from torch import nn

from .errors import ContractError
from .encoding import sinusoidal_table


def factored_attention(
    query: torch.Tensor,
    key: torch.Tensor,
    value: torch.Tensor,
    key_valid: torch.Tensor | None = None,
) -> torch.Tensor:
    """Attention via token-softmaxed keys and feature-softmaxed queries.

    query (..., S, A), key (..., M, A), value (..., M, Dv) -> (..., S, Dv).
    ``key_valid`` (..., M) masks padded key/value rows out of the token
    softmax.
    """
    if query.shape[-1] != key.shape[-1]:
        raise ValueError(
            f"query width {query.shape[-1]} != key width {key.shape[-1]}"
        )
    if key.shape[-2] != value.shape[-2]:
        raise ValueError(
            f"key rows {key.shape[-2]} != value rows {value.shape[-2]}"
        )
    if key_valid is not None:
        key = key.masked_fill(~key_valid.unsqueeze(-1), float("-inf"))
    key_weights = torch.softmax(key, dim=-2)
    context = key_weights.transpose(-2, -1) @ value  # (..., A, Dv)
    query_weights = torch.softmax(query, dim=-1)
    return query_weights @ context


class MixedAttention(nn.Module):
    """One motion/text mixed-attention block (Query from motion only)."""

    def __init__(self, motion_dim: int, text_dim: int, attn_dim: int | None = None):
        super().__init__()
        attn_dim = motion_dim if attn_dim is None else attn_dim
        self.query_motion = nn.Linear(motion_dim, attn_dim, bias=False)
        self.key_motion = nn.Linear(motion_dim, attn_dim, bias=False)
        self.value_motion = nn.Linear(motion_dim, motion_dim, bias=False)
        self.key_text = nn.Linear(text_dim, attn_dim, bias=False)
        self.value_text = nn.Linear(text_dim, motion_dim, bias=False)

    def forward(
        self,
        x: torch.Tensor,
        text: torch.Tensor,
        text_valid: torch.Tensor | None = None,
    ) -> torch.Tensor:
        query = self.query_motion(x)
        key = torch.cat([self.key_motion(x), self.key_text(text)], dim=-2)
        value = torch.cat([self.value_motion(x), self.value_text(text)], dim=-2)
        key_valid = None
        if text_valid is not None:
            motion_valid = torch.ones(
                x.shape[:-1], dtype=torch.bool, device=x.device
            )
            key_valid = torch.cat([motion_valid, text_valid], dim=-1)
        return factored_attention(query, key, value, key_valid)


class SelfLearningStage(nn.Module):
    """Per-person residual mixed attention over own motion and own prompt.

    Each person has an independent weight set unless ``share_weights`` is
    on. Sinusoidal frame positions are added to the attention input (not
    to the residual stream) at every layer.
    """

    def __init__(
        self,
        motion_dim: int,
        text_dim: int,
        layers: int = 2,
        max_frames: int = 512,
        share_weights: bool = False,
        pe_scale: float = 1.0,
    ):
        super().__init__()
        self.layers_person1 = nn.ModuleList(
            MixedAttention(motion_dim, text_dim) for _ in range(layers)
        )
        if share_weights:
            self.layers_person2 = self.layers_person1
        else:
            self.layers_person2 = nn.ModuleList(
                MixedAttention(motion_dim, text_dim) for _ in range(layers)
            )
        # scaled so frame identity stays legible in the attention logits
        # even when the features themselves are near-pure noise
        self.register_buffer(
            "positions", pe_scale * sinusoidal_table(max_frames, motion_dim)
        )

    def _run(self, layers, x, text, text_valid):
        pe = self.positions[: x.shape[-2]]
        for layer in layers:
            x = x + layer(x + pe, text, text_valid)
        return x

    def forward(
        self,
        x1: torch.Tensor,
        x2: torch.Tensor,
        text1: torch.Tensor | None,
        text2: torch.Tensor | None,
        text1_valid: torch.Tensor | None = None,
        text2_valid: torch.Tensor | None = None,
    ) -> tuple[torch.Tensor, torch.Tensor]:
        if text1 is None or text2 is None:
            raise ContractError("self-learning stage requires decomposed per-person prompts")
        y1 = self._run(self.layers_person1, x1, text1, text1_valid)
        y2 = self._run(self.layers_person2, x2, text2, text2_valid)
        return y1, y2
