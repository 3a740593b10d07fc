"""Text feature extraction without pretrained weights.

Tokens map through a fixed hash to a frozen embedding table (so any
vocabulary works), get sinusoidal position offsets, and pass through a
small trainable transformer encoder stack. Empty text yields the learned
null-token row used as the unconditional branch of guidance. An external
encoder producing (N_w, L) matrices can be swapped in anywhere a
``TextFeatureEncoder`` is accepted.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from .text import PromptRecord, tokenize


def sinusoidal_table(length: int, dim: int, dtype=torch.float32) -> torch.Tensor:
    """Standard sin/cos position table, shape (length, dim)."""
    half = (dim + 1) // 2
    pos = np.arange(length, dtype=np.float64)[:, None]
    freq = np.exp(-np.log(10000.0) * np.arange(half, dtype=np.float64) / max(half, 1))
    angles = pos * freq[None, :]
    table = np.zeros((length, 2 * half))
    table[:, 0::2] = np.sin(angles)
    table[:, 1::2] = np.cos(angles)
    return torch.as_tensor(table[:, :dim], dtype=dtype)


def _hashed_embedding(token: str, dim: int) -> np.ndarray:
    digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
    rng = np.random.default_rng(int.from_bytes(digest, "little"))
    return rng.standard_normal(dim)


class TextFeatureEncoder(nn.Module):
    """Word-level text features: frozen hash embeddings + trainable stack."""

    def __init__(
        self,
        feature_dim: int = 64,
        layers: int = 2,
        heads: int = 4,
        max_tokens: int = 64,
    ):
        super().__init__()
        self.feature_dim = feature_dim
        self.max_tokens = max_tokens
        layer = nn.TransformerEncoderLayer(
            d_model=feature_dim,
            nhead=heads,
            dim_feedforward=2 * feature_dim,
            dropout=0.0,
            batch_first=True,
        )
        self.stack = nn.TransformerEncoder(
            layer, num_layers=layers, enable_nested_tensor=False
        )
        self.null_token = nn.Parameter(torch.zeros(1, feature_dim))
        nn.init.normal_(self.null_token, std=0.02)
        self.register_buffer("positions", sinusoidal_table(max_tokens, feature_dim))
        self._table: dict[str, torch.Tensor] = {}

    def _lookup(self, token: str) -> torch.Tensor:
        cached = self._table.get(token)
        if cached is None:
            cached = torch.as_tensor(_hashed_embedding(token, self.feature_dim))
            self._table[token] = cached
        return cached

    def token_embeddings(self, text: str) -> torch.Tensor:
        """Pre-stack embeddings (frozen table + position offsets), (N_w, L)."""
        tokens = tokenize(text)[: self.max_tokens]
        if not tokens:
            raise ValueError("no tokens; empty text is served by the null token")
        ref = self.positions
        emb = torch.stack([self._lookup(t) for t in tokens]).to(ref.dtype).to(ref.device)
        return emb + ref[: len(tokens)]

    def encode(self, text: str) -> torch.Tensor:
        """Word-level features (N_w, L); the null-token row for empty text."""
        if not tokenize(text):
            return self.null_token
        emb = self.token_embeddings(text)
        return self.stack(emb.unsqueeze(0)).squeeze(0)

    def encode_batch(self, texts: list[str]) -> tuple[torch.Tensor, torch.Tensor]:
        """Padded word features for many texts in one stack forward.

        Returns ``(features, valid)`` with features (B, N_max, L) and a
        boolean mask (B, N_max) marking real tokens. Empty texts occupy a
        single null-token position.
        """
        ref = self.positions
        pre = []
        for t in texts:
            toks = tokenize(t)
            pre.append(self.token_embeddings(t) if toks else None)
        lengths = [p.shape[0] if p is not None else 1 for p in pre]
        n_max = max(lengths)
        out = ref.new_zeros(len(texts), n_max, self.feature_dim)
        valid = torch.zeros(len(texts), n_max, dtype=torch.bool, device=ref.device)

        live = [i for i, p in enumerate(pre) if p is not None]
        if live:
            n_live = max(pre[i].shape[0] for i in live)
            batch = ref.new_zeros(len(live), n_live, self.feature_dim)
            pad = torch.ones(len(live), n_live, dtype=torch.bool, device=ref.device)
            for row, i in enumerate(live):
                n = pre[i].shape[0]
                batch[row, :n] = pre[i]
                pad[row, :n] = False
            encoded = self.stack(batch, src_key_padding_mask=pad)
            for row, i in enumerate(live):
                n = pre[i].shape[0]
                out[i, :n] = encoded[row, :n]
                valid[i, :n] = True
        for i, p in enumerate(pre):
            if p is None:
                out[i, 0] = self.null_token[0]
                valid[i, 0] = True
        return out, valid


class SentenceFeature(nn.Module):
    """Mean-pool word features, then a learned affine map to motion width."""

    def __init__(self, text_dim: int, motion_dim: int, identity_init: bool = False):
        super().__init__()
        self.proj = nn.Linear(text_dim, motion_dim)
        if identity_init:
            if text_dim != motion_dim:
                raise ValueError("identity init requires text_dim == motion_dim")
            with torch.no_grad():
                self.proj.weight.copy_(torch.eye(motion_dim))
                self.proj.bias.zero_()

    def forward(
        self, words: torch.Tensor, valid: torch.Tensor | None = None
    ) -> torch.Tensor:
        if words.shape[-2] < 1:
            raise ValueError("need at least one token row")
        if valid is None:
            pooled = words.mean(dim=-2, keepdim=True)
        else:
            weights = valid.to(words.dtype).unsqueeze(-1)
            pooled = (words * weights).sum(dim=-2, keepdim=True) / weights.sum(
                dim=-2, keepdim=True
            )
        return self.proj(pooled)


@dataclass
class TextBundle:
    """Encoded prompt set conditioning one dual-motion sample."""

    record: PromptRecord
    overall: torch.Tensor  # (N_g, L)
    person1: torch.Tensor  # (N_1, L)
    person2: torch.Tensor  # (N_2, L)


def encode_bundle(
    encoder: TextFeatureEncoder,
    record: PromptRecord,
) -> TextBundle:
    return TextBundle(
        record=record,
        overall=encoder.encode(record.overall),
        person1=encoder.encode(record.person1),
        person2=encoder.encode(record.person2),
    )


def null_bundle(encoder: TextFeatureEncoder) -> TextBundle:
    """The unconditional bundle: every text replaced by the null token."""
    null = encoder.encode("")
    return TextBundle(
        record=PromptRecord("", "", "", source="rule"),
        overall=null,
        person1=null,
        person2=null,
    )
