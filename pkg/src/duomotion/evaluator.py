"""Toy contrastive motion/text embedder for the distribution metrics.

A stand-in for the pretrained evaluator networks that embedding metrics
normally assume: two small MLP encoders trained with a symmetric InfoNCE
loss on (dual motion, prompt) pairs. Scores produced with it are only
meaningful relative to other runs of this same evaluator, never against
published numbers.
"""
from __future__ import annotations

import numpy as np
import torch
from torch import nn

from .encoding import _hashed_embedding
from .motion import DualMotion
from .text import tokenize


class MotionEmbedder(nn.Module):
    """Temporal mean-pool of both persons' features, then a 2-layer MLP."""

    def __init__(self, motion_width: int, embed_dim: int = 32, hidden: int = 128):
        super().__init__()
        self.net = nn.Sequential(
            nn.Linear(2 * motion_width, hidden),
            nn.ReLU(),
            nn.Linear(hidden, embed_dim),
        )

    def forward(self, features: torch.Tensor) -> torch.Tensor:
        """features: (..., S, 2*D) concatenated persons."""
        return self.net(features.mean(dim=-2))


class TextEmbedder(nn.Module):
    """Mean of hashed token embeddings, then a 2-layer MLP."""

    def __init__(self, token_dim: int = 64, embed_dim: int = 32, hidden: int = 128):
        super().__init__()
        self.token_dim = token_dim
        self.net = nn.Sequential(
            nn.Linear(token_dim, hidden),
            nn.ReLU(),
            nn.Linear(hidden, embed_dim),
        )
        self._table: dict[str, np.ndarray] = {}

    def pooled_tokens(self, text: str) -> torch.Tensor:
        tokens = tokenize(text)
        if not tokens:
            return torch.zeros(self.token_dim)
        rows = []
        for t in tokens:
            if t not in self._table:
                self._table[t] = _hashed_embedding(t, self.token_dim)
            rows.append(self._table[t])
        return torch.as_tensor(np.mean(rows, axis=0), dtype=torch.float32)

    def forward(self, texts: list[str]) -> torch.Tensor:
        pooled = torch.stack([self.pooled_tokens(t) for t in texts])
        return self.net(pooled)


class ToyEvaluator(nn.Module):
    def __init__(self, motion_width: int, embed_dim: int = 32, token_dim: int = 64):
        super().__init__()
        self.motion_width = motion_width
        self.embed_dim = embed_dim
        self.motion_encoder = MotionEmbedder(motion_width, embed_dim)
        self.text_encoder = TextEmbedder(token_dim, embed_dim)

    @staticmethod
    def motion_features(sample: DualMotion) -> torch.Tensor:
        stacked = np.concatenate([sample.person1.frames, sample.person2.frames], axis=1)
        return torch.as_tensor(stacked, dtype=torch.float32)

    def embed_motions(self, samples: list[DualMotion]) -> np.ndarray:
        with torch.no_grad():
            feats = torch.stack([self.motion_features(s) for s in samples])
            return self.motion_encoder(feats).numpy()

    def embed_texts(self, texts: list[str]) -> np.ndarray:
        with torch.no_grad():
            return self.text_encoder(texts).numpy()


def save_evaluator(path, evaluator: ToyEvaluator) -> None:
    from .checkpoint import save_checkpoint

    save_checkpoint(
        path,
        dict(evaluator.state_dict()),
        fingerprint="toy-evaluator",
        step=0,
        extra={
            "motion_width": evaluator.motion_width,
            "embed_dim": evaluator.embed_dim,
            "token_dim": evaluator.text_encoder.token_dim,
        },
    )


def load_evaluator(path) -> ToyEvaluator:
    from .checkpoint import load_checkpoint

    ckpt = load_checkpoint(path)
    evaluator = ToyEvaluator(
        motion_width=ckpt.extra["motion_width"],
        embed_dim=ckpt.extra["embed_dim"],
        token_dim=ckpt.extra["token_dim"],
    )
    evaluator.load_state_dict(ckpt.model_state)
    evaluator.eval()
    return evaluator


def train_toy_evaluator(
    dataset: list[tuple[DualMotion, str]],
    seed: int = 0,
    steps: int = 500,
    batch_size: int = 32,
    embed_dim: int = 32,
    lr: float = 1e-3,
    temperature: float = 0.5,
) -> ToyEvaluator:
    """Train the contrastive encoder pair on (motion, prompt) samples."""
    if not dataset:
        raise ValueError("dataset must be non-empty")
    torch.manual_seed(seed)
    width = dataset[0][0].person1.feature_width
    evaluator = ToyEvaluator(width, embed_dim)
    motion_feats = torch.stack([evaluator.motion_features(m) for m, _ in dataset])
    texts = [prompt for _, prompt in dataset]

    opt = torch.optim.Adam(evaluator.parameters(), lr=lr)
    gen = torch.Generator().manual_seed(seed)
    n = len(dataset)
    for _ in range(steps):
        idx = torch.randint(0, n, (min(batch_size, n),), generator=gen)
        m_emb = evaluator.motion_encoder(motion_feats[idx])
        t_emb = evaluator.text_encoder([texts[int(i)] for i in idx])
        logits = -torch.cdist(m_emb, t_emb) ** 2 / temperature
        target = torch.arange(logits.shape[0])
        loss = 0.5 * (
            nn.functional.cross_entropy(logits, target)
            + nn.functional.cross_entropy(logits.T, target)
        )
        opt.zero_grad()
        loss.backward()
        opt.step()
    evaluator.eval()
    return evaluator
