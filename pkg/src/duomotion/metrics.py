"""Evaluation metrics for dual-human motion.

Position-space metrics (mpjpe, mpjie) work directly on joint coordinates.
Distribution metrics (fid, mm_dist, diversity, multimodality, retrieval
precision) work on embedding sets from any motion/text embedder; at desk
scale those come from the toy contrastive evaluator, whose numbers are not
comparable to any published table.
"""
from __future__ import annotations

import numpy as np

from .errors import NumericError

_EIG_CLIP = -1e-8


def _as_positions(arr: np.ndarray, name: str) -> np.ndarray:
    arr = np.asarray(arr, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[-1] != 3:
        raise ValueError(f"{name} must have shape (T, N_j, 3), got {arr.shape}")
    return arr


def mpjpe(pre: np.ndarray, gt: np.ndarray) -> float:
    """Mean per-joint position error between generated and reference motion."""
    pre = _as_positions(pre, "pre")
    gt = _as_positions(gt, "gt")
    if pre.shape != gt.shape:
        raise ValueError(f"shape mismatch: {pre.shape} vs {gt.shape}")
    return float(np.linalg.norm(pre - gt, axis=-1).mean())


def mpjie(pre1: np.ndarray, pre2: np.ndarray) -> float:
    """Mean per-joint inter-person distance of a generated pair.

    Scored against a reference value computed from real data (closer is
    better), not minimized.
    """
    pre1 = _as_positions(pre1, "pre1")
    pre2 = _as_positions(pre2, "pre2")
    if pre1.shape != pre2.shape:
        raise ValueError(f"shape mismatch: {pre1.shape} vs {pre2.shape}")
    return float(np.linalg.norm(pre1 - pre2, axis=-1).mean())


def _psd_sqrt(mat: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh(mat)
    if np.any(vals < _EIG_CLIP):
        raise NumericError(f"covariance not PSD (min eigenvalue {vals.min():.3e})")
    vals = np.clip(vals, 0.0, None)
    return (vecs * np.sqrt(vals)) @ vecs.T


def _mean_cov(emb: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    emb = np.asarray(emb, dtype=np.float64)
    if emb.ndim != 2 or emb.shape[0] < 2:
        raise ValueError(f"need an (M>=2, E) embedding matrix, got {emb.shape}")
    mu = emb.mean(axis=0)
    cov = np.cov(emb, rowvar=False)
    cov = np.atleast_2d(cov)
    if emb.shape[0] <= emb.shape[1]:
        cov = cov + 1e-6 * np.eye(cov.shape[0])
    return mu, cov


def fid(a: np.ndarray, b: np.ndarray) -> float:
    """Frechet distance between Gaussian fits of two embedding sets."""
    mu_a, cov_a = _mean_cov(a)
    mu_b, cov_b = _mean_cov(b)
    if mu_a.shape != mu_b.shape:
        raise ValueError(f"embedding widths differ: {mu_a.shape} vs {mu_b.shape}")
    sqrt_a = _psd_sqrt(cov_a)
    inner = sqrt_a @ cov_b @ sqrt_a
    inner = (inner + inner.T) / 2.0  # symmetrize before eigendecomposition
    vals = np.linalg.eigvalsh(inner)
    if np.any(vals < _EIG_CLIP):
        raise NumericError(f"cross term not PSD (min eigenvalue {vals.min():.3e})")
    tr_sqrt = np.sqrt(np.clip(vals, 0.0, None)).sum()
    diff = mu_a - mu_b
    return float(diff @ diff + np.trace(cov_a) + np.trace(cov_b) - 2.0 * tr_sqrt)


def mm_dist(motion_emb: np.ndarray, text_emb: np.ndarray) -> float:
    """Mean Euclidean distance over index-paired motion/text embeddings."""
    motion_emb = np.asarray(motion_emb, dtype=np.float64)
    text_emb = np.asarray(text_emb, dtype=np.float64)
    if motion_emb.shape != text_emb.shape:
        raise ValueError(
            f"paired sets must match: {motion_emb.shape} vs {text_emb.shape}"
        )
    return float(np.linalg.norm(motion_emb - text_emb, axis=-1).mean())


def diversity(emb: np.ndarray, pair_count: int = 300, seed: int = 0) -> float:
    """Mean distance over random pairs of distinct samples."""
    emb = np.asarray(emb, dtype=np.float64)
    if emb.ndim != 2 or emb.shape[0] < 2:
        raise ValueError(f"need at least 2 embeddings, got shape {emb.shape}")
    rng = np.random.default_rng(seed)
    total = 0.0
    for _ in range(pair_count):
        i, j = rng.choice(emb.shape[0], size=2, replace=False)
        total += float(np.linalg.norm(emb[i] - emb[j]))
    return total / pair_count


def multimodality(
    per_prompt_embs: list[np.ndarray], pair_count: int = 100, seed: int = 0
) -> float:
    """Mean within-prompt pairwise distance, averaged over prompts."""
    if not per_prompt_embs:
        raise ValueError("need at least one prompt group")
    rng = np.random.default_rng(seed)
    means = []
    for group in per_prompt_embs:
        group = np.asarray(group, dtype=np.float64)
        if group.ndim != 2 or group.shape[0] < 2:
            raise ValueError("each prompt needs at least 2 generations")
        n = group.shape[0]
        all_pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
        if len(all_pairs) <= pair_count:
            pairs = all_pairs
        else:
            picks = rng.choice(len(all_pairs), size=pair_count, replace=False)
            pairs = [all_pairs[p] for p in picks]
        means.append(
            float(np.mean([np.linalg.norm(group[i] - group[j]) for i, j in pairs]))
        )
    return float(np.mean(means))


def retrieval_precision(
    motion_embs: np.ndarray,
    text_embs: np.ndarray,
    top_k: int,
    pool_size: int = 32,
    seed: int = 0,
) -> float:
    """Top-k text retrieval accuracy within shuffled pools.

    Pools of ``pool_size`` index-aligned pairs are drawn without
    replacement; a motion scores a hit when its own text is among its
    ``top_k`` nearest texts in the pool. Incomplete trailing pools are
    dropped.
    """
    motion_embs = np.asarray(motion_embs, dtype=np.float64)
    text_embs = np.asarray(text_embs, dtype=np.float64)
    if motion_embs.shape[0] != text_embs.shape[0]:
        raise ValueError("motion/text sets must pair up one-to-one")
    if not 1 <= top_k:
        raise ValueError(f"top_k must be >= 1, got {top_k}")
    m = motion_embs.shape[0]
    if pool_size > m:
        raise ValueError(f"pool_size {pool_size} exceeds dataset size {m}")
    rng = np.random.default_rng(seed)
    order = rng.permutation(m)
    hits = 0
    total = 0
    for start in range(0, m - pool_size + 1, pool_size):
        idx = order[start : start + pool_size]
        motions = motion_embs[idx]
        texts = text_embs[idx]
        dists = np.linalg.norm(motions[:, None, :] - texts[None, :, :], axis=-1)
        ranks = np.argsort(dists, axis=1)[:, :top_k]
        hits += int(np.sum(ranks == np.arange(pool_size)[:, None]))
        total += pool_size
    return hits / total
