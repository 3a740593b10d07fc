"""End-to-end flows shared by the CLI and the test harness:
prompt -> decomposition -> encoding -> guided sampling -> motion files,
plus the metric report and the distance-profile inspection dump.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import torch

from .config import RunConfig
from .denoiser import DualMotionModel
from .diffusion import make_schedule, sample
from .evaluator import ToyEvaluator
from .interaction import DistanceProfile, gt_distance_profile, predict_distance
from .metrics import (
    diversity,
    fid,
    mm_dist,
    mpjie,
    mpjpe,
    multimodality,
    retrieval_precision,
)
from .motion import DualMotion, MotionSequence, feature_dim, segment_bounds
from .text import PromptRecord, decompose_prompt

POSITION_METRICS = ("mpjpe", "mpjie")
EMBEDDING_METRICS = ("fid", "mm_dist", "diversity", "multimodality", "r_precision")
ALL_METRICS = POSITION_METRICS + EMBEDDING_METRICS


def _sample_features(
    model: DualMotionModel,
    config: RunConfig,
    records: list[PromptRecord],
    seed: int,
    unconditional: bool = False,
    num_steps: int | None = None,
) -> tuple[torch.Tensor, torch.Tensor]:
    """Guided sampling for a batch of prompts; returns denormalized features."""
    batch = len(records)
    shape = (batch, config.data.frame_count, feature_dim(config.data.joint_count))
    schedule = make_schedule(
        config.diffusion.timesteps, config.diffusion.beta_start, config.diffusion.beta_end
    )
    steps = config.diffusion.sample_steps if num_steps is None else num_steps
    null_cond = model.null_condition(batch)

    with torch.no_grad():
        if unconditional:
            cond = null_cond
            scale = 1.0
            uncond_fn = None
        else:
            cond = model.encode_conditions(records)
            scale = config.diffusion.guidance_scale
            uncond_fn = lambda x1, x2, t: model.denoiser(x1, x2, t, null_cond)[:2]
        cond_fn = lambda x1, x2, t: model.denoiser(x1, x2, t, cond)[:2]
        x1, x2 = sample(
            cond_fn,
            shape,
            schedule,
            guidance_scale=scale,
            uncond_denoiser=uncond_fn,
            seed=seed,
            num_steps=steps,
        )
        return model.denormalize(x1), model.denormalize(x2)


def generate_motions(
    model: DualMotionModel,
    config: RunConfig,
    prompt: str,
    count: int,
    seed: int,
    cache: dict[str, tuple[str, str]] | None = None,
) -> tuple[list[DualMotion], PromptRecord, DistanceProfile]:
    """Sample ``count`` motions for one prompt."""
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    record = decompose_prompt(prompt, cache)
    x1, x2 = _sample_features(model, config, [record] * count, seed)
    joints = config.data.joint_count
    fps = config.data.fps
    motions = [
        DualMotion(
            MotionSequence(x1[i].numpy(), joints, fps),
            MotionSequence(x2[i].numpy(), joints, fps),
            id=f"gen-{i:04d}",
        )
        for i in range(count)
    ]
    with torch.no_grad():
        overall = model.encoder.encode(record.overall)
        profile = predict_distance(overall, model.denoiser.stage2.predictor)
    return motions, record, profile


def write_generation(
    out_dir: str | Path,
    motions: list[DualMotion],
    record: PromptRecord,
    profile: DistanceProfile,
    seed: int,
    fingerprint: str,
) -> Path:
    """Write sampled motions plus the decomposition/profile sidecar."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    from .dataio import save_dataset

    save_dataset(out / "motions.dmot", [(m, record.overall) for m in motions])
    info = {
        "prompt": record.overall,
        "person1": record.person1,
        "person2": record.person2,
        "source": record.source,
        "predicted_profile": [float(w) for w in profile.weights],
        "seed": seed,
        "fingerprint": fingerprint,
        "count": len(motions),
    }
    (out / "generation.json").write_text(
        json.dumps(info, indent=2, sort_keys=True), encoding="utf-8"
    )
    return out


def evaluate_model(
    model: DualMotionModel,
    config: RunConfig,
    dataset: list[tuple[DualMotion, str]],
    metric_names: list[str],
    evaluator: ToyEvaluator | None = None,
    seed: int = 0,
    limit: int | None = None,
    unconditional: bool = False,
    pool_size: int = 32,
    mm_prompts: int = 8,
    mm_repeats: int = 4,
    chunk: int = 64,
    generated: list[DualMotion] | None = None,
) -> dict:
    """Generate per-sample motions and score them against the dataset.

    ``generated`` bypasses sampling (used to score ground truth against
    itself and in tests).
    """
    unknown = set(metric_names) - set(ALL_METRICS)
    if unknown:
        raise ValueError(f"unknown metric(s): {sorted(unknown)}")
    wants_embedding = [m for m in metric_names if m in EMBEDDING_METRICS]
    if wants_embedding and evaluator is None:
        raise ValueError(
            f"metrics {wants_embedding} need a trained toy evaluator; "
            "train one or drop the embedding metrics"
        )
    subset = dataset[:limit] if limit is not None else list(dataset)
    if not subset:
        raise ValueError("dataset must be non-empty")
    records = [decompose_prompt(p) for _, p in subset]

    if generated is None:
        generated = []
        for start in range(0, len(subset), chunk):
            recs = records[start : start + chunk]
            x1, x2 = _sample_features(
                model, config, recs, seed=seed + start, unconditional=unconditional
            )
            for i in range(len(recs)):
                generated.append(
                    DualMotion(
                        MotionSequence(x1[i].numpy(), config.data.joint_count, config.data.fps),
                        MotionSequence(x2[i].numpy(), config.data.joint_count, config.data.fps),
                        id=subset[start + i][0].id,
                    )
                )
    elif len(generated) != len(subset):
        raise ValueError("generated motions must pair up with the dataset")

    metrics: dict[str, float] = {}
    if "mpjpe" in metric_names:
        metrics["mpjpe_p1"] = float(
            np.mean(
                [mpjpe(g.person1.positions(), m.person1.positions())
                 for g, (m, _) in zip(generated, subset)]
            )
        )
        metrics["mpjpe_p2"] = float(
            np.mean(
                [mpjpe(g.person2.positions(), m.person2.positions())
                 for g, (m, _) in zip(generated, subset)]
            )
        )
    if "mpjie" in metric_names:
        metrics["mpjie"] = float(
            np.mean([mpjie(g.person1.positions(), g.person2.positions()) for g in generated])
        )
        metrics["mpjie_reference"] = float(
            np.mean(
                [mpjie(m.person1.positions(), m.person2.positions()) for m, _ in subset]
            )
        )
    if wants_embedding:
        gen_emb = evaluator.embed_motions(generated)
        gt_emb = evaluator.embed_motions([m for m, _ in subset])
        text_emb = evaluator.embed_texts([p for _, p in subset])
        if "fid" in metric_names:
            metrics["fid"] = fid(gen_emb, gt_emb)
        if "mm_dist" in metric_names:
            metrics["mm_dist"] = mm_dist(gen_emb, text_emb)
        if "diversity" in metric_names:
            metrics["diversity"] = diversity(gen_emb, seed=seed)
        if "r_precision" in metric_names:
            for k in (1, 2, 3):
                metrics[f"r_precision_top{k}"] = retrieval_precision(
                    gen_emb, text_emb, top_k=k, pool_size=pool_size, seed=seed
                )
        if "multimodality" in metric_names:
            groups = []
            for i in range(min(mm_prompts, len(subset))):
                x1, x2 = _sample_features(
                    model,
                    config,
                    [records[i]] * mm_repeats,
                    seed=seed + 7919 * (i + 1),
                    unconditional=unconditional,
                )
                group = [
                    DualMotion(
                        MotionSequence(x1[j].numpy(), config.data.joint_count, config.data.fps),
                        MotionSequence(x2[j].numpy(), config.data.joint_count, config.data.fps),
                        id=f"mm-{i}-{j}",
                    )
                    for j in range(mm_repeats)
                ]
                groups.append(evaluator.embed_motions(group))
            metrics["multimodality"] = multimodality(groups, seed=seed)
    return {
        "metrics": metrics,
        "fingerprint": config.fingerprint(),
        "seed": seed,
        "samples": len(subset),
        "sample_steps": config.diffusion.sample_steps,
        "unconditional": unconditional,
    }


def write_report(out_base: str | Path, report: dict) -> tuple[Path, Path]:
    """Emit the machine-readable JSON and the delimited text report."""
    base = Path(out_base)
    json_path = base.with_suffix(".json")
    tsv_path = base.with_suffix(".tsv")
    json_path.write_text(json.dumps(report, indent=2, sort_keys=True), encoding="utf-8")
    lines = [f"fingerprint\t{report['fingerprint']}\n", f"seed\t{report['seed']}\n"]
    lines += [f"samples\t{report['samples']}\n"]
    for key in sorted(report["metrics"]):
        lines.append(f"{key}\t{report['metrics'][key]:.9g}\n")
    tsv_path.write_text("".join(lines), encoding="utf-8")
    return json_path, tsv_path


def read_report(json_path: str | Path) -> dict:
    return json.loads(Path(json_path).read_text(encoding="utf-8"))


def distance_inspection(
    dataset: list[tuple[DualMotion, str]],
    segment_count: int,
    model: DualMotionModel | None = None,
) -> list[dict]:
    """Per-sample ground-truth (and optionally predicted) distance profiles."""
    rows = []
    for motion, prompt in dataset:
        layout = segment_bounds(motion.frame_count, segment_count)
        gt = gt_distance_profile(motion, layout)
        row = {
            "id": motion.id,
            "prompt": prompt,
            "gt_profile": [float(w) for w in gt.weights],
        }
        if model is not None:
            with torch.no_grad():
                words = model.encoder.encode(prompt)
                pre = predict_distance(words, model.denoiser.stage2.predictor)
            row["predicted_profile"] = [float(w) for w in pre.weights]
        rows.append(row)
    return rows


def write_inspection(path: str | Path, rows: list[dict]) -> None:
    lines = []
    for row in rows:
        fields = [row["id"]]
        fields.append(",".join(f"{w:.6f}" for w in row["gt_profile"]))
        if "predicted_profile" in row:
            fields.append(",".join(f"{w:.6f}" for w in row["predicted_profile"]))
        lines.append("\t".join(fields) + "\n")
    Path(path).write_text("".join(lines), encoding="utf-8")
