"""Synthetic two-person motion scenarios with scripted interaction distance.

Each scenario produces a smooth dual motion whose inter-person root distance
follows a known curve (approach: decreasing; mirror/orbit: constant;
push-retreat: decrease then increase) plus a templated prompt. Everything is
driven by a single integer seed, so identical calls are bit-identical.
"""
from __future__ import annotations

import numpy as np

from .motion import (
    CONTACT_FLAGS,
    DualMotion,
    MotionSequence,
    feature_dim,
)

SCENARIOS = ("approach", "mirror", "orbit", "push-retreat")

FOOT_CONTACT_HEIGHT = 0.05

# Prompt templates, keyed by motion scenario. Each maps onto one of the
# three prompt-decomposition shapes handled by the rule engine: plural
# subject, paired "one ... the other" markers, or a first-person-only
# description.
_PROMPTS = {
    "approach": (
        "one person walks toward the other, the other person waits in place.",
        "one person approaches from afar, the other person stands still.",
        "one person strides up close, the other person holds position.",
    ),
    "mirror": (
        "these two raise their arms side by side.",
        "these two bounce together in step.",
        "these two sway side by side in sync.",
    ),
    "orbit": (
        "these two circle one another slowly.",
        "these two walk in a ring around a shared point.",
        "these two revolve around each other.",
    ),
    "push-retreat": (
        "the first person pushes the second away while facing the second.",
        "the first person presses in close and then backs away from the second.",
        "the first person lunges at the second before retreating.",
    ),
}


def _smoothstep(u: np.ndarray) -> np.ndarray:
    u = np.clip(u, 0.0, 1.0)
    return u * u * (3.0 - 2.0 * u)


def _yaw_to_6d(yaw: np.ndarray) -> np.ndarray:
    """First two columns of a Z-axis rotation by ``yaw``, shape (..., 6)."""
    c, s = np.cos(yaw), np.sin(yaw)
    zero = np.zeros_like(c)
    # column-major: [r00, r10, r20, r01, r11, r21]
    return np.stack([c, s, zero, -s, c, zero], axis=-1)


def _limb_layout(joint_count: int) -> tuple[list[int], list[int]]:
    """Split non-root joints into upper-body joints and (up to two) feet."""
    if joint_count >= 3:
        feet = [joint_count - 2, joint_count - 1]
        upper = list(range(1, joint_count - 2))
    else:
        feet = []
        upper = list(range(1, joint_count))
    return upper, feet


def _person_positions(
    root_xy: np.ndarray,
    yaw: np.ndarray,
    joint_count: int,
    phase: np.ndarray,
    style: str,
    rng: np.random.Generator,
    root_height: float,
    reach: np.ndarray | None = None,
) -> np.ndarray:
    """Joint positions (S, N_j, 3) for one person.

    ``style`` selects the limb pattern: "walk" (stepping gait), "stand"
    (planted feet, light sway), "wave" (arm raises in place), "push"
    (arms extend forward by ``reach``).
    """
    S = root_xy.shape[0]
    pos = np.zeros((S, joint_count, 3))
    bob = 0.02 * np.sin(2.0 * phase) if style == "walk" else 0.015 * np.sin(phase)
    pos[:, 0, 0] = root_xy[:, 0]
    pos[:, 0, 1] = root_xy[:, 1]
    pos[:, 0, 2] = root_height + bob

    fwd = np.stack([np.cos(yaw), np.sin(yaw)], axis=-1)
    side = np.stack([-np.sin(yaw), np.cos(yaw)], axis=-1)
    upper, feet = _limb_layout(joint_count)

    for n, j in enumerate(upper):
        lateral = 0.25 * (1.0 if n % 2 == 0 else -1.0) * (1.0 + 0.2 * n)
        height = 1.15 + 0.05 * n
        swing = np.zeros(S)
        lift = np.zeros(S)
        forward = np.zeros(S)
        if style == "walk":
            swing = 0.18 * np.sin(phase + (0.0 if n % 2 == 0 else np.pi))
        elif style == "wave":
            lift = 0.25 * (0.5 + 0.5 * np.sin(phase + 0.4 * n))
        elif style == "push":
            assert reach is not None
            forward = reach * (0.9 - 0.1 * n)
        elif style == "stand":
            swing = 0.02 * np.sin(0.5 * phase + n)
        pos[:, j, 0] = root_xy[:, 0] + lateral * side[:, 0] + (swing + forward) * fwd[:, 0]
        pos[:, j, 1] = root_xy[:, 1] + lateral * side[:, 1] + (swing + forward) * fwd[:, 1]
        pos[:, j, 2] = height + lift

    for n, j in enumerate(feet):
        lateral = 0.1 * (1.0 if n == 0 else -1.0)
        if style == "walk":
            leg_phase = phase + (0.0 if n == 0 else np.pi)
            stride = 0.22 * np.sin(leg_phase)
            height = 0.12 * np.maximum(0.0, np.sin(leg_phase)) ** 2
        else:
            stride = np.zeros(S)
            height = np.full(S, 0.01 + 0.005 * n)
        pos[:, j, 0] = root_xy[:, 0] + lateral * side[:, 0] + stride * fwd[:, 0]
        pos[:, j, 1] = root_xy[:, 1] + lateral * side[:, 1] + stride * fwd[:, 1]
        pos[:, j, 2] = height
    return pos


def _features_from_positions(
    pos: np.ndarray, yaw: np.ndarray, joint_count: int, fps: float
) -> np.ndarray:
    """Assemble the (S, D) frame matrix from positions and facing yaw."""
    S = pos.shape[0]
    vel = np.zeros_like(pos)
    vel[1:] = pos[1:] - pos[:-1]
    rot = np.broadcast_to(_yaw_to_6d(yaw)[:, None, :], (S, joint_count, 6))
    _, feet = _limb_layout(joint_count)
    contacts = np.zeros((S, CONTACT_FLAGS))
    # two flags per designated foot joint (heel/toe collapsed at this scale)
    for n, j in enumerate(feet):
        flag = (pos[:, j, 2] < FOOT_CONTACT_HEIGHT).astype(np.float64)
        contacts[:, 2 * n] = flag
        contacts[:, 2 * n + 1] = flag
    feats = np.concatenate(
        [
            pos.reshape(S, -1),
            vel.reshape(S, -1),
            rot.reshape(S, -1),
            contacts,
        ],
        axis=1,
    )
    assert feats.shape[1] == feature_dim(joint_count)
    return feats.astype(np.float32)


def synth_generate(
    scenario: str,
    frame_count: int = 60,
    joint_count: int = 5,
    seed: int = 0,
    fps: float = 20.0,
) -> tuple[DualMotion, str]:
    """Generate one dual-motion sample plus its overall prompt."""
    if scenario not in SCENARIOS:
        raise ValueError(f"unknown scenario {scenario!r}; expected one of {SCENARIOS}")
    if frame_count < 2:
        raise ValueError(f"frame_count must be >= 2, got {frame_count}")
    rng = np.random.default_rng(seed)
    prompt = _PROMPTS[scenario][int(rng.integers(len(_PROMPTS[scenario])))]

    S = frame_count
    u = np.arange(S, dtype=np.float64) / (S - 1)
    t_sec = np.arange(S, dtype=np.float64) / fps
    step_hz = rng.uniform(1.4, 1.8)
    phase = 2.0 * np.pi * step_hz * t_sec + rng.uniform(0.0, 2.0 * np.pi)
    root_h1 = rng.uniform(0.92, 0.98)
    root_h2 = rng.uniform(0.92, 0.98)

    if scenario == "approach":
        d0 = rng.uniform(3.0, 4.0)
        d1 = rng.uniform(0.6, 0.9)
        gap = d1 + (d0 - d1) * (1.0 - _smoothstep(u))
        sway = 0.05 * np.sin(0.7 * phase)
        r2 = np.stack([np.full(S, d0 / 2), sway], axis=-1)
        r1 = np.stack([d0 / 2 - gap, sway], axis=-1)
        yaw1 = np.zeros(S)
        yaw2 = np.full(S, np.pi)
        p1 = _person_positions(r1, yaw1, joint_count, phase, "walk", rng, root_h1)
        p2 = _person_positions(r2, yaw2, joint_count, phase, "stand", rng, root_h2)
    elif scenario == "mirror":
        offset = rng.uniform(1.0, 1.5)
        sway = 0.15 * np.sin(0.5 * phase)
        base = np.stack([sway, 0.1 * np.sin(0.25 * phase)], axis=-1)
        yaw1 = np.zeros(S)
        yaw2 = np.zeros(S)
        p1 = _person_positions(base, yaw1, joint_count, phase, "wave", rng, root_h1)
        # person 2 repeats person 1 exactly, displaced laterally, so every
        # paired joint (and the root in particular) keeps constant distance
        p2 = p1.copy()
        p2[:, :, 1] += offset
    elif scenario == "orbit":
        radius = rng.uniform(0.8, 1.2)
        theta = rng.uniform(0.0, 2 * np.pi) + rng.uniform(0.8, 1.2) * np.pi * _smoothstep(u)
        ring = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
        r1 = radius * ring
        r2 = -radius * ring
        yaw1 = theta + np.pi / 2
        yaw2 = theta - np.pi / 2
        p1 = _person_positions(r1, yaw1, joint_count, phase, "walk", rng, root_h1)
        p2 = _person_positions(r2, yaw2, joint_count, phase, "walk", rng, root_h2)
    else:  # push-retreat
        d0 = rng.uniform(2.5, 3.5)
        d_min = rng.uniform(0.6, 0.8)
        d_end = rng.uniform(2.0, 3.0)
        u_mid = 0.5
        closing = _smoothstep(u / u_mid)
        opening = _smoothstep((u - u_mid) / (1.0 - u_mid))
        gap = d0 + (d_min - d0) * closing + (d_end - d_min) * opening
        r2 = np.stack([np.full(S, d0 / 2), np.zeros(S)], axis=-1)
        r1 = np.stack([d0 / 2 - gap, np.zeros(S)], axis=-1)
        yaw1 = np.zeros(S)
        yaw2 = np.full(S, np.pi)
        reach = 0.35 * np.maximum(0.0, 1.0 - np.abs(u - u_mid) / 0.25) ** 2
        p1 = _person_positions(r1, yaw1, joint_count, phase, "push", rng, root_h1, reach=reach)
        p2 = _person_positions(r2, yaw2, joint_count, phase, "stand", rng, root_h2)

    m1 = MotionSequence(_features_from_positions(p1, yaw1, joint_count, fps), joint_count, fps)
    m2 = MotionSequence(_features_from_positions(p2, yaw2, joint_count, fps), joint_count, fps)
    sample = DualMotion(m1, m2, id=f"{scenario}-{seed}")
    return sample, prompt


def generate_corpus(
    count: int,
    frame_count: int = 60,
    joint_count: int = 5,
    seed: int = 0,
    scenario: str = "mixed",
    fps: float = 20.0,
) -> list[tuple[DualMotion, str]]:
    """Generate ``count`` samples, cycling scenarios when ``scenario="mixed"``."""
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    if scenario != "mixed" and scenario not in SCENARIOS:
        raise ValueError(f"unknown scenario {scenario!r}")
    samples = []
    for i in range(count):
        sc = SCENARIOS[i % len(SCENARIOS)] if scenario == "mixed" else scenario
        sub_seed = int(np.random.SeedSequence((seed, i)).generate_state(1)[0])
        motion, prompt = synth_generate(sc, frame_count, joint_count, sub_seed, fps)
        motion.id = f"{sc}-{i:05d}"
        samples.append((motion, prompt))
    return samples
