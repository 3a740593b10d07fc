"""Pose and motion containers for two-person sequences.

A pose frame packs, in order: global joint positions (3 per joint, meters),
per-frame joint velocities (3 per joint), a 6-value rotation encoding per
joint, and 4 binary foot-contact flags. All arrays are float32 so that
the on-disk format round-trips bit-exactly.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

CONTACT_FLAGS = 4
DEFAULT_JOINT_COUNT = 5
DEFAULT_FRAME_COUNT = 60
DEFAULT_FPS = 20.0


def feature_dim(joint_count: int) -> int:
    """Per-frame feature width: positions + velocities + 6D rotations + contacts."""
    if joint_count < 1:
        raise ValueError(f"joint_count must be >= 1, got {joint_count}")
    return 12 * joint_count + CONTACT_FLAGS


@dataclass(frozen=True)
class SegmentLayout:
    """K contiguous half-open frame intervals covering [0, S)."""

    bounds: tuple[tuple[int, int], ...]

    @property
    def segment_count(self) -> int:
        return len(self.bounds)

    @property
    def frame_count(self) -> int:
        return self.bounds[-1][1]

    def segment_of(self, frame: int) -> int:
        for k, (lo, hi) in enumerate(self.bounds):
            if lo <= frame < hi:
                return k
        raise ValueError(f"frame {frame} outside [0, {self.frame_count})")

    def frame_coefficients(self, per_segment: np.ndarray) -> np.ndarray:
        """Expand one value per segment into one value per frame."""
        per_segment = np.asarray(per_segment)
        if per_segment.shape[-1] != self.segment_count:
            raise ValueError(
                f"expected {self.segment_count} segment values, got {per_segment.shape[-1]}"
            )
        out = np.empty(per_segment.shape[:-1] + (self.frame_count,), dtype=per_segment.dtype)
        for k, (lo, hi) in enumerate(self.bounds):
            out[..., lo:hi] = per_segment[..., k : k + 1]
        return out


def segment_bounds(frame_count: int, segment_count: int) -> SegmentLayout:
    """Partition [0, S) into K contiguous intervals with floor boundaries.

    Segment i (1-based) spans [floor((i-1)*S/K), floor(i*S/K)); the last
    segment absorbs any remainder.
    """
    if segment_count < 1:
        raise ValueError(f"segment_count must be >= 1, got {segment_count}")
    if segment_count > frame_count:
        raise ValueError(
            f"segment_count {segment_count} exceeds frame_count {frame_count}"
        )
    edges = [(i * frame_count) // segment_count for i in range(segment_count + 1)]
    return SegmentLayout(tuple((edges[i], edges[i + 1]) for i in range(segment_count)))


@dataclass
class MotionSequence:
    """One person's motion: an (S, D) float32 frame matrix with D = 12*N_j + 4."""

    frames: np.ndarray
    joint_count: int
    fps: float = DEFAULT_FPS

    def __post_init__(self):
        self.frames = np.ascontiguousarray(self.frames, dtype=np.float32)
        if self.frames.ndim != 2 or self.frames.shape[0] < 1:
            raise ValueError(f"frames must be a non-empty 2-D array, got shape {self.frames.shape}")
        expected = feature_dim(self.joint_count)
        if self.frames.shape[1] != expected:
            raise ValueError(
                f"frame width {self.frames.shape[1]} does not match "
                f"feature_dim({self.joint_count}) = {expected}"
            )

    @property
    def frame_count(self) -> int:
        return self.frames.shape[0]

    @property
    def feature_width(self) -> int:
        return self.frames.shape[1]

    def positions(self) -> np.ndarray:
        """Global joint positions, shape (S, N_j, 3)."""
        n = 3 * self.joint_count
        return self.frames[:, :n].reshape(self.frame_count, self.joint_count, 3)

    def velocities(self) -> np.ndarray:
        n = 3 * self.joint_count
        return self.frames[:, n : 2 * n].reshape(self.frame_count, self.joint_count, 3)

    def rotations_6d(self) -> np.ndarray:
        n = 3 * self.joint_count
        return self.frames[:, 2 * n : 2 * n + 6 * self.joint_count].reshape(
            self.frame_count, self.joint_count, 6
        )

    def foot_contacts(self) -> np.ndarray:
        return self.frames[:, -CONTACT_FLAGS:]


@dataclass
class DualMotion:
    """A paired two-person motion sample."""

    person1: MotionSequence
    person2: MotionSequence
    id: str = field(default="")

    def __post_init__(self):
        a, b = self.person1, self.person2
        if a.frame_count != b.frame_count:
            raise ValueError(f"frame counts differ: {a.frame_count} vs {b.frame_count}")
        if a.joint_count != b.joint_count:
            raise ValueError(f"joint counts differ: {a.joint_count} vs {b.joint_count}")
        if a.fps != b.fps:
            raise ValueError(f"fps differ: {a.fps} vs {b.fps}")

    @property
    def frame_count(self) -> int:
        return self.person1.frame_count

    @property
    def joint_count(self) -> int:
        return self.person1.joint_count

    @property
    def fps(self) -> float:
        return self.person1.fps

    def root_distance(self) -> np.ndarray:
        """Per-frame Euclidean distance between the two root joints."""
        p1 = self.person1.positions()[:, 0, :]
        p2 = self.person2.positions()[:, 0, :]
        return np.linalg.norm(p1 - p2, axis=-1)


def orthonormalize_6d(rot6d: np.ndarray) -> np.ndarray:
    """Recover full rotation matrices from 6-value encodings via Gram-Schmidt.

    Input (..., 6) holds the first two columns of a rotation matrix; the
    third column is their cross product.
    """
    rot6d = np.asarray(rot6d, dtype=np.float64)
    a = rot6d[..., 0:3]
    b = rot6d[..., 3:6]
    with np.errstate(invalid="ignore", divide="ignore"):
        c1 = a / np.linalg.norm(a, axis=-1, keepdims=True)
        b_proj = b - np.sum(c1 * b, axis=-1, keepdims=True) * c1
        c2 = b_proj / np.linalg.norm(b_proj, axis=-1, keepdims=True)
    c3 = np.cross(c1, c2)
    # degenerate inputs surface as NaN columns and fail the det check downstream
    return np.stack([c1, c2, c3], axis=-1)


def check_pose_invariants(motion: MotionSequence, atol: float = 1e-5) -> None:
    """Validate frame-level invariants of ground-truth data.

    Raises ValueError on non-binary contact flags or 6D rotation blocks that
    do not orthonormalize to a proper rotation (det +1 within ``atol``).
    """
    contacts = motion.foot_contacts()
    if not np.all((contacts == 0.0) | (contacts == 1.0)):
        raise ValueError("foot contact flags must be binary")
    rots = orthonormalize_6d(motion.rotations_6d())
    if not np.all(np.isfinite(rots)):
        raise ValueError("6D rotations are degenerate (zero or parallel columns)")
    dets = np.linalg.det(rots)
    if not np.allclose(dets, 1.0, atol=atol):
        worst = float(np.max(np.abs(dets - 1.0)))
        raise ValueError(f"6D rotations do not recover proper rotations (|det-1| up to {worst:.2e})")
