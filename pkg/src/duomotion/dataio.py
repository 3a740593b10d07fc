"""On-disk dataset format.

Motion payload: a fixed binary header (magic, version, sample count) and,
per sample, an id plus joint/frame/fps/person-count fields followed by
little-endian float32 frames in frame-major order. Prompts live in a UTF-8
tab-separated sidecar (``<path>.prompts``), one ``id TAB prompt`` line per
sample, LF-terminated. Both files round-trip bit-exactly.
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import FormatError
from .motion import DualMotion, MotionSequence, feature_dim

MAGIC = b"DUOM"
VERSION = 1
PERSONS = 2


def sidecar_path(path: str | Path) -> Path:
    return Path(str(path) + ".prompts")


def save_dataset(path: str | Path, samples: list[tuple[DualMotion, str]]) -> None:
    """Write motions to ``path`` and prompts to the sidecar next to it."""
    path = Path(path)
    chunks = [MAGIC, struct.pack("<II", VERSION, len(samples))]
    lines = []
    for motion, prompt in samples:
        if "\t" in prompt or "\n" in prompt:
            raise ValueError(f"prompt for sample {motion.id!r} contains tab or newline")
        id_bytes = motion.id.encode("utf-8")
        chunks.append(struct.pack("<H", len(id_bytes)))
        chunks.append(id_bytes)
        chunks.append(
            struct.pack(
                "<IIfI",
                motion.joint_count,
                motion.frame_count,
                motion.fps,
                PERSONS,
            )
        )
        for person in (motion.person1, motion.person2):
            chunks.append(np.ascontiguousarray(person.frames, dtype="<f4").tobytes())
        lines.append(f"{motion.id}\t{prompt}\n")
    path.write_bytes(b"".join(chunks))
    sidecar_path(path).write_text("".join(lines), encoding="utf-8")


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.offset = 0

    def take(self, n: int, what: str) -> bytes:
        if self.offset + n > len(self.data):
            raise FormatError(f"truncated file while reading {what}", offset=self.offset)
        out = self.data[self.offset : self.offset + n]
        self.offset += n
        return out

    def unpack(self, fmt: str, what: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))


def load_dataset(path: str | Path) -> list[tuple[DualMotion, str]]:
    """Read a dataset written by :func:`save_dataset`."""
    path = Path(path)
    r = _Reader(path.read_bytes())
    if r.take(4, "magic") != MAGIC:
        raise FormatError("bad magic bytes", offset=0)
    version, count = r.unpack("<II", "header")
    if version != VERSION:
        raise FormatError(f"unsupported version {version}", offset=4)

    prompts: dict[str, str] = {}
    sc = sidecar_path(path)
    if sc.exists():
        for line in sc.read_text(encoding="utf-8").splitlines():
            if not line:
                continue
            key, _, value = line.partition("\t")
            prompts[key] = value

    samples = []
    for _ in range(count):
        (id_len,) = r.unpack("<H", "sample id length")
        sid = r.take(id_len, "sample id").decode("utf-8")
        header_offset = r.offset
        joint_count, frame_count, fps, persons = r.unpack("<IIfI", "sample header")
        if joint_count < 1:
            raise FormatError(f"sample {sid!r} has joint_count=0", offset=header_offset)
        if frame_count < 1:
            raise FormatError(f"sample {sid!r} has frame_count=0", offset=header_offset)
        if persons != PERSONS:
            raise FormatError(
                f"sample {sid!r} has person count {persons}, expected {PERSONS}",
                offset=header_offset,
            )
        width = feature_dim(joint_count)
        seqs = []
        for _p in range(persons):
            raw = r.take(4 * frame_count * width, f"frames of {sid!r}")
            frames = np.frombuffer(raw, dtype="<f4").reshape(frame_count, width)
            seqs.append(MotionSequence(frames.copy(), joint_count, fps))
        samples.append((DualMotion(seqs[0], seqs[1], id=sid), prompts.get(sid, "")))
    if r.offset != len(r.data):
        raise FormatError(
            f"{len(r.data) - r.offset} trailing bytes after last sample", offset=r.offset
        )
    return samples
