"""Binary checkpoint format.

Layout: magic, version, a length-prefixed JSON header (config fingerprint,
step count, tensor manifest with names/shapes/dtypes, optimizer scalars),
then the raw little-endian tensor payloads in manifest order. The byte
stream is a pure function of the stored state, so identical training runs
produce identical files.
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from .errors import FormatError

MAGIC = b"DMCK"
VERSION = 1

_DTYPES = {
    "float32": "<f4",
    "float64": "<f8",
    "int64": "<i8",
    "int32": "<i4",
    "bool": "|b1",
}
_TORCH_DTYPES = {
    "float32": torch.float32,
    "float64": torch.float64,
    "int64": torch.int64,
    "int32": torch.int32,
    "bool": torch.bool,
}


@dataclass
class Checkpoint:
    fingerprint: str
    step: int
    model_state: dict[str, torch.Tensor]
    optimizer_state: dict | None = None
    extra: dict = field(default_factory=dict)


def _manifest_and_payload(tensors: dict[str, torch.Tensor]):
    manifest = []
    payload = []
    for name in sorted(tensors):
        t = tensors[name].detach().cpu().contiguous()
        dtype = str(t.dtype).removeprefix("torch.")
        if dtype not in _DTYPES:
            raise ValueError(f"unsupported tensor dtype {dtype} for {name!r}")
        manifest.append({"name": name, "shape": list(t.shape), "dtype": dtype})
        payload.append(t.numpy().astype(_DTYPES[dtype]).tobytes())
    return manifest, payload


def _flatten_optimizer(state: dict) -> tuple[dict[str, torch.Tensor], dict]:
    tensors: dict[str, torch.Tensor] = {}
    scalars: dict[str, object] = {}
    for pid, entry in state.get("state", {}).items():
        for key, value in entry.items():
            tag = f"{pid}.{key}"
            if torch.is_tensor(value):
                tensors[tag] = value
            else:
                scalars[tag] = value
    meta = {"param_groups": state.get("param_groups", []), "scalars": scalars}
    return tensors, meta


def _rebuild_optimizer(tensors: dict[str, torch.Tensor], meta: dict) -> dict:
    state: dict[int, dict] = {}

    def put(tag: str, value):
        pid_s, _, key = tag.partition(".")
        state.setdefault(int(pid_s), {})[key] = value

    for tag, tensor in tensors.items():
        put(tag, tensor)
    for tag, value in meta.get("scalars", {}).items():
        put(tag, value)
    return {"state": state, "param_groups": meta.get("param_groups", [])}


def save_checkpoint(
    path: str | Path,
    model_state: dict[str, torch.Tensor],
    fingerprint: str,
    step: int,
    optimizer_state: dict | None = None,
    extra: dict | None = None,
) -> None:
    model_manifest, payload = _manifest_and_payload(model_state)
    header = {
        "fingerprint": fingerprint,
        "step": step,
        "tensors": model_manifest,
        "extra": extra or {},
    }
    if optimizer_state is not None:
        opt_tensors, opt_meta = _flatten_optimizer(optimizer_state)
        opt_manifest, opt_payload = _manifest_and_payload(opt_tensors)
        header["optimizer"] = {"tensors": opt_manifest, "meta": opt_meta}
        payload += opt_payload
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    out = [MAGIC, struct.pack("<II", VERSION, len(blob)), blob] + payload
    Path(path).write_bytes(b"".join(out))


def _read_tensors(data: bytes, offset: int, manifest: list[dict]):
    tensors: dict[str, torch.Tensor] = {}
    for entry in manifest:
        dtype = entry["dtype"]
        if dtype not in _DTYPES:
            raise FormatError(f"unknown dtype {dtype!r} in manifest", offset=offset)
        count = int(np.prod(entry["shape"], dtype=np.int64)) if entry["shape"] else 1
        nbytes = count * np.dtype(_DTYPES[dtype]).itemsize
        if offset + nbytes > len(data):
            raise FormatError(
                f"truncated payload for tensor {entry['name']!r}", offset=offset
            )
        arr = np.frombuffer(data[offset : offset + nbytes], dtype=_DTYPES[dtype])
        tensor = torch.as_tensor(arr.copy()).to(_TORCH_DTYPES[dtype])
        tensors[entry["name"]] = tensor.reshape(entry["shape"])
        offset += nbytes
    return tensors, offset


def load_checkpoint(path: str | Path) -> Checkpoint:
    data = Path(path).read_bytes()
    if len(data) < 12 or data[:4] != MAGIC:
        raise FormatError("not a checkpoint file (bad magic)", offset=0)
    version, header_len = struct.unpack("<II", data[4:12])
    if version != VERSION:
        raise FormatError(f"unsupported checkpoint version {version}", offset=4)
    if 12 + header_len > len(data):
        raise FormatError("truncated header", offset=12)
    try:
        header = json.loads(data[12 : 12 + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"bad header JSON: {exc}", offset=12) from exc

    offset = 12 + header_len
    model_state, offset = _read_tensors(data, offset, header["tensors"])
    optimizer_state = None
    if "optimizer" in header:
        opt_tensors, offset = _read_tensors(data, offset, header["optimizer"]["tensors"])
        optimizer_state = _rebuild_optimizer(opt_tensors, header["optimizer"]["meta"])
    if offset != len(data):
        raise FormatError(f"{len(data) - offset} trailing bytes", offset=offset)
    return Checkpoint(
        fingerprint=header["fingerprint"],
        step=header["step"],
        model_state=model_state,
        optimizer_state=optimizer_state,
        extra=header.get("extra", {}),
    )
