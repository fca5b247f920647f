"""Checkpoint format: a directory holding `manifest.json` plus `params.bin`.

manifest.json records the config, step counter, free-form extras, and one
entry per tensor (name/shape/offset/crc32); params.bin is the tensors'
little-endian float32 data concatenated in manifest order. Round trips are
bit-exact and every tensor is checksum-verified on load.
"""

from __future__ import annotations

import json
import zlib
from collections import OrderedDict
from pathlib import Path

import numpy as np
import torch

from .networks import ModelBundle, NetConfig

MANIFEST_NAME = "manifest.json"
PARAMS_NAME = "params.bin"
FORMAT_VERSION = 1


class CheckpointError(Exception):
    """Missing, truncated or corrupted checkpoint data."""


def save_tensor_store(ckpt_dir: str | Path, config: dict, step: int,
                      tensors: "OrderedDict[str, np.ndarray]",
                      extra: dict | None = None) -> Path:
    ckpt_dir = Path(ckpt_dir)
    ckpt_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    blobs = []
    offset = 0
    for name, arr in tensors.items():
        a = np.ascontiguousarray(arr, dtype=np.float32)
        raw = a.astype("<f4", copy=False).tobytes()
        entries.append({
            "name": name,
            "shape": list(a.shape),
            "offset": offset,
            "nbytes": len(raw),
            "crc32": zlib.crc32(raw),
        })
        blobs.append(raw)
        offset += len(raw)
    manifest = {
        "format_version": FORMAT_VERSION,
        "config": config,
        "step": step,
        "extra": extra or {},
        "tensors": entries,
    }
    (ckpt_dir / PARAMS_NAME).write_bytes(b"".join(blobs))
    (ckpt_dir / MANIFEST_NAME).write_text(json.dumps(manifest, indent=1, sort_keys=True))
    return ckpt_dir


def load_tensor_store(ckpt_dir: str | Path) -> tuple[dict, int, "OrderedDict[str, np.ndarray]", dict]:
    ckpt_dir = Path(ckpt_dir)
    man_path = ckpt_dir / MANIFEST_NAME
    bin_path = ckpt_dir / PARAMS_NAME
    if not man_path.exists() or not bin_path.exists():
        raise CheckpointError(f"incomplete checkpoint at {ckpt_dir}")
    try:
        manifest = json.loads(man_path.read_text())
    except json.JSONDecodeError as e:
        raise CheckpointError(f"corrupt manifest in {ckpt_dir}: {e}") from e
    if manifest.get("format_version") != FORMAT_VERSION:
        raise CheckpointError(f"unsupported checkpoint format {manifest.get('format_version')}")
    raw = bin_path.read_bytes()
    tensors: OrderedDict[str, np.ndarray] = OrderedDict()
    for ent in manifest["tensors"]:
        chunk = raw[ent["offset"]:ent["offset"] + ent["nbytes"]]
        if len(chunk) != ent["nbytes"]:
            raise CheckpointError(f"truncated params.bin at tensor {ent['name']}")
        if zlib.crc32(chunk) != ent["crc32"]:
            raise CheckpointError(f"checksum mismatch for tensor {ent['name']}")
        tensors[ent["name"]] = np.frombuffer(chunk, dtype="<f4").reshape(ent["shape"]).copy()
    return manifest["config"], manifest["step"], tensors, manifest.get("extra", {})


def save_checkpoint(bundle: ModelBundle, ckpt_dir: str | Path,
                    extra_tensors: "OrderedDict[str, np.ndarray] | None" = None,
                    extra: dict | None = None) -> Path:
    """Write the bundle's parameters (plus optional extras such as optimizer
    moments) in manifest order."""
    tensors: OrderedDict[str, np.ndarray] = OrderedDict()
    for name, p in bundle.named_parameters():
        tensors[name] = p.detach().cpu().numpy()
    if extra_tensors:
        for name, arr in extra_tensors.items():
            if name in tensors:
                raise ValueError(f"extra tensor name collides with parameter: {name}")
            tensors[name] = arr
    return save_tensor_store(ckpt_dir, bundle.config.to_dict(), bundle.step, tensors, extra)


def load_checkpoint(ckpt_dir: str | Path) -> tuple[ModelBundle, "OrderedDict[str, np.ndarray]", dict]:
    """Rebuild a bundle from disk; returns (bundle, non-parameter tensors, extra)."""
    config_dict, step, tensors, extra = load_tensor_store(ckpt_dir)
    bundle = ModelBundle(NetConfig.from_dict(config_dict))
    bundle.step = step
    params = dict(bundle.named_parameters())
    leftovers: OrderedDict[str, np.ndarray] = OrderedDict()
    seen = set()
    with torch.no_grad():
        for name, arr in tensors.items():
            if name in params:
                if tuple(params[name].shape) != arr.shape:
                    raise CheckpointError(f"shape mismatch for {name}")
                params[name].copy_(torch.from_numpy(arr))
                seen.add(name)
            else:
                leftovers[name] = arr
    missing = set(params) - seen
    if missing:
        raise CheckpointError(f"checkpoint missing parameters: {sorted(missing)[:3]}...")
    return bundle, leftovers, extra
