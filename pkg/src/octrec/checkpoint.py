"""Model checkpoints: WUN1 container with a JSON header and named tensors.

Layout: magic "WUN1", u16 version, u32 JSON length + UTF-8 config blob,
u32 tensor count, then per tensor a u16 name length, the name, a u8 rank,
u32 extents, and row-major float32 little-endian data.
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataFormatError
from .model import AttentionUNet, ModelConfig
from .optim import Adam

WUN1_MAGIC = b"WUN1"
WUN1_VERSION = 1


@dataclass
class Checkpoint:
    config: dict
    tensors: dict[str, np.ndarray]

    def model_config(self) -> ModelConfig:
        m = self.config.get("model", {})
        try:
            return ModelConfig(base_channels=int(m["base_channels"]),
                               levels=int(m["levels"]),
                               in_channels=int(m["in_channels"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise DataFormatError(f"checkpoint carries an invalid model config: {exc}") from exc


def save_checkpoint(path: str | Path, model: AttentionUNet,
                    optimizer: Adam | None = None,
                    epoch: int | None = None,
                    best_val_loss: float | None = None,
                    extra: dict | None = None) -> None:
    cfg = {
        "model": {
            "base_channels": model.cfg.base_channels,
            "levels": model.cfg.levels,
            "in_channels": model.cfg.in_channels,
        },
    }
    if epoch is not None:
        cfg["epoch"] = int(epoch)
    if best_val_loss is not None:
        cfg["best_val_loss"] = float(best_val_loss)
    if optimizer is not None:
        cfg["adam"] = {
            "lr": optimizer.lr,
            "beta1": optimizer.beta1,
            "beta2": optimizer.beta2,
            "eps": optimizer.eps,
            "step_count": optimizer.step_count,
        }
    if extra:
        cfg.update(extra)

    tensors: dict[str, np.ndarray] = dict(model.state_tensors())
    if optimizer is not None:
        for name, m in optimizer.m.items():
            tensors[f"adam.m.{name}"] = m
        for name, v in optimizer.v.items():
            tensors[f"adam.v.{name}"] = v

    blob = json.dumps(cfg, sort_keys=True).encode("utf-8")
    parts = [WUN1_MAGIC, struct.pack("<H", WUN1_VERSION),
             struct.pack("<I", len(blob)), blob,
             struct.pack("<I", len(tensors))]
    for name, arr in tensors.items():
        encoded = name.encode("utf-8")
        a = np.ascontiguousarray(arr, dtype="<f4")
        parts.append(struct.pack("<H", len(encoded)))
        parts.append(encoded)
        parts.append(struct.pack("<B", a.ndim))
        parts.append(struct.pack(f"<{a.ndim}I", *a.shape))
        parts.append(a.tobytes())
    Path(path).write_bytes(b"".join(parts))


def load_checkpoint(path: str | Path) -> Checkpoint:
    buf = Path(path).read_bytes()
    origin = str(path)
    if len(buf) < 10:
        raise DataFormatError(f"{origin}: file too short for a checkpoint header")
    if buf[:4] != WUN1_MAGIC:
        raise DataFormatError(f"{origin}: bad magic {buf[:4]!r}, expected {WUN1_MAGIC!r}")
    (version,) = struct.unpack_from("<H", buf, 4)
    if version != WUN1_VERSION:
        raise DataFormatError(f"{origin}: unsupported checkpoint version {version}")
    (blob_len,) = struct.unpack_from("<I", buf, 6)
    offset = 10
    if len(buf) - offset < blob_len:
        raise DataFormatError(f"{origin}: truncated config blob")
    try:
        config = json.loads(buf[offset: offset + blob_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise DataFormatError(f"{origin}: config blob is not valid JSON: {exc}") from exc
    offset += blob_len
    if len(buf) - offset < 4:
        raise DataFormatError(f"{origin}: missing tensor count")
    (count,) = struct.unpack_from("<I", buf, offset)
    offset += 4
    tensors: dict[str, np.ndarray] = {}
    for i in range(count):
        if len(buf) - offset < 2:
            raise DataFormatError(f"{origin}: truncated name length for tensor {i}")
        (name_len,) = struct.unpack_from("<H", buf, offset)
        offset += 2
        if len(buf) - offset < name_len + 1:
            raise DataFormatError(f"{origin}: truncated name or rank for tensor {i}")
        name = buf[offset: offset + name_len].decode("utf-8")
        offset += name_len
        rank = buf[offset]
        offset += 1
        if len(buf) - offset < 4 * rank:
            raise DataFormatError(f"{origin}: truncated extents for tensor {name!r}")
        shape = struct.unpack_from(f"<{rank}I", buf, offset)
        offset += 4 * rank
        n_bytes = 4 * int(np.prod(shape, dtype=np.int64)) if rank else 4
        if len(buf) - offset < n_bytes:
            raise DataFormatError(f"{origin}: truncated data for tensor {name!r}")
        data = np.frombuffer(buf, dtype="<f4", count=n_bytes // 4, offset=offset).reshape(shape)
        offset += n_bytes
        if name in tensors:
            raise DataFormatError(f"{origin}: duplicate tensor name {name!r}")
        tensors[name] = data.copy()
    if offset != len(buf):
        raise DataFormatError(f"{origin}: {len(buf) - offset} trailing bytes after tensor table")
    return Checkpoint(config=config, tensors=tensors)


def restore_model(ckpt: Checkpoint, dtype=np.float32) -> AttentionUNet:
    """Rebuild a model from a checkpoint's config and tensors."""
    model = AttentionUNet(ckpt.model_config(), seed=0, dtype=dtype)
    state = {k: v for k, v in ckpt.tensors.items() if not k.startswith("adam.")}
    try:
        model.load_state(state)
    except ValueError as exc:
        raise DataFormatError(f"checkpoint tensors do not match the model: {exc}") from exc
    return model
