"""Binary file formats and run manifests.

FRG1 blocks store one real-valued matrix (raw fringes or dB images) with a
grid tag; PAIR files concatenate two FRG1 blocks (network input, ground
truth); PGM exports 8-bit previews.  All multi-byte fields are little-endian
and matrices are row-major float32.
"""
from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path

import numpy as np

from .errors import DataFormatError
from .forward_model import K_LINEAR, LAMBDA_LINEAR

FRG1_MAGIC = b"FRG1"
PAIR_MAGIC = b"PAIR"
FORMAT_VERSION = 1
_DTYPE_FLOAT32 = 0

_TAG_TO_CODE = {LAMBDA_LINEAR: 0, K_LINEAR: 1}
_CODE_TO_TAG = {v: k for k, v in _TAG_TO_CODE.items()}

_BLOCK_HEADER = struct.Struct("<4sHBBII")
_PAIR_HEADER = struct.Struct("<4sH10s")


def _pack_block(array: np.ndarray, grid_tag: str) -> bytes:
    arr = np.asarray(array)
    if arr.ndim != 2:
        raise ValueError(f"FRG1 stores 2-D matrices, got shape {arr.shape}")
    if grid_tag not in _TAG_TO_CODE:
        raise ValueError(f"unknown grid tag {grid_tag!r}")
    data = np.ascontiguousarray(arr, dtype="<f4")
    header = _BLOCK_HEADER.pack(FRG1_MAGIC, FORMAT_VERSION, _DTYPE_FLOAT32,
                                _TAG_TO_CODE[grid_tag], arr.shape[0], arr.shape[1])
    return header + data.tobytes()


def _unpack_block(buf: bytes, offset: int, origin: str) -> tuple[np.ndarray, str, int]:
    if len(buf) - offset < _BLOCK_HEADER.size:
        raise DataFormatError(f"{origin}: truncated block header at byte {offset}")
    magic, version, dtype, tag_code, n_rows, n_cols = _BLOCK_HEADER.unpack_from(buf, offset)
    if magic != FRG1_MAGIC:
        raise DataFormatError(f"{origin}: bad block magic {magic!r}, expected {FRG1_MAGIC!r}")
    if version != FORMAT_VERSION:
        raise DataFormatError(f"{origin}: unsupported block version {version}")
    if dtype != _DTYPE_FLOAT32:
        raise DataFormatError(f"{origin}: unsupported dtype code {dtype}")
    if tag_code not in _CODE_TO_TAG:
        raise DataFormatError(f"{origin}: unknown grid tag code {tag_code}")
    start = offset + _BLOCK_HEADER.size
    n_bytes = 4 * n_rows * n_cols
    if len(buf) - start < n_bytes:
        raise DataFormatError(
            f"{origin}: payload truncated, expected {n_bytes} bytes for {n_rows}x{n_cols}, "
            f"found {len(buf) - start}")
    data = np.frombuffer(buf, dtype="<f4", count=n_rows * n_cols, offset=start)
    return data.reshape(n_rows, n_cols).copy(), _CODE_TO_TAG[tag_code], start + n_bytes


def write_frg1(path: str | Path, array: np.ndarray, grid_tag: str) -> None:
    Path(path).write_bytes(_pack_block(array, grid_tag))


def read_frg1(path: str | Path) -> tuple[np.ndarray, str]:
    buf = Path(path).read_bytes()
    arr, tag, end = _unpack_block(buf, 0, str(path))
    if end != len(buf):
        raise DataFormatError(f"{path}: {len(buf) - end} trailing bytes after matrix payload")
    return arr, tag


def write_pair(path: str | Path, input_image: np.ndarray, target_image: np.ndarray,
               input_tag: str = LAMBDA_LINEAR, target_tag: str = K_LINEAR) -> None:
    header = _PAIR_HEADER.pack(PAIR_MAGIC, FORMAT_VERSION, b"\x00" * 10)
    body = _pack_block(input_image, input_tag) + _pack_block(target_image, target_tag)
    Path(path).write_bytes(header + body)


def read_pair(path: str | Path) -> tuple[np.ndarray, np.ndarray]:
    buf = Path(path).read_bytes()
    if len(buf) < _PAIR_HEADER.size:
        raise DataFormatError(f"{path}: truncated header")
    magic, version, _reserved = _PAIR_HEADER.unpack_from(buf, 0)
    if magic != PAIR_MAGIC:
        raise DataFormatError(f"{path}: bad magic {magic!r}, expected {PAIR_MAGIC!r}")
    if version != FORMAT_VERSION:
        raise DataFormatError(f"{path}: unsupported version {version}")
    first, _, offset = _unpack_block(buf, _PAIR_HEADER.size, str(path))
    second, _, end = _unpack_block(buf, offset, str(path))
    if end != len(buf):
        raise DataFormatError(f"{path}: {len(buf) - end} trailing bytes after second block")
    if first.shape != second.shape:
        raise DataFormatError(f"{path}: block shapes differ: {first.shape} vs {second.shape}")
    return first, second


def write_pgm(path: str | Path, image: np.ndarray) -> None:
    """Binary 8-bit PGM (P5)."""
    img = np.asarray(image)
    if img.ndim != 2 or img.dtype != np.uint8:
        raise ValueError(f"PGM export needs a 2-D uint8 image, got {img.dtype} {img.shape}")
    h, w = img.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        f.write(img.tobytes())


def read_pgm(path: str | Path) -> np.ndarray:
    buf = Path(path).read_bytes()
    parts = buf.split(b"\n", 3)
    if len(parts) != 4 or parts[0] != b"P5":
        raise DataFormatError(f"{path}: not a binary PGM file")
    try:
        w, h = (int(v) for v in parts[1].split())
        maxval = int(parts[2])
    except ValueError as exc:
        raise DataFormatError(f"{path}: malformed PGM header") from exc
    if maxval != 255:
        raise DataFormatError(f"{path}: unsupported maxval {maxval}")
    if len(parts[3]) != w * h:
        raise DataFormatError(f"{path}: payload size {len(parts[3])} does not match {w}x{h}")
    return np.frombuffer(parts[3], dtype=np.uint8).reshape(h, w)


# --- Manifests ---------------------------------------------------------------


def sha256_file(path: str | Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def write_manifest(root: str | Path, files: list[str | Path], extra: dict | None = None) -> Path:
    """Record relative paths, sizes, and content hashes of produced files."""
    root = Path(root)
    entries = []
    for f in sorted(Path(p) for p in files):
        entries.append({
            "path": str(f.relative_to(root)),
            "bytes": f.stat().st_size,
            "sha256": sha256_file(f),
        })
    payload = {"entries": entries}
    if extra:
        payload.update(extra)
    out = root / "manifest.json"
    out.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return out
