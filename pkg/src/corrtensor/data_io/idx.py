"""IDX (MNIST) image and label files. Paths ending in ``.gz`` are gzip streams."""

from __future__ import annotations

import gzip
import struct
from pathlib import Path

import numpy as np

from ..errors import FormatError

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801


def _read_bytes(path) -> bytes:
    path = Path(path)
    if path.suffix == ".gz":
        with gzip.open(path, "rb") as f:
            return f.read()
    return path.read_bytes()


def _write_bytes(path, payload: bytes):
    path = Path(path)
    if path.suffix == ".gz":
        # fixed mtime and empty name keep the compressed bytes reproducible
        with open(path, "wb") as raw, gzip.GzipFile(filename="", fileobj=raw, mode="wb", mtime=0) as f:
            f.write(payload)
    else:
        path.write_bytes(payload)


def parse_idx(buf: bytes, expected_magic: int) -> np.ndarray:
    """Decode an unsigned-byte IDX payload into an array of its declared shape."""
    if len(buf) < 4:
        raise FormatError(f"IDX stream too short for a header ({len(buf)} bytes)")
    (magic,) = struct.unpack(">I", buf[:4])
    if magic != expected_magic:
        raise FormatError(f"bad IDX magic 0x{magic:08x}, expected 0x{expected_magic:08x}")
    ndim = magic & 0xFF
    header = 4 + 4 * ndim
    if len(buf) < header:
        raise FormatError(f"IDX header truncated: expected {header} bytes, got {len(buf)}")
    dims = struct.unpack(f">{ndim}I", buf[4:header])
    expected = header + int(np.prod(dims, dtype=np.int64))
    if len(buf) != expected:
        raise FormatError(f"IDX payload size mismatch: expected {expected} bytes, got {len(buf)}")
    return np.frombuffer(buf, dtype=np.uint8, offset=header).reshape(dims)


def encode_idx(data: np.ndarray, magic: int) -> bytes:
    data = np.asarray(data)
    if data.dtype != np.uint8:
        raise FormatError(f"IDX writer expects uint8 data, got {data.dtype}")
    if data.ndim != magic & 0xFF:
        raise FormatError(f"magic 0x{magic:08x} needs {magic & 0xFF} dims, data has {data.ndim}")
    return struct.pack(f">I{data.ndim}I", magic, *data.shape) + np.ascontiguousarray(data).tobytes()


def load_idx_images(path) -> np.ndarray:
    """Images as an (N, rows, cols) float array scaled to [0, 1]."""
    raw = parse_idx(_read_bytes(path), IMAGES_MAGIC)
    return raw.astype(np.float64) / 255.0


def load_idx_labels(path) -> np.ndarray:
    return parse_idx(_read_bytes(path), LABELS_MAGIC).astype(np.int64)


def _to_bytes(images) -> np.ndarray:
    x = np.asarray(images, dtype=np.float64)
    if np.any(x < 0) or np.any(x > 1):
        raise FormatError("image values must lie in [0, 1] to be written as bytes")
    return np.rint(x * 255.0).astype(np.uint8)


def write_idx_images(path, images):
    _write_bytes(path, encode_idx(_to_bytes(images), IMAGES_MAGIC))


def write_idx_labels(path, labels):
    lab = np.asarray(labels)
    if lab.size and (lab.min() < 0 or lab.max() > 255):
        raise FormatError("labels must fit in an unsigned byte")
    _write_bytes(path, encode_idx(lab.astype(np.uint8), LABELS_MAGIC))


def load_mnist(images_path, labels_path):
    """Images and aligned labels; raises if the counts differ."""
    images = load_idx_images(images_path)
    labels = load_idx_labels(labels_path)
    if images.shape[0] != labels.shape[0]:
        raise FormatError(f"{images.shape[0]} images but {labels.shape[0]} labels")
    return images, labels
