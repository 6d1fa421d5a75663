"""Binary PGM (P5) and PPM (P6) images with maxval 255."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from ..errors import FormatError

_CHANNELS = {b"P5": 1, b"P6": 3}


def _tokens(buf: bytes, count: int):
    # header tokens separated by whitespace; '#' starts a comment line
    out = []
    i = 0
    n = len(buf)
    while len(out) < count:
        while i < n and buf[i : i + 1].isspace():
            i += 1
        if i < n and buf[i : i + 1] == b"#":
            while i < n and buf[i : i + 1] not in (b"\n", b"\r"):
                i += 1
            continue
        start = i
        while i < n and not buf[i : i + 1].isspace() and buf[i : i + 1] != b"#":
            i += 1
        if start == i:
            raise FormatError("truncated PNM header")
        out.append(buf[start:i])
    # exactly one whitespace byte separates the header from the raster
    return out, i + 1


def parse_pnm(buf: bytes) -> np.ndarray:
    """Decode to uint8, shape (h, w) for P5 or (h, w, 3) for P6."""
    (magic, w, h, maxval), offset = _tokens(buf, 4)
    if magic not in _CHANNELS:
        raise FormatError(f"unsupported PNM magic {magic!r}")
    try:
        w, h, maxval = int(w), int(h), int(maxval)
    except ValueError:
        raise FormatError("non-numeric PNM header field") from None
    if maxval != 255:
        raise FormatError(f"unsupported maxval {maxval} (only 255)")
    ch = _CHANNELS[magic]
    size = w * h * ch
    raster = buf[offset : offset + size]
    if len(raster) != size:
        raise FormatError(f"PNM raster truncated: expected {size} bytes, got {len(raster)}")
    img = np.frombuffer(raster, dtype=np.uint8)
    return img.reshape((h, w) if ch == 1 else (h, w, 3))


def encode_pnm(img) -> bytes:
    img = np.asarray(img)
    if img.dtype != np.uint8:
        raise FormatError("PNM writer expects uint8 data")
    if img.ndim == 2:
        magic = b"P5"
    elif img.ndim == 3 and img.shape[2] == 3:
        magic = b"P6"
    else:
        raise FormatError(f"cannot write an image of shape {img.shape}")
    h, w = img.shape[:2]
    return magic + f"\n{w} {h}\n255\n".encode() + np.ascontiguousarray(img).tobytes()


def read_pnm(path) -> np.ndarray:
    """Image scaled to [0, 1]."""
    return parse_pnm(Path(path).read_bytes()).astype(np.float64) / 255.0


def write_pnm(path, img):
    x = np.asarray(img, dtype=np.float64)
    if np.any(x < 0) or np.any(x > 1):
        raise FormatError("image values must lie in [0, 1]")
    Path(path).write_bytes(encode_pnm(np.rint(x * 255.0).astype(np.uint8)))


def _load_dir(path, suffixes, want_ndim):
    files = sorted(p for p in Path(path).iterdir() if p.suffix.lower() in suffixes)
    if not files:
        raise FormatError(f"no {'/'.join(suffixes)} files in {path}")
    images = []
    shape = None
    for f in files:
        img = read_pnm(f)
        if img.ndim != want_ndim:
            raise FormatError(f"{f.name}: expected {'grayscale' if want_ndim == 2 else 'color'} image")
        if shape is None:
            shape = img.shape
        elif img.shape != shape:
            raise FormatError(f"{f.name}: size {img.shape} differs from {shape} of {files[0].name}")
        images.append(img)
    return np.stack(images), [f.name for f in files]


def load_pgm_dir(path):
    """Grayscale images from ``*.pgm`` files, sorted by filename."""
    return _load_dir(path, (".pgm",), 2)


def load_ppm_dir(path):
    """Color images (h, w, 3) in R, G, B order from ``*.ppm`` files."""
    return _load_dir(path, (".ppm",), 3)
