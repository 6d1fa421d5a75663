"""Versioned binary containers for fitted models.

Layout: magic line (``CORR2DSVD/1`` or ``CORRTENSOR/1``), an 8-byte
little-endian header length, a UTF-8 JSON header, then each array's raw
little-endian float64 bytes in header order. Floats in the header are
stored as ``float.hex`` strings so every scalar round-trips bitwise.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .correntropy import CorrParams, SampleWeights
from .decomp2d import Decomp2DModel
from .errors import FormatError
from .tensor import TensorModel

MAGIC_2D = b"CORR2DSVD/1\n"
MAGIC_TENSOR = b"CORRTENSOR/1\n"


def _hexlist(values):
    return [float(v).hex() for v in values]


def _unhex(values):
    return [float.fromhex(v) for v in values]


def _params_out(p: CorrParams | None):
    return None if p is None else {k: float(v).hex() for k, v in p.to_dict().items()}


def _params_in(d):
    return None if d is None else CorrParams(**{k: float.fromhex(v) for k, v in d.items()})


def _pack(magic, meta, arrays) -> bytes:
    meta = dict(meta)
    meta["arrays"] = [[name, list(a.shape)] for name, a in arrays]
    header = json.dumps(meta, sort_keys=True).encode("utf-8")
    body = b"".join(np.ascontiguousarray(a, dtype="<f8").tobytes() for _, a in arrays)
    return magic + struct.pack("<Q", len(header)) + header + body


def _unpack(buf, magic):
    if not buf.startswith(magic):
        raise FormatError(f"not a {magic.strip().decode()} container")
    pos = len(magic)
    if len(buf) < pos + 8:
        raise FormatError("container truncated in header length")
    (hlen,) = struct.unpack("<Q", buf[pos : pos + 8])
    pos += 8
    try:
        meta = json.loads(buf[pos : pos + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"corrupt container header: {exc}") from None
    pos += hlen
    arrays = {}
    for name, shape in meta.pop("arrays"):
        n = int(np.prod(shape, dtype=np.int64)) * 8
        if len(buf) < pos + n:
            raise FormatError(f"container truncated in array {name!r}")
        arrays[name] = np.frombuffer(buf[pos : pos + n], dtype="<f8").reshape(shape).astype(np.float64)
        pos += n
    if pos != len(buf):
        raise FormatError("trailing bytes after last array")
    return meta, arrays


def dumps_model(model: Decomp2DModel) -> bytes:
    meta = {
        "method": model.method,
        "params": _params_out(model.params),
        "trace": _hexlist(model.trace),
        "converged": model.converged,
        "iterations": model.iterations,
    }
    arrays = [
        ("left", model.left),
        ("right", model.right),
        ("mean", model.mean),
        ("cores", model.cores),
        ("weights", model.weights.weights),
        ("residuals", model.weights.residuals),
    ]
    return _pack(MAGIC_2D, meta, arrays)


def loads_model(buf: bytes) -> Decomp2DModel:
    meta, a = _unpack(buf, MAGIC_2D)
    return Decomp2DModel(
        method=meta["method"],
        left=a["left"],
        right=a["right"],
        cores=a["cores"],
        mean=a["mean"],
        weights=SampleWeights(a["weights"], a["residuals"]),
        trace=_unhex(meta["trace"]),
        params=_params_in(meta["params"]),
        converged=meta["converged"],
        iterations=meta["iterations"],
    )


def dumps_tensor_model(model: TensorModel) -> bytes:
    meta = {
        "method": model.method,
        "params": _params_out(model.params),
        "trace": _hexlist(model.trace),
        "converged": model.converged,
        "iterations": model.iterations,
        "n_factors": len(model.factors),
    }
    arrays = [(f"factor{i}", u) for i, u in enumerate(model.factors)]
    arrays += [
        ("mean", model.mean),
        ("cores", model.cores),
        ("weights", model.weights.weights),
        ("residuals", model.weights.residuals),
    ]
    return _pack(MAGIC_TENSOR, meta, arrays)


def loads_tensor_model(buf: bytes) -> TensorModel:
    meta, a = _unpack(buf, MAGIC_TENSOR)
    return TensorModel(
        factors=[a[f"factor{i}"] for i in range(meta["n_factors"])],
        cores=a["cores"],
        mean=a["mean"],
        weights=SampleWeights(a["weights"], a["residuals"]),
        trace=_unhex(meta["trace"]),
        params=_params_in(meta["params"]),
        converged=meta["converged"],
        iterations=meta["iterations"],
        method=meta["method"],
    )


def save_model(path, model):
    data = dumps_tensor_model(model) if isinstance(model, TensorModel) else dumps_model(model)
    Path(path).write_bytes(data)


def load_model(path):
    buf = Path(path).read_bytes()
    if buf.startswith(MAGIC_TENSOR):
        return loads_tensor_model(buf)
    return loads_model(buf)
