import numpy as np
import pytest

from corrtensor.correntropy import CorrParams
from corrtensor.decomp2d import FitConfig, fit_2dsvd, fit_corr_2dsvd
from corrtensor.errors import FormatError
from corrtensor.modelio import (
    MAGIC_2D,
    MAGIC_TENSOR,
    dumps_model,
    dumps_tensor_model,
    load_model,
    loads_model,
    loads_tensor_model,
    save_model,
)
from corrtensor.tensor import TensorModel, fit_corr_tensor


def _same_arrays(a, b, fields):
    for f in fields:
        assert getattr(a, f).dtype == getattr(b, f).dtype
        assert getattr(a, f).tobytes() == getattr(b, f).tobytes(), f


def test_2d_roundtrip_bitwise(tmp_path, rng):
    x = rng.normal(size=(12, 7, 5))
    for m in (fit_corr_2dsvd(x, FitConfig(3, 2), CorrParams(1.6, 0.8, p=3)), fit_2dsvd(x, FitConfig(2, 2))):
        save_model(tmp_path / "m.bin", m)
        buf = (tmp_path / "m.bin").read_bytes()
        assert buf.startswith(MAGIC_2D)
        back = load_model(tmp_path / "m.bin")
        _same_arrays(m, back, ("left", "right", "cores", "mean"))
        assert m.weights.weights.tobytes() == back.weights.weights.tobytes()
        assert m.weights.residuals.tobytes() == back.weights.residuals.tobytes()
        assert [v.hex() for v in map(float, m.trace)] == [v.hex() for v in back.trace]
        assert back.params == m.params
        assert (back.method, back.converged, back.iterations) == (m.method, m.converged, m.iterations)
        assert dumps_model(back) == buf


def test_tensor_roundtrip_bitwise(tmp_path, rng):
    x = rng.normal(size=(8, 4, 3, 3))
    m = fit_corr_tensor(x, (2, 2, 1), FitConfig(2, 2), CorrParams(3, 0.8))
    save_model(tmp_path / "t.bin", m)
    buf = (tmp_path / "t.bin").read_bytes()
    assert buf.startswith(MAGIC_TENSOR)
    back = load_model(tmp_path / "t.bin")
    assert isinstance(back, TensorModel)
    for u, v in zip(m.factors, back.factors):
        assert u.tobytes() == v.tobytes() and u.shape == v.shape
    _same_arrays(m, back, ("cores", "mean"))
    assert back.params == m.params
    assert dumps_tensor_model(back) == buf


def test_corrupt_containers(rng):
    m = fit_2dsvd(rng.normal(size=(5, 3, 3)), FitConfig(2, 2))
    buf = dumps_model(m)
    with pytest.raises(FormatError):
        loads_tensor_model(buf)
    with pytest.raises(FormatError, match="truncated"):
        loads_model(buf[:-8])
    with pytest.raises(FormatError, match="trailing"):
        loads_model(buf + b"\x00")
    with pytest.raises(FormatError):
        loads_model(MAGIC_2D + b"\x05\x00\x00\x00\x00\x00\x00\x00{oops")
    with pytest.raises(FormatError):
        loads_model(b"NOTAMODEL")
