"""Dense matrix helpers and the symmetric eigensolver.

The Jacobi sweep kernel is compiled with Cython when available. Setting
``CORRTENSOR_PURE_PYTHON=1`` before import forces the numpy fallback.
"""

import os

from . import _jacobi_py

if os.environ.get("CORRTENSOR_PURE_PYTHON", "") not in ("", "0"):
    _kernel = _jacobi_py
    BACKEND = "python"
else:
    try:
        from . import _jacobi as _kernel  # type: ignore[attr-defined]

        BACKEND = "cython"
    except ImportError:  # extension not built
        _kernel = _jacobi_py
        BACKEND = "python"

from .core import (  # noqa: E402
    EigenDecomposition,
    add,
    as_matrix,
    frobenius_norm_sq,
    matmul,
    orthonormality_error,
    principal_angles,
    scale,
    sym_eig,
    top_k_eigvecs,
    trace,
    transpose,
)

__all__ = [
    "BACKEND",
    "EigenDecomposition",
    "add",
    "as_matrix",
    "frobenius_norm_sq",
    "matmul",
    "orthonormality_error",
    "principal_angles",
    "scale",
    "sym_eig",
    "top_k_eigvecs",
    "trace",
    "transpose",
]
