"""Matrix arithmetic on validated 2-D float64 arrays."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConvergenceError, DimensionError, SymmetryError

JACOBI_REL_TOL = 1e-12
JACOBI_MAX_SWEEPS = 100
SYMMETRY_TOL = 1e-9


def as_matrix(a, name="matrix") -> np.ndarray:
    """Return ``a`` as a 2-D float64 array, rejecting NaN/Inf."""
    m = np.asarray(a, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] < 1 or m.shape[1] < 1:
        raise DimensionError(f"{name} must be a non-empty 2-D array, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{name} contains non-finite entries")
    return m


def matmul(a, b) -> np.ndarray:
    a = as_matrix(a, "a")
    b = as_matrix(b, "b")
    if a.shape[1] != b.shape[0]:
        raise DimensionError(f"cannot multiply {a.shape} by {b.shape}")
    return a @ b


def transpose(a) -> np.ndarray:
    return as_matrix(a).T.copy()


def add(a, b) -> np.ndarray:
    a = as_matrix(a, "a")
    b = as_matrix(b, "b")
    if a.shape != b.shape:
        raise DimensionError(f"cannot add {a.shape} and {b.shape}")
    return a + b


def scale(a, c: float) -> np.ndarray:
    return float(c) * as_matrix(a)


def trace(a) -> float:
    a = as_matrix(a)
    if a.shape[0] != a.shape[1]:
        raise DimensionError(f"trace of non-square {a.shape}")
    return float(np.trace(a))


def frobenius_norm_sq(a) -> float:
    """Sum of squared entries."""
    a = np.asarray(a, dtype=np.float64)
    return float(np.dot(a.ravel(), a.ravel()))


@dataclass(frozen=True)
class EigenDecomposition:
    """Eigenpairs of a symmetric matrix.

    ``values`` are sorted descending and ``vectors[:, j]`` is the unit
    eigenvector for ``values[j]``. Each vector is signed so that its
    first largest-magnitude component is non-negative.
    """

    values: np.ndarray
    vectors: np.ndarray
    sweeps: int


def _canonical_signs(v: np.ndarray) -> np.ndarray:
    idx = np.argmax(np.abs(v), axis=0)
    signs = np.where(v[idx, np.arange(v.shape[1])] < 0.0, -1.0, 1.0)
    return v * signs


def sym_eig(a, *, rel_tol: float = JACOBI_REL_TOL, max_sweeps: int = JACOBI_MAX_SWEEPS) -> EigenDecomposition:
    """Eigendecomposition of a real symmetric matrix by cyclic Jacobi.

    Sweeps stop once the off-diagonal Frobenius norm falls to
    ``rel_tol * ||a||_F``.

    Raises
    ------
    DimensionError
        ``a`` is not square.
    SymmetryError
        ``max|a - a.T| > 1e-9 * max|a|``.
    ConvergenceError
        The threshold was not met within ``max_sweeps`` sweeps.
    """
    from . import _kernel

    a = as_matrix(a)
    n, m = a.shape
    if n != m:
        raise DimensionError(f"sym_eig needs a square matrix, got {a.shape}")
    amax = float(np.max(np.abs(a)))
    if float(np.max(np.abs(a - a.T))) > SYMMETRY_TOL * amax:
        raise SymmetryError("matrix is not symmetric within tolerance")

    work = np.ascontiguousarray(0.5 * (a + a.T))
    vecs = np.eye(n)
    threshold = rel_tol * float(np.sqrt(frobenius_norm_sq(work)))
    sweeps = _kernel.jacobi_sweeps(work, vecs, threshold, max_sweeps)
    if sweeps < 0:
        raise ConvergenceError(f"Jacobi did not converge in {max_sweeps} sweeps")

    vals = np.diag(work).copy()
    # stable sort keeps original column order among equal eigenvalues
    order = np.argsort(-vals, kind="stable")
    return EigenDecomposition(vals[order], _canonical_signs(vecs[:, order]), sweeps)


def top_k_eigvecs(a, k: int) -> np.ndarray:
    """Columns spanning the eigenspace of the ``k`` largest eigenvalues."""
    a = as_matrix(a)
    if not 1 <= k <= a.shape[0]:
        raise DimensionError(f"k={k} out of range for a {a.shape[0]}x{a.shape[0]} matrix")
    return np.ascontiguousarray(sym_eig(a).vectors[:, :k])


def orthonormality_error(q) -> float:
    q = np.asarray(q, dtype=np.float64)
    return float(np.max(np.abs(q.T @ q - np.eye(q.shape[1]))))


def principal_angles(a, b) -> np.ndarray:
    """Principal angles (radians) between the column spans of ``a`` and ``b``.

    Both inputs must have orthonormal columns. Uses the sine-based
    formula, which stays accurate for tiny angles.
    """
    a = as_matrix(a, "a")
    b = as_matrix(b, "b")
    if a.shape[0] != b.shape[0]:
        raise DimensionError("subspaces live in different ambient dimensions")
    if a.shape[1] < b.shape[1]:
        a, b = b, a
    resid = b - a @ (a.T @ b)
    s = np.linalg.svd(resid, compute_uv=False)
    return np.arcsin(np.clip(np.sort(s), 0.0, 1.0))
