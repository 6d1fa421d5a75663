"""Two-dimensional subspace fitters: 2DPCA, 2DSVD, R1-2DSVD and Corr-2DSVD.

All fitters share the two-sided model ``X_i ~ mean + L M_i R^T`` with
orthonormal ``L`` (a x k1) and ``R`` (b x k2). Covariances are assembled
without the positive scalar factors that appear in the stationarity
conditions, since only their eigenvectors are used.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import correntropy as ct
from .correntropy import CorrParams, SampleWeights
from .errors import ConvergenceWarning, DimensionError, DomainError
from .linalg import top_k_eigvecs


@dataclass(frozen=True)
class FitConfig:
    k1: int
    k2: int
    max_iters: int = 100
    tol: float = 1e-5
    seed: int = 0

    def __post_init__(self):
        if self.k1 < 1 or self.k2 < 1:
            raise DimensionError("ranks must be positive")
        if self.max_iters < 1 or not self.tol > 0:
            raise DomainError("max_iters must be >= 1 and tol > 0")
        if not 0 <= self.seed < 2**64:
            raise DomainError("seed must be a 64-bit unsigned integer")


@dataclass
class Decomp2DModel:
    """A fitted two-sided decomposition.

    ``cores[i]`` is ``left.T @ (X_i - mean) @ right`` for the training
    sample ``i``; ``weights.residuals[i]`` is its squared reconstruction
    residual under the final model.
    """

    method: str
    left: np.ndarray
    right: np.ndarray
    cores: np.ndarray
    mean: np.ndarray
    weights: SampleWeights
    trace: list = field(default_factory=list)
    params: CorrParams | None = None
    converged: bool = True
    iterations: int = 0

    @property
    def shape(self) -> tuple:
        return self.mean.shape

    @property
    def ranks(self) -> tuple:
        return self.left.shape[1], self.right.shape[1]


def stack_samples(samples, min_count=2) -> np.ndarray:
    """Validate a collection of equally-shaped matrices as an (N, a, b) array."""
    try:
        x = np.asarray(samples, dtype=np.float64)
    except ValueError as exc:
        raise DimensionError(f"samples do not share one shape: {exc}") from None
    if x.ndim != 3:
        raise DimensionError(f"expected a stack of matrices, got array of shape {x.shape}")
    if x.shape[0] < min_count:
        raise DimensionError(f"need at least {min_count} samples, got {x.shape[0]}")
    if not np.all(np.isfinite(x)):
        raise ValueError("samples contain non-finite entries")
    return x


def _check_ranks(shape, k1, k2):
    a, b = shape
    if not (1 <= k1 <= a and 1 <= k2 <= b):
        raise DimensionError(f"ranks ({k1}, {k2}) out of range for {a}x{b} samples")


def residual_energies(xh, left, right) -> np.ndarray:
    """``||Xh_i - L L^T Xh_i R R^T||_F^2`` for each centred sample."""
    approx = left @ (left.T @ xh @ right) @ right.T
    d = (xh - approx).reshape(xh.shape[0], -1)
    return np.einsum("ij,ij->i", d, d)


def left_covariance(xh, right, w=None) -> np.ndarray:
    """``sum_i w_i Xh_i R R^T Xh_i^T`` as a Gram product of stacked blocks."""
    y = xh @ right
    if w is not None:
        y = y * np.sqrt(w)[:, None, None]
    blocks = np.transpose(y, (1, 0, 2)).reshape(y.shape[1], -1)
    c = blocks @ blocks.T
    return 0.5 * (c + c.T)


def right_covariance(xh, left, w=None) -> np.ndarray:
    """``sum_i w_i Xh_i^T L L^T Xh_i``."""
    return left_covariance(np.transpose(xh, (0, 2, 1)), left, w)


def _weighted_mean(x, w) -> np.ndarray:
    return np.tensordot(w, x, axes=1) / np.sum(w)


def _rel_change(j, j_prev) -> float:
    return abs(j - j_prev) / max(j_prev, 1e-15)


def fit_2dpca(samples, k: int) -> Decomp2DModel:
    """One-sided 2DPCA: ``right`` from the column-column covariance, ``left = I``."""
    x = stack_samples(samples)
    n, a, b = x.shape
    _check_ranks((a, b), a, k)
    mean = x.mean(axis=0)
    xh = x - mean
    flat = xh.reshape(-1, b)
    c = flat.T @ flat
    right = top_k_eigvecs(0.5 * (c + c.T), k)
    left = np.eye(a)
    e = residual_energies(xh, left, right)
    return Decomp2DModel(
        method="2dpca",
        left=left,
        right=right,
        cores=xh @ right,
        mean=mean,
        weights=SampleWeights.uniform(e),
        trace=[float(np.sum(e))],
        iterations=1,
    )


def _alternate(xh, left, right, k1, k2, w=None):
    left = top_k_eigvecs(left_covariance(xh, right, w), k1)
    right = top_k_eigvecs(right_covariance(xh, left, w), k2)
    return left, right


def _hosvd_init(xh, k1, k2):
    flat_l = np.transpose(xh, (1, 0, 2)).reshape(xh.shape[1], -1)
    flat_r = np.transpose(xh, (2, 0, 1)).reshape(xh.shape[2], -1)
    return top_k_eigvecs(flat_l @ flat_l.T, k1), top_k_eigvecs(flat_r @ flat_r.T, k2)


def _finish(loop_converged, method, max_iters):
    if not loop_converged:
        warnings.warn(
            f"{method} did not reach tolerance in {max_iters} iterations; returning best iterate",
            ConvergenceWarning,
            stacklevel=3,
        )


def fit_2dsvd(samples, config: FitConfig) -> Decomp2DModel:
    """2DSVD by alternating eigen-updates of ``L`` and ``R``.

    Starts from the one-shot row/column covariance eigenvectors and
    iterates until the relative change of the squared-error objective
    drops below ``config.tol``.
    """
    x = stack_samples(samples)
    _check_ranks(x.shape[1:], config.k1, config.k2)
    mean = x.mean(axis=0)
    xh = x - mean
    left, right = _hosvd_init(xh, config.k1, config.k2)
    j_prev = float(np.sum(residual_energies(xh, left, right)))
    trace = [j_prev]
    converged = False
    it = 0
    for it in range(1, config.max_iters + 1):
        left, right = _alternate(xh, left, right, config.k1, config.k2)
        j = float(np.sum(residual_energies(xh, left, right)))
        trace.append(j)
        if _rel_change(j, j_prev) < config.tol:
            converged = True
            break
        j_prev = j
    _finish(converged, "2dsvd", config.max_iters)
    e = residual_energies(xh, left, right)
    return Decomp2DModel(
        method="2dsvd",
        left=left,
        right=right,
        cores=left.T @ xh @ right,
        mean=mean,
        weights=SampleWeights.uniform(e),
        trace=trace,
        converged=converged,
        iterations=it,
    )


def fit_r1_2dsvd(samples, config: FitConfig) -> Decomp2DModel:
    """R1-norm 2DSVD: covariances reweighted by ``1/sqrt(e_i)``.

    The mean is the arithmetic mean and is never updated.
    """
    x = stack_samples(samples)
    init = fit_2dsvd(x, config)
    mean = init.mean
    xh = x - mean
    left, right = init.left, init.right
    e = residual_energies(xh, left, right)
    # objective uses the same clamp as the weights so exact fits read as converged
    j_prev = float(np.sum(np.sqrt(np.maximum(e, ct.E_FLOOR))))
    trace = [j_prev]
    best = (j_prev, left, right, e)
    converged = False
    it = 0
    for it in range(1, config.max_iters + 1):
        w = 1.0 / np.sqrt(np.maximum(e, ct.E_FLOOR))
        left, right = _alternate(xh, left, right, config.k1, config.k2, w / np.max(w))
        e = residual_energies(xh, left, right)
        j = float(np.sum(np.sqrt(np.maximum(e, ct.E_FLOOR))))
        trace.append(j)
        if j < best[0]:
            best = (j, left, right, e)
        if _rel_change(j, j_prev) < config.tol:
            converged = True
            break
        j_prev = j
    if not converged:
        _, left, right, e = best
    _finish(converged, "r1-2dsvd", config.max_iters)
    w = 1.0 / np.sqrt(np.maximum(e, ct.E_FLOOR))
    return Decomp2DModel(
        method="r1-2dsvd",
        left=left,
        right=right,
        cores=left.T @ xh @ right,
        mean=mean,
        weights=SampleWeights(w, e),
        trace=trace,
        converged=converged,
        iterations=it,
    )


def fit_corr_2dsvd(samples, config: FitConfig, params: CorrParams) -> Decomp2DModel:
    """Correntropy-robust 2DSVD with a reweighted mean.

    Each iteration computes sample weights from the current residuals,
    moves the mean to the weighted sample average, then updates ``L``
    from the weighted row covariance and ``R`` from the weighted column
    covariance built with the new ``L``. Iteration stops when the
    objective's relative change falls below ``config.tol``.

    Weights are handled in the log domain and rescaled by their maximum
    before use, so extreme residuals underflow to zero weight without
    turning the weighted mean into 0/0.
    """
    x = stack_samples(samples)
    init = fit_2dsvd(x, config)
    left, right, mean = init.left, init.right, init.mean
    xh = x - mean
    e = residual_energies(xh, left, right)
    j_prev = ct.objective(e, params)
    trace = [j_prev]
    best = (j_prev, left, right, mean, xh, e)
    converged = False
    it = 0
    for it in range(1, config.max_iters + 1):
        w = ct.normalized_weights(ct.solver_log_weights(e, params))
        mean = _weighted_mean(x, w)
        xh = x - mean
        left, right = _alternate(xh, left, right, config.k1, config.k2, w)
        e = residual_energies(xh, left, right)
        j = ct.objective(e, params)
        trace.append(j)
        if j < best[0]:
            best = (j, left, right, mean, xh, e)
        if _rel_change(j, j_prev) < config.tol:
            converged = True
            break
        j_prev = j
    if not converged:
        _, left, right, mean, xh, e = best
    _finish(converged, "corr-2dsvd", config.max_iters)
    w = np.exp(ct.solver_log_weights(e, params))
    return Decomp2DModel(
        method="corr-2dsvd",
        left=left,
        right=right,
        cores=left.T @ xh @ right,
        mean=mean,
        weights=SampleWeights(w, e),
        trace=trace,
        params=params,
        converged=converged,
        iterations=it,
    )


def project(model: Decomp2DModel, x) -> np.ndarray:
    """Core ``L^T (x - mean) R`` for one matrix or an (N, a, b) stack."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-2:] != model.mean.shape or x.ndim not in (2, 3):
        raise DimensionError(f"sample shape {x.shape} does not match model shape {model.mean.shape}")
    return model.left.T @ (x - model.mean) @ model.right


def reconstruct(model: Decomp2DModel, core) -> np.ndarray:
    """Image-space reconstruction ``L core R^T + mean``."""
    core = np.asarray(core, dtype=np.float64)
    if core.shape[-2:] != model.ranks or core.ndim not in (2, 3):
        raise DimensionError(f"core shape {core.shape} does not match ranks {model.ranks}")
    return model.left @ core @ model.right.T + model.mean


def reconstruction_error(model: Decomp2DModel, samples, exclude=()) -> float:
    """Mean squared reconstruction error over samples not in ``exclude``."""
    x = stack_samples(samples, min_count=1)
    keep = np.ones(x.shape[0], dtype=bool)
    idx = np.asarray(list(exclude), dtype=np.int64)
    if idx.size:
        if idx.min() < 0 or idx.max() >= x.shape[0]:
            raise DimensionError("exclude index out of range")
        keep[idx] = False
    if not keep.any():
        raise DomainError("all samples excluded")
    xs = x[keep]
    d = (xs - reconstruct(model, project(model, xs))).reshape(xs.shape[0], -1)
    return float(np.mean(np.einsum("ij,ij->i", d, d)))


FITTERS_2D = {
    "2dsvd": fit_2dsvd,
    "r1-2dsvd": fit_r1_2dsvd,
}


def fit_method(method: str, samples, config: FitConfig, params: CorrParams | None = None) -> Decomp2DModel:
    """Dispatch by method name (``2dpca`` uses ``config.k2`` as its rank)."""
    if method == "2dpca":
        return fit_2dpca(samples, config.k2)
    if method == "corr-2dsvd":
        if params is None:
            raise DomainError("corr-2dsvd requires CorrParams")
        return fit_corr_2dsvd(samples, config, params)
    try:
        return FITTERS_2D[method](samples, config)
    except KeyError:
        raise DomainError(f"unknown 2D method {method!r}") from None
