"""N-way tensors and the correntropy-robust Tucker-style fitter.

Samples are stacked as an array of shape ``(N, d_1, ..., d_m)``; the
leading axis is the sample index and is never compressed. Mode indices
used by the public functions refer to a single sample (0-based).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import correntropy as ct
from .correntropy import CorrParams, SampleWeights
from .decomp2d import FitConfig
from .errors import ConvergenceWarning, DimensionError, DomainError
from .linalg import top_k_eigvecs


def as_tensor(t, name="tensor") -> np.ndarray:
    t = np.asarray(t, dtype=np.float64)
    if t.ndim < 1 or t.size == 0:
        raise DimensionError(f"{name} must be non-empty")
    if not np.all(np.isfinite(t)):
        raise ValueError(f"{name} contains non-finite entries")
    return t


def _check_mode(t, n):
    if not 0 <= n < t.ndim:
        raise DimensionError(f"mode {n} out of range for a {t.ndim}-way tensor")


def mode_n_product(t, u, n: int) -> np.ndarray:
    """Contract mode ``n`` of ``t`` with the columns of ``u``.

    The result has ``u.shape[0]`` entries along mode ``n``:
    ``out[..., i, ...] = sum_j u[i, j] * t[..., j, ...]``.
    """
    t = as_tensor(t)
    u = np.asarray(u, dtype=np.float64)
    _check_mode(t, n)
    if u.ndim != 2 or u.shape[1] != t.shape[n]:
        raise DimensionError(f"matrix {u.shape} cannot act on mode {n} of size {t.shape[n]}")
    return np.moveaxis(np.tensordot(u, t, axes=(1, n)), 0, n)


def unfold(t, n: int) -> np.ndarray:
    """Mode-``n`` unfolding, shape ``(d_n, prod of the other dims)``.

    Columns enumerate the remaining modes in their original order with
    the last index varying fastest.
    """
    t = as_tensor(t)
    _check_mode(t, n)
    return np.moveaxis(t, n, 0).reshape(t.shape[n], -1)


def fold(m, n: int, shape) -> np.ndarray:
    """Inverse of :func:`unfold`."""
    shape = tuple(int(s) for s in shape)
    if not 0 <= n < len(shape):
        raise DimensionError(f"mode {n} out of range for shape {shape}")
    rest = shape[:n] + shape[n + 1 :]
    m = np.asarray(m, dtype=np.float64)
    if m.shape != (shape[n], int(np.prod(rest))):
        raise DimensionError(f"unfolded shape {m.shape} does not match {shape} at mode {n}")
    return np.moveaxis(m.reshape((shape[n],) + rest), 0, n)


@dataclass
class TensorModel:
    factors: list
    cores: np.ndarray
    mean: np.ndarray
    weights: SampleWeights
    trace: list = field(default_factory=list)
    params: CorrParams | None = None
    converged: bool = True
    iterations: int = 0
    method: str = "corr-tensor"

    @property
    def ranks(self) -> tuple:
        return tuple(u.shape[1] for u in self.factors)


def _stack(samples) -> np.ndarray:
    try:
        x = np.asarray(samples, dtype=np.float64)
    except ValueError as exc:
        raise DimensionError(f"samples do not share one shape: {exc}") from None
    if x.ndim < 2 or x.shape[0] < 2:
        raise DimensionError("need at least two samples with at least one mode")
    if not np.all(np.isfinite(x)):
        raise ValueError("samples contain non-finite entries")
    return x


def _project_batch(xh, factors, skip=None):
    # apply U_m^T along every sample mode except ``skip``
    y = xh
    for m, u in enumerate(factors):
        if m == skip:
            continue
        y = np.moveaxis(np.tensordot(u.T, y, axes=(1, m + 1)), 0, m + 1)
    return y


def _expand_batch(core, factors):
    y = core
    for m, u in enumerate(factors):
        y = np.moveaxis(np.tensordot(u, y, axes=(1, m + 1)), 0, m + 1)
    return y


def _residual_energies(xh, factors):
    d = (xh - _expand_batch(_project_batch(xh, factors), factors)).reshape(xh.shape[0], -1)
    return np.einsum("ij,ij->i", d, d)


def _mode_covariance(y, n, w=None):
    # sum_i w_i unfold_n(y_i) unfold_n(y_i)^T over the batch
    if w is not None:
        y = y * np.sqrt(w).reshape((-1,) + (1,) * (y.ndim - 1))
    blocks = np.moveaxis(y, n + 1, 0).reshape(y.shape[n + 1], -1)
    c = blocks @ blocks.T
    return 0.5 * (c + c.T)


def _sweep(xh, factors, ranks, w=None):
    factors = list(factors)
    for n in range(len(factors)):
        y = _project_batch(xh, factors, skip=n)
        factors[n] = top_k_eigvecs(_mode_covariance(y, n, w), ranks[n])
    return factors


def _check_ranks(shape, ranks):
    ranks = tuple(int(r) for r in ranks)
    if len(ranks) != len(shape):
        raise DimensionError(f"need one rank per mode: shape {shape}, ranks {ranks}")
    if any(not 1 <= r <= d for r, d in zip(ranks, shape)):
        raise DimensionError(f"ranks {ranks} out of range for sample shape {shape}")
    return ranks


def _rel_change(j, j_prev):
    return abs(j - j_prev) / max(j_prev, 1e-15)


def fit_tucker(samples, ranks, config: FitConfig) -> TensorModel:
    """Unweighted alternating fit (HOSVD start, then per-mode eigen-updates).

    For matrix samples this performs the same updates as ``fit_2dsvd``.
    """
    x = _stack(samples)
    ranks = _check_ranks(x.shape[1:], ranks)
    mean = x.mean(axis=0)
    xh = x - mean
    factors = [top_k_eigvecs(_mode_covariance(xh, n), r) for n, r in enumerate(ranks)]
    j_prev = float(np.sum(_residual_energies(xh, factors)))
    trace = [j_prev]
    converged = False
    it = 0
    for it in range(1, config.max_iters + 1):
        factors = _sweep(xh, factors, ranks)
        j = float(np.sum(_residual_energies(xh, factors)))
        trace.append(j)
        if _rel_change(j, j_prev) < config.tol:
            converged = True
            break
        j_prev = j
    if not converged:
        warnings.warn("tucker fit did not reach tolerance", ConvergenceWarning, stacklevel=2)
    e = _residual_energies(xh, factors)
    return TensorModel(
        factors=factors,
        cores=_project_batch(xh, factors),
        mean=mean,
        weights=SampleWeights.uniform(e),
        trace=trace,
        converged=converged,
        iterations=it,
        method="tucker",
    )


def fit_corr_tensor(samples, ranks, config: FitConfig, params: CorrParams) -> TensorModel:
    """Correntropy-robust multi-mode decomposition with a reweighted mean.

    Initialized from :func:`fit_tucker`; every iteration reweights the
    samples from their current residual energies, updates the mean to
    the weighted average, then refreshes each factor in mode order from
    its weighted mode covariance.
    """
    x = _stack(samples)
    ranks = _check_ranks(x.shape[1:], ranks)
    init = fit_tucker(x, ranks, config)
    factors, mean = init.factors, init.mean
    xh = x - mean
    e = _residual_energies(xh, factors)
    j_prev = ct.objective(e, params)
    trace = [j_prev]
    best = (j_prev, factors, mean, xh, e)
    converged = False
    it = 0
    for it in range(1, config.max_iters + 1):
        w = ct.normalized_weights(ct.solver_log_weights(e, params))
        mean = np.tensordot(w, x, axes=1) / np.sum(w)
        xh = x - mean
        factors = _sweep(xh, factors, ranks, w)
        e = _residual_energies(xh, factors)
        j = ct.objective(e, params)
        trace.append(j)
        if j < best[0]:
            best = (j, factors, mean, xh, e)
        if _rel_change(j, j_prev) < config.tol:
            converged = True
            break
        j_prev = j
    if not converged:
        _, factors, mean, xh, e = best
        warnings.warn(
            f"corr-tensor did not reach tolerance in {config.max_iters} iterations; returning best iterate",
            ConvergenceWarning,
            stacklevel=2,
        )
    return TensorModel(
        factors=factors,
        cores=_project_batch(xh, factors),
        mean=mean,
        weights=SampleWeights(np.exp(ct.solver_log_weights(e, params)), e),
        trace=trace,
        params=params,
        converged=converged,
        iterations=it,
    )


def project_tensor(model: TensorModel, x) -> np.ndarray:
    """Core ``(x - mean) x_1 U_1^T ... x_m U_m^T`` for one sample or a batch."""
    x = np.asarray(x, dtype=np.float64)
    m = model.mean.ndim
    if x.shape[-m:] != model.mean.shape or x.ndim not in (m, m + 1):
        raise DimensionError(f"sample shape {x.shape} does not match model shape {model.mean.shape}")
    single = x.ndim == m
    xb = (x - model.mean)[None] if single else x - model.mean
    core = _project_batch(xb, model.factors)
    return core[0] if single else core


def reconstruct_tensor(model: TensorModel, core) -> np.ndarray:
    """``mean + core x_1 U_1 ... x_m U_m``."""
    core = np.asarray(core, dtype=np.float64)
    m = len(model.factors)
    if core.shape[-m:] != model.ranks or core.ndim not in (m, m + 1):
        raise DimensionError(f"core shape {core.shape} does not match ranks {model.ranks}")
    single = core.ndim == m
    out = _expand_batch(core[None] if single else core, model.factors) + model.mean
    return out[0] if single else out


def tensor_reconstruction_error(model: TensorModel, samples, exclude=()) -> float:
    x = np.asarray(samples, dtype=np.float64)
    keep = np.ones(x.shape[0], dtype=bool)
    keep[list(exclude)] = False
    if not keep.any():
        raise DomainError("all samples excluded")
    xs = x[keep]
    d = (xs - reconstruct_tensor(model, project_tensor(model, xs))).reshape(xs.shape[0], -1)
    return float(np.mean(np.einsum("ij,ij->i", d, d)))
