"""Generalized Gaussian kernel, correntropy losses and sample reweighting.

Residual energies ``e`` passed to the weight functions are squared
Frobenius norms, so the kernel exponent acts on ``e ** (alpha / 2)``.
The loss functions take plain (signed) residuals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError

E_FLOOR = 1e-12

# Lanczos approximation, g = 7, n = 9
_LANCZOS_G = 7.0
_LANCZOS_COEF = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)


def gamma_function(z: float) -> float:
    """Gamma function for ``z > 0`` via the Lanczos approximation."""
    z = float(z)
    if not z > 0.0 or not math.isfinite(z):
        raise DomainError(f"gamma_function requires a finite z > 0, got {z}")
    if z < 0.5:
        # reflection keeps the series in its accurate range
        return math.pi / (math.sin(math.pi * z) * gamma_function(1.0 - z))
    z -= 1.0
    x = _LANCZOS_COEF[0]
    for i, c in enumerate(_LANCZOS_COEF[1:], start=1):
        x += c / (z + i)
    t = z + _LANCZOS_G + 0.5
    return math.sqrt(2.0 * math.pi) * t ** (z + 0.5) * math.exp(-t) * x


@dataclass(frozen=True)
class CorrParams:
    """Kernel configuration.

    Parameters
    ----------
    alpha : float
        Error power of the generalized Gaussian kernel.
    beta : float
        Kernel width.
    p : float
        Loss power; ``p = 2`` is the plain correntropy loss.
    """

    alpha: float
    beta: float
    p: float = 2.0
    lam: float = field(init=False)
    gamma: float = field(init=False)

    def __post_init__(self):
        for name in ("alpha", "beta", "p"):
            v = float(getattr(self, name))
            if not (v > 0.0 and math.isfinite(v)):
                raise DomainError(f"{name} must be a finite positive number, got {v}")
            object.__setattr__(self, name, v)
        lam = self.beta ** (-self.alpha)
        gamma = self.alpha / (2.0 * self.beta * gamma_function(1.0 / self.alpha))
        if not (math.isfinite(lam) and lam > 0.0 and math.isfinite(gamma) and gamma > 0.0):
            raise DomainError(f"kernel constants overflow for alpha={self.alpha}, beta={self.beta}")
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "gamma", gamma)

    def to_dict(self) -> dict:
        return {"alpha": self.alpha, "beta": self.beta, "p": self.p}


@dataclass(frozen=True)
class SampleWeights:
    """Per-sample weights and the residual energies they were computed from."""

    weights: np.ndarray
    residuals: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        r = np.asarray(self.residuals, dtype=np.float64)
        if w.shape != r.shape or w.ndim != 1:
            raise DomainError("weights and residuals must be 1-D and of equal length")
        if not (np.all(np.isfinite(w)) and np.all(w >= 0) and np.all(np.isfinite(r)) and np.all(r >= 0)):
            raise DomainError("weights and residuals must be finite and non-negative")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "residuals", r)

    @classmethod
    def uniform(cls, residuals) -> "SampleWeights":
        r = np.asarray(residuals, dtype=np.float64)
        return cls(np.ones_like(r), r)


def ggd_kernel(e, params: CorrParams):
    """``gamma * exp(-lam * |e| ** alpha)``, elementwise."""
    e = np.abs(np.asarray(e, dtype=np.float64))
    out = params.gamma * np.exp(-params.lam * e**params.alpha)
    return float(out) if out.ndim == 0 else out


def _kernel_gap(residuals, params: CorrParams) -> np.ndarray:
    # gamma - G(e) computed as -gamma*expm1(.) to avoid cancellation near e = 0
    r = np.abs(np.asarray(residuals, dtype=np.float64)).ravel()
    if r.size == 0:
        raise DomainError("loss needs at least one residual")
    return -params.gamma * np.expm1(-params.lam * r**params.alpha)


def corr_loss(residuals, params: CorrParams) -> float:
    """Correntropy loss ``gamma - mean(G(e_i))``."""
    return float(np.mean(_kernel_gap(residuals, params)))


def corr_ploss(residuals, params: CorrParams) -> float:
    """Order-``p`` loss ``mean((gamma - G(e_i)) ** (p / 2))``."""
    gap = _kernel_gap(residuals, params)
    if params.p == 2.0:
        return float(np.mean(gap))
    return float(np.mean(gap ** (0.5 * params.p)))


def objective(energies, params: CorrParams) -> float:
    """Solver objective on residual energies (squared norms)."""
    e = np.maximum(np.asarray(energies, dtype=np.float64), 0.0)
    return corr_ploss(np.sqrt(e), params)


def _check_energy(e) -> np.ndarray:
    e = np.asarray(e, dtype=np.float64)
    if np.any(~np.isfinite(e)) or np.any(e < 0):
        raise DomainError("residual energies must be finite and non-negative")
    return e


def log_sample_weight(e, params: CorrParams):
    """Natural log of :func:`sample_weight` (no underflow for large ``e``)."""
    e = np.maximum(_check_energy(e), E_FLOOR)
    h = 0.5 * params.alpha
    return -params.lam * e**h + (h - 1.0) * np.log(e)


def sample_weight(e, params: CorrParams):
    """Reweighting ``exp(-lam * e**(a/2)) * e**(a/2 - 1)`` on clamped energies.

    ``e`` below ``E_FLOOR`` is clamped so weights stay finite for
    ``alpha < 2``.
    """
    out = np.exp(log_sample_weight(e, params))
    return float(out) if out.ndim == 0 else out


def log_sample_weight_p(e, params: CorrParams):
    """Natural log of :func:`sample_weight_p`; ``-inf`` where the weight is 0."""
    e = np.maximum(_check_energy(e), E_FLOOR)
    h = 0.5 * params.alpha
    u = params.lam * e**h
    base = math.log(params.gamma) - u + (h - 1.0) * np.log(e)
    if params.p == 2.0:
        return base
    gap = -params.gamma * np.expm1(-u)
    with np.errstate(divide="ignore"):
        return math.log(0.5 * params.p) + (0.5 * params.p - 1.0) * np.log(gap) + base


def sample_weight_p(e, params: CorrParams):
    """Weight for the order-``p`` loss, from the chain rule on ``(gamma - G)**(p/2)``.

    Equals ``gamma * sample_weight(e)`` when ``p == 2``.
    """
    out = np.exp(log_sample_weight_p(e, params))
    return float(out) if out.ndim == 0 else out


def solver_log_weights(e, params: CorrParams) -> np.ndarray:
    """Log-weights used by the robust fitters (order-``p`` aware)."""
    if params.p == 2.0:
        return np.atleast_1d(log_sample_weight(e, params))
    return np.atleast_1d(log_sample_weight_p(e, params))


def normalized_weights(log_w) -> np.ndarray:
    """``exp(log_w - max(log_w))``; a positive rescaling safe from underflow."""
    log_w = np.asarray(log_w, dtype=np.float64)
    top = np.max(log_w)
    if not np.isfinite(top):
        return np.ones_like(log_w)
    return np.exp(log_w - top)
