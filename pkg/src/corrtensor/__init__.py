"""Generalized-correntropy robust 2D and N-way tensor decomposition."""

__version__ = "0.1.0"

from .correntropy import CorrParams, SampleWeights, corr_loss, corr_ploss, ggd_kernel, sample_weight
from .decomp2d import (
    Decomp2DModel,
    FitConfig,
    fit_2dpca,
    fit_2dsvd,
    fit_corr_2dsvd,
    fit_r1_2dsvd,
    project,
    reconstruct,
    reconstruction_error,
)
from .errors import (
    ConvergenceError,
    ConvergenceWarning,
    CorrTensorError,
    DimensionError,
    DomainError,
    FormatError,
    SymmetryError,
)
from .evaluation import classify, clustering_accuracy, cluster_pipeline, fit_classifier, kmeans, nmi
from .modelio import load_model, save_model
from .tensor import TensorModel, fit_corr_tensor, fit_tucker, mode_n_product, project_tensor, reconstruct_tensor

__all__ = [
    "ConvergenceError", "ConvergenceWarning", "CorrParams", "CorrTensorError", "Decomp2DModel",
    "DimensionError", "DomainError", "FitConfig", "FormatError", "SampleWeights", "SymmetryError",
    "TensorModel", "classify", "cluster_pipeline", "clustering_accuracy", "corr_loss", "corr_ploss",
    "fit_2dpca", "fit_2dsvd", "fit_classifier", "fit_corr_2dsvd", "fit_corr_tensor", "fit_r1_2dsvd",
    "fit_tucker", "ggd_kernel", "kmeans", "load_model", "mode_n_product", "nmi", "project",
    "project_tensor", "reconstruct", "reconstruct_tensor", "reconstruction_error", "sample_weight",
    "save_model",
]
