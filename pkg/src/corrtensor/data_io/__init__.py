"""Dataset ingestion, outlier injection and splitting."""

from .datasets import (
    Dataset,
    OutlierSpec,
    derive_rng,
    inject_outliers,
    load_dataset,
    parse_outlier_spec,
    split,
    synthetic_lowrank,
    write_manifest,
)
from .idx import load_idx_images, load_idx_labels, load_mnist, write_idx_images, write_idx_labels
from .pnm import load_pgm_dir, load_ppm_dir, read_pnm, write_pnm

__all__ = [
    "Dataset",
    "OutlierSpec",
    "derive_rng",
    "inject_outliers",
    "load_dataset",
    "load_idx_images",
    "load_idx_labels",
    "load_mnist",
    "load_pgm_dir",
    "load_ppm_dir",
    "parse_outlier_spec",
    "read_pnm",
    "split",
    "synthetic_lowrank",
    "write_idx_images",
    "write_idx_labels",
    "write_manifest",
    "write_pnm",
]
