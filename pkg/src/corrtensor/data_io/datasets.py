"""Datasets, seeded random streams, outlier injection and stratified splits."""

from __future__ import annotations

import hashlib
import json
import re
import zlib
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from ..errors import DomainError, FormatError


def derive_rng(seed: int, tag: str) -> np.random.Generator:
    """PCG64 stream keyed by ``(seed, tag)``.

    Each stochastic operation uses its own tag, so adding a new
    operation never shifts the stream another one sees.
    """
    if not 0 <= int(seed) < 2**64:
        raise DomainError("seed must be a 64-bit unsigned integer")
    key = zlib.crc32(tag.encode("utf-8"))
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), key])))


@dataclass(frozen=True)
class Dataset:
    """Stacked samples (N, ...) with optional labels and an outlier mask.

    Injected dummy samples carry label ``-1``.
    """

    samples: np.ndarray
    labels: np.ndarray | None = None
    outlier_mask: np.ndarray | None = None
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        x = np.asarray(self.samples, dtype=np.float64)
        if x.ndim < 2:
            raise DomainError("samples must be stacked as (N, ...)")
        object.__setattr__(self, "samples", x)
        mask = np.zeros(x.shape[0], dtype=bool) if self.outlier_mask is None else np.asarray(self.outlier_mask, dtype=bool)
        if mask.shape != (x.shape[0],):
            raise DomainError("outlier_mask length must equal sample count")
        object.__setattr__(self, "outlier_mask", mask)
        if self.labels is not None:
            lab = np.asarray(self.labels, dtype=np.int64)
            if lab.shape != (x.shape[0],):
                raise DomainError("labels length must equal sample count")
            object.__setattr__(self, "labels", lab)

    def __len__(self):
        return self.samples.shape[0]

    @property
    def sample_shape(self):
        return self.samples.shape[1:]

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=np.int64)
        return Dataset(
            self.samples[idx],
            None if self.labels is None else self.labels[idx],
            self.outlier_mask[idx],
            dict(self.provenance),
        )

    def inliers(self) -> "Dataset":
        return self.subset(np.flatnonzero(~self.outlier_mask))


OUTLIER_KINDS = ("dummy", "block", "magnitude")


@dataclass(frozen=True)
class OutlierSpec:
    """How to corrupt a dataset.

    ``dummy`` appends ``count`` uniform [0, 1] samples. ``block`` overwrites
    a random rectangle covering ``block_area_fraction`` of the image with
    black/white noise in ``fraction`` of the samples. ``magnitude``
    multiplies ``fraction`` of the samples by ``magnitude``.
    """

    kind: str
    count: int = 0
    fraction: float = 0.0
    magnitude: float = 50.0
    block_area_fraction: float = 0.25
    seed: int = 0

    def __post_init__(self):
        if self.kind not in OUTLIER_KINDS:
            raise DomainError(f"unknown outlier kind {self.kind!r}")
        if self.kind == "dummy" and self.count < 0:
            raise DomainError("dummy count must be >= 0")
        if self.kind in ("block", "magnitude") and not 0.0 < self.fraction <= 1.0:
            raise DomainError("fraction must lie in (0, 1]")
        if self.kind == "magnitude" and not self.magnitude > 0:
            raise DomainError("magnitude must be positive")
        if self.kind == "block" and not 0.0 < self.block_area_fraction < 1.0:
            raise DomainError("block_area_fraction must lie in (0, 1)")

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "count": self.count,
            "fraction": self.fraction,
            "magnitude": self.magnitude,
            "block_area_fraction": self.block_area_fraction,
            "seed": self.seed,
        }


_SPEC_KEYS = {"count": "count", "n": "count", "fraction": "fraction", "frac": "fraction",
              "m": "magnitude", "magnitude": "magnitude", "area": "block_area_fraction"}


def parse_outlier_spec(text: str, seed: int = 0) -> OutlierSpec | None:
    """Parse ``kind:params`` such as ``dummy:30`` or ``magnitude:fraction=0.05,m=50``.

    Returns ``None`` for ``none``.
    """
    text = text.strip()
    if text in ("", "none"):
        return None
    kind, _, rest = text.partition(":")
    kwargs = {}
    for item in filter(None, (s.strip() for s in rest.split(","))):
        key, eq, val = item.partition("=")
        if not eq:
            key, val = ("count" if kind == "dummy" else "fraction"), key
        if key not in _SPEC_KEYS:
            raise DomainError(f"unknown outlier parameter {key!r}")
        name = _SPEC_KEYS[key]
        try:
            kwargs[name] = int(val) if name == "count" else float(val)
        except ValueError:
            raise DomainError(f"bad value {val!r} for {key}") from None
    return OutlierSpec(kind=kind, seed=seed, **kwargs)


def _pick(rng, n, fraction):
    count = int(round(fraction * n))
    if count < 1:
        raise DomainError(f"fraction {fraction} of {n} samples selects no sample")
    return np.sort(rng.choice(n, size=count, replace=False))


def inject_outliers(data: Dataset, spec: OutlierSpec | None) -> Dataset:
    """Return a corrupted copy of ``data``; the input is left untouched."""
    if spec is None:
        return data
    rng = derive_rng(spec.seed, f"outliers/{spec.kind}")
    x = data.samples.copy()
    mask = data.outlier_mask.copy()
    labels = None if data.labels is None else data.labels.copy()
    prov = dict(data.provenance)
    prov["outliers"] = spec.to_dict()
    if spec.kind == "dummy":
        dummies = rng.uniform(0.0, 1.0, size=(spec.count,) + x.shape[1:])
        x = np.concatenate([x, dummies])
        mask = np.concatenate([mask, np.ones(spec.count, dtype=bool)])
        if labels is not None:
            labels = np.concatenate([labels, -np.ones(spec.count, dtype=np.int64)])
        return Dataset(x, labels, mask, prov)
    idx = _pick(rng, x.shape[0], spec.fraction)
    if spec.kind == "magnitude":
        x[idx] *= spec.magnitude
    else:
        h, w = x.shape[1:3]
        side = np.sqrt(spec.block_area_fraction)
        bh, bw = max(1, int(round(h * side))), max(1, int(round(w * side)))
        for i in idx:
            top = int(rng.integers(0, h - bh + 1))
            left = int(rng.integers(0, w - bw + 1))
            dots = rng.integers(0, 2, size=(bh, bw)).astype(np.float64)
            # one black/white value per pixel across any trailing channels
            x[i, top : top + bh, left : left + bw] = dots.reshape((bh, bw) + (1,) * (x.ndim - 3))
    mask[idx] = True
    return Dataset(x, labels, mask, prov)


def split(data: Dataset, per_class: int | None = None, fraction: float | None = None,
          seed: int = 0, test_per_class: int | None = None):
    """Stratified, seeded train/test split.

    Give either ``per_class`` (training count per class) or ``fraction``
    (training share per class). The test set takes the rest, capped at
    ``test_per_class`` per class when given.
    """
    if data.labels is None:
        raise DomainError("split needs labels")
    if (per_class is None) == (fraction is None):
        raise DomainError("give exactly one of per_class or fraction")
    rng = derive_rng(seed, "split")
    train, test = [], []
    for c in np.unique(data.labels):
        idx = np.flatnonzero(data.labels == c)
        n_train = per_class if per_class is not None else int(round(fraction * idx.size))
        need = n_train + (test_per_class or 0)
        if n_train < 0 or need > idx.size:
            raise DomainError(f"class {c} has {idx.size} samples, {need} requested")
        perm = rng.permutation(idx)
        train.append(perm[:n_train])
        rest = perm[n_train:]
        test.append(rest if test_per_class is None else rest[:test_per_class])
    return data.subset(np.sort(np.concatenate(train))), data.subset(np.sort(np.concatenate(test)))


def synthetic_lowrank(n_classes: int, per_class: int, shape=(16, 16), ranks=None, noise=0.01,
                      class_scale=0.0, within_scale=0.6, decay=0.7, offset=0.5, seed=0) -> Dataset:
    """Structured images ``offset + core x_1 U_1 ... x_m U_m + noise``.

    All classes share orthonormal factors ``U_n``. A sample's core is its
    class core (entries with std ``class_scale``) plus variation whose
    std decays geometrically with the core index along every mode.
    """
    shape = tuple(int(s) for s in shape)
    ranks = tuple(ranks) if ranks is not None else tuple(max(1, s // 2) for s in shape)
    rng = derive_rng(seed, "synthetic/lowrank")
    factors = [np.linalg.qr(rng.normal(size=(d, r)))[0] for d, r in zip(shape, ranks)]
    grids = np.meshgrid(*[np.arange(r) for r in ranks], indexing="ij")
    spread = within_scale * decay ** (0.5 * sum(grids))
    class_cores = class_scale * rng.normal(size=(n_classes,) + ranks)
    samples, labels = [], []
    for c in range(n_classes):
        for _ in range(per_class):
            core = class_cores[c] + spread * rng.normal(size=ranks)
            img = core
            for m, u in enumerate(factors):
                img = np.moveaxis(np.tensordot(u, img, axes=(1, m)), 0, m)
            samples.append(offset + img + noise * rng.normal(size=shape))
            labels.append(c)
    prov = {"source": "synthetic-lowrank", "seed": int(seed), "shape": list(shape), "ranks": list(ranks),
            "n_classes": n_classes, "per_class": per_class, "noise": noise, "class_scale": class_scale}
    return Dataset(np.stack(samples), np.asarray(labels), None, prov)


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(path, payload: dict, files=()):
    """JSON manifest with SHA-256 checksums of ``files``."""
    doc = dict(payload)
    doc["files"] = {str(f): sha256_file(f) for f in files}
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


_PREFIX = re.compile(r"^([^_.\-]+)")


def labels_from_names(names) -> np.ndarray:
    """Integer labels from the filename prefix before the first ``_``, ``.`` or ``-``."""
    prefixes = []
    for n in names:
        m = _PREFIX.match(n)
        if not m:
            raise FormatError(f"cannot derive a label from {n!r}")
        prefixes.append(m.group(1))
    ids = {p: i for i, p in enumerate(sorted(set(prefixes)))}
    return np.asarray([ids[p] for p in prefixes], dtype=np.int64)


def read_label_file(path) -> np.ndarray:
    """Labels from an IDX label file or a text file with one integer per line."""
    from .idx import LABELS_MAGIC, _read_bytes, parse_idx

    buf = _read_bytes(path)
    if buf[:4] == LABELS_MAGIC.to_bytes(4, "big"):
        return parse_idx(buf, LABELS_MAGIC).astype(np.int64)
    try:
        return np.asarray([int(s) for s in buf.decode("ascii").split()], dtype=np.int64)
    except (UnicodeDecodeError, ValueError):
        raise FormatError(f"{path}: not an IDX or whitespace-separated integer label file") from None


def load_dataset(path, labels=None) -> Dataset:
    """Load IDX images, or a directory of PGM/PPM files.

    ``labels`` is a label-file path, ``"prefix"`` (derive from
    filenames), or ``None``.
    """
    from .idx import load_idx_images
    from .pnm import load_pgm_dir, load_ppm_dir

    p = Path(path)
    names = None
    if p.is_dir():
        if any(f.suffix.lower() == ".ppm" for f in p.iterdir()):
            x, names = load_ppm_dir(p)
        else:
            x, names = load_pgm_dir(p)
    else:
        x = load_idx_images(p)
    lab = None
    if labels == "prefix":
        if names is None:
            raise DomainError("prefix labels need an image directory")
        lab = labels_from_names(names)
    elif labels is not None:
        lab = read_label_file(labels)
        if lab.shape[0] != x.shape[0]:
            raise FormatError(f"{x.shape[0]} images but {lab.shape[0]} labels")
    return Dataset(x, lab, None, {"source": str(p), "labels": None if labels is None else str(labels)})


def with_provenance(data: Dataset, **extra) -> Dataset:
    prov = dict(data.provenance)
    prov.update(extra)
    return replace(data, provenance=prov)
