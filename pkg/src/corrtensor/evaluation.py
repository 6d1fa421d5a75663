"""Downstream tasks on fitted cores: center classifier, clustering, metrics."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from . import correntropy as ct
from .correntropy import CorrParams
from .data_io.datasets import derive_rng
from .decomp2d import Decomp2DModel, project
from .errors import DimensionError, DomainError
from .tensor import TensorModel, project_tensor

KMEANS_MAX_ITERS = 300


def _flatten(cores) -> np.ndarray:
    c = np.asarray(cores, dtype=np.float64)
    if c.ndim < 2:
        raise DimensionError("expected a stack of cores")
    return c.reshape(c.shape[0], -1)


# ---------------------------------------------------------------- classifier


@dataclass
class ClassifierModel:
    class_centers: np.ndarray
    class_ids: np.ndarray
    params: CorrParams
    decomp: Decomp2DModel | TensorModel

    def log_similarities(self, x) -> np.ndarray:
        """``log d_c`` for each class; rows per sample when ``x`` is a stack."""
        if isinstance(self.decomp, TensorModel):
            m = project_tensor(self.decomp, x)
        else:
            m = project(self.decomp, x)
        single = m.ndim == self.class_centers.ndim - 1
        flat = m.reshape(1 if single else m.shape[0], -1)
        centers = self.class_centers.reshape(self.class_centers.shape[0], -1)
        d2 = np.sum((flat[:, None, :] - centers[None, :, :]) ** 2, axis=2)
        out = math.log(self.params.gamma) - self.params.lam * d2 ** (0.5 * self.params.alpha)
        return out[0] if single else out

    def similarities(self, x) -> np.ndarray:
        """Kernel similarity ``gamma * exp(-lam * ||M - M_c||_F^alpha)``."""
        return np.exp(self.log_similarities(x))


def fit_classifier(decomp: Decomp2DModel | TensorModel, labels, params: CorrParams, uniform_weights: bool | None = None) -> ClassifierModel:
    """Per-class weighted centers of the training cores.

    Weights come from each sample's residual energy under the final
    model. Models fitted without correntropy get uniform weights unless
    ``uniform_weights`` says otherwise. Negative labels mark unlabeled
    samples (e.g. injected dummies) and are left out of every center.
    """
    labels = np.asarray(labels)
    if labels.shape != (decomp.cores.shape[0],):
        raise DimensionError("need exactly one label per training sample")
    if uniform_weights is None:
        uniform_weights = decomp.params is None
    if uniform_weights:
        log_w = np.zeros(labels.shape[0])
    else:
        log_w = ct.log_sample_weight(decomp.weights.residuals, params)
    ids = np.unique(labels[labels >= 0])
    if ids.size == 0:
        raise DomainError("no labeled training samples")
    centers = []
    for c in ids:
        idx = np.flatnonzero(labels == c)
        if idx.size == 0:
            raise DomainError(f"class {c} has no samples")
        w = ct.normalized_weights(log_w[idx])
        centers.append(np.tensordot(w, decomp.cores[idx], axes=1) / np.sum(w))
    return ClassifierModel(np.stack(centers), ids, params, decomp)


def classify(model: ClassifierModel, x):
    """Label of the class center with the largest similarity.

    Ties go to the lowest class id. Accepts one sample or a stack.
    """
    s = model.log_similarities(x)
    return model.class_ids[np.argmax(s, axis=-1)]


def confusion_matrix(truth, pred, classes) -> np.ndarray:
    index = {c: i for i, c in enumerate(classes)}
    out = np.zeros((len(classes), len(classes)), dtype=np.int64)
    for t, p in zip(truth, pred):
        out[index[t], index[p]] += 1
    return out


# ------------------------------------------------------------------ metrics


def _check_pair(truth, pred):
    truth = np.asarray(truth)
    pred = np.asarray(pred)
    if truth.shape != pred.shape or truth.ndim != 1:
        raise DimensionError("label sequences must be 1-D and of equal length")
    if truth.size == 0:
        raise DomainError("label sequences are empty")
    return truth, pred


def _contingency(truth, pred):
    t_ids, t_inv = np.unique(truth, return_inverse=True)
    p_ids, p_inv = np.unique(pred, return_inverse=True)
    table = np.zeros((t_ids.size, p_ids.size), dtype=np.int64)
    np.add.at(table, (t_inv, p_inv), 1)
    return t_ids, p_ids, table


def clustering_accuracy(truth, pred):
    """Best-match accuracy under a one-to-one relabeling of ``pred``.

    Returns ``(ac, mapping)`` with ``mapping[pred_label] = truth_label``.
    Predicted clusters left unmatched (more clusters than classes) count
    as errors.
    """
    truth, pred = _check_pair(truth, pred)
    t_ids, p_ids, table = _contingency(truth, pred)
    rows, cols = linear_sum_assignment(table, maximize=True)
    mapping = {p_ids[c].item(): t_ids[r].item() for r, c in zip(rows, cols)}
    return float(table[rows, cols].sum()) / truth.size, mapping


def _entropy_bits(counts, n):
    p = counts[counts > 0] / n
    return float(-np.sum(p * np.log2(p)))


def nmi(truth, pred) -> float:
    """Mutual information normalized by the mean of the two entropies (bits).

    Returns 1 when both labelings consist of a single cluster, and
    exactly 1 whenever they are the same partition up to relabeling.
    """
    truth, pred = _check_pair(truth, pred)
    _, _, table = _contingency(truth, pred)
    nz_cells = table > 0
    if table.shape[0] == table.shape[1] and np.all(nz_cells.sum(axis=0) == 1) and np.all(nz_cells.sum(axis=1) == 1):
        return 1.0
    n = truth.size
    h_s = _entropy_bits(table.sum(axis=1), n)
    h_t = _entropy_bits(table.sum(axis=0), n)
    if h_s + h_t == 0.0:
        return 1.0
    pj = table / n
    outer = np.outer(table.sum(axis=1), table.sum(axis=0)) / float(n) ** 2
    nz = pj > 0
    mi = float(np.sum(pj[nz] * np.log2(pj[nz] / outer[nz])))
    return float(min(1.0, max(0.0, mi / (0.5 * (h_s + h_t)))))


# --------------------------------------------------------------- clustering


@dataclass
class DensityPeaks:
    rho: np.ndarray
    delta: np.ndarray
    d_cut: float
    selected: np.ndarray

    def decision_graph_rows(self):
        chosen = set(self.selected.tolist())
        for i, (r, d) in enumerate(zip(self.rho, self.delta)):
            yield i, int(r), float(d), int(i in chosen)


def pairwise_distances(points) -> np.ndarray:
    flat = _flatten(points)
    sq = np.einsum("ij,ij->i", flat, flat)
    d2 = sq[:, None] + sq[None, :] - 2.0 * flat @ flat.T
    np.fill_diagonal(d2, 0.0)
    d = np.sqrt(np.maximum(d2, 0.0))
    return 0.5 * (d + d.T)


def density_peak_init(cores, k: int, neighbor_fraction: float = 0.02):
    """Pick ``k`` initial centers with high local density and large separation.

    ``d_cut`` is the pairwise-distance quantile at which the average
    neighbour count is about ``neighbor_fraction * N``. ``rho_i`` counts
    the points (itself included) within ``d_cut``. Points are ranked by
    ``rho`` with ties broken by index; ``delta_i`` is the distance to
    the nearest higher-ranked point, and the top point gets its largest
    distance to any point. The ``k`` largest ``rho * delta`` win.
    """
    flat = _flatten(cores)
    n = flat.shape[0]
    if not 1 <= k <= n:
        raise DimensionError(f"k={k} out of range for {n} points")
    if not 0.0 < neighbor_fraction < 1.0:
        raise DomainError("neighbor_fraction must lie in (0, 1)")
    d = pairwise_distances(flat)
    iu = np.triu_indices(n, 1)
    pair_d = np.sort(d[iu])
    if pair_d.size == 0 or pair_d[-1] == 0.0:
        raise DomainError("all points are identical; density peaks are undefined")
    pos = min(max(int(round(neighbor_fraction * pair_d.size)), 1), pair_d.size) - 1
    d_cut = float(pair_d[pos])
    rho = np.sum(d <= d_cut, axis=1)
    order = np.lexsort((np.arange(n), -rho))
    delta = np.empty(n)
    delta[order[0]] = np.max(d[order[0]])
    for r in range(1, n):
        i = order[r]
        delta[i] = np.min(d[i, order[:r]])
    score = rho * delta
    selected = np.lexsort((np.arange(n), -score))[:k]
    centers = flat[selected].reshape((k,) + np.asarray(cores).shape[1:])
    return centers, DensityPeaks(rho, delta, d_cut, selected)


@dataclass
class KMeansResult:
    labels: np.ndarray
    centers: np.ndarray
    iterations: int
    objective: list


def kmeans(cores, k: int, init_centers=None, seed: int = 0) -> KMeansResult:
    """Lloyd iterations on Frobenius distance between cores.

    Runs until assignments stop changing or for 300 iterations. An empty
    cluster is re-seeded with the point farthest from its current center.
    Without ``init_centers``, ``k`` distinct points are drawn using ``seed``.
    """
    shape = np.asarray(cores).shape[1:]
    flat = _flatten(cores)
    n = flat.shape[0]
    if not 1 <= k <= n:
        raise DimensionError(f"k={k} out of range for {n} points")
    if init_centers is None:
        rng = derive_rng(seed, "kmeans/init")
        centers = flat[np.sort(rng.choice(n, size=k, replace=False))].copy()
    else:
        centers = _flatten(init_centers).copy()
        if centers.shape != (k, flat.shape[1]):
            raise DimensionError(f"need {k} initial centers of the core shape")
    labels = None
    objective = []
    it = 0
    for it in range(1, KMEANS_MAX_ITERS + 1):
        d2 = np.sum((flat[:, None, :] - centers[None, :, :]) ** 2, axis=2)
        new = np.argmin(d2, axis=1)
        counts = np.bincount(new, minlength=k)
        for c in np.flatnonzero(counts == 0):
            own = d2[np.arange(n), new]
            far = int(np.argmax(own))
            new[far] = c
            d2[far, c] = 0.0
            counts = np.bincount(new, minlength=k)
        objective.append(float(np.sum(np.sum((flat - centers[new]) ** 2, axis=1))))
        if labels is not None and np.array_equal(new, labels):
            break
        labels = new
        for c in range(k):
            centers[c] = flat[labels == c].mean(axis=0)
    return KMeansResult(labels, centers.reshape((k,) + shape), it, objective)


@dataclass
class ClusterReport:
    labels: np.ndarray
    centers: np.ndarray
    ac: float
    nmi: float
    mapping: dict
    iterations: int
    peaks: DensityPeaks | None = None
    similarity: np.ndarray | None = None
    order: np.ndarray | None = None


def similarity_matrix(cores, params: CorrParams) -> np.ndarray:
    """Pairwise kernel similarity between cores, scaled to a unit diagonal."""
    d = pairwise_distances(cores)
    return np.exp(-params.lam * d**params.alpha)


def cluster_cores(cores, truth_labels, k: int, params: CorrParams, neighbor_fraction: float = 0.02) -> ClusterReport:
    """Density-peak seeding, k-means, then AC/NMI against ``truth_labels``."""
    truth = np.asarray(truth_labels)
    if truth.shape != (np.asarray(cores).shape[0],):
        raise DimensionError("need one truth label per core")
    init, peaks = density_peak_init(cores, k, neighbor_fraction)
    km = kmeans(cores, k, init)
    ac, mapping = clustering_accuracy(truth, km.labels)
    order = np.argsort(km.labels, kind="stable")
    sim = similarity_matrix(np.asarray(cores)[order], params)
    return ClusterReport(
        labels=km.labels,
        centers=km.centers,
        ac=ac,
        nmi=nmi(truth, km.labels),
        mapping=mapping,
        iterations=km.iterations,
        peaks=peaks,
        similarity=sim,
        order=order,
    )


def cluster_pipeline(decomp: Decomp2DModel, truth_labels, k: int, params: CorrParams, neighbor_fraction: float = 0.02) -> ClusterReport:
    """Cluster the training cores of ``decomp``."""
    return cluster_cores(decomp.cores, truth_labels, k, params, neighbor_fraction)
