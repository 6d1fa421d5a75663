import warnings

import numpy as np
import pytest

from corrtensor import correntropy as ct
from corrtensor.correntropy import CorrParams
from corrtensor.data_io import OutlierSpec, inject_outliers, synthetic_lowrank
from corrtensor.decomp2d import (
    FitConfig,
    fit_2dpca,
    fit_2dsvd,
    fit_corr_2dsvd,
    fit_method,
    fit_r1_2dsvd,
    project,
    reconstruct,
    reconstruction_error,
    residual_energies,
)
from corrtensor.errors import ConvergenceWarning, DimensionError, DomainError
from corrtensor.linalg import orthonormality_error, principal_angles

from conftest import projector

FITTERS = {
    "2dsvd": lambda x, c: fit_2dsvd(x, c),
    "r1-2dsvd": lambda x, c: fit_r1_2dsvd(x, c),
    "corr-2dsvd": lambda x, c: fit_corr_2dsvd(x, c, CorrParams(1.6, 0.8)),
}


@pytest.fixture
def samples(rng):
    return rng.normal(size=(15, 7, 6))


@pytest.mark.parametrize("name", sorted(FITTERS))
def test_model_invariants(name, samples):
    m = FITTERS[name](samples, FitConfig(3, 2))
    assert orthonormality_error(m.left) <= 1e-10
    assert orthonormality_error(m.right) <= 1e-10
    assert m.cores.shape == (15, 3, 2)
    np.testing.assert_allclose(m.cores, m.left.T @ (samples - m.mean) @ m.right, atol=1e-10)
    np.testing.assert_allclose(m.weights.residuals, residual_energies(samples - m.mean, m.left, m.right), atol=1e-10)
    assert m.ranks == (3, 2) and m.shape == (7, 6)


@pytest.mark.parametrize("name", sorted(FITTERS))
def test_full_rank_reconstructs(name, samples):
    m = FITTERS[name](samples, FitConfig(7, 6))
    assert reconstruction_error(m, samples) <= 1e-10
    np.testing.assert_allclose(reconstruct(m, project(m, samples[0])), samples[0], atol=1e-10)


def test_2dpca_examples(rng):
    x = rng.normal(size=(10, 6, 5))
    m = fit_2dpca(x, 5)
    assert reconstruction_error(m, x) <= 1e-10
    np.testing.assert_array_equal(m.left, np.eye(6))
    np.testing.assert_array_equal(m.weights.weights, np.ones(10))
    # centered samples supported on the first two columns
    y = np.zeros((8, 6, 5))
    y[:, :, :2] = rng.normal(size=(8, 6, 2))
    y -= y.mean(axis=0)
    m = fit_2dpca(y + 3.0, 2)
    e = np.eye(5)[:, :2]
    np.testing.assert_allclose(projector(m.right), projector(e), atol=1e-12)
    same = np.stack([y[0], y[0]])
    m = fit_2dpca(same, 2)
    assert orthonormality_error(m.right) <= 1e-10
    assert reconstruction_error(m, same) <= 1e-20


def test_2dsvd_rank_one_recovery(rng):
    u = rng.normal(size=8)
    v = rng.normal(size=5)
    c = rng.normal(size=12)
    mean = rng.normal(size=(8, 5))
    x = c[:, None, None] * np.outer(u, v) + mean
    m = fit_2dsvd(x, FitConfig(1, 1))
    assert np.sum(m.weights.residuals) <= 1e-10
    assert principal_angles(m.left, u[:, None] / np.linalg.norm(u))[0] < 1e-7
    assert principal_angles(m.right, v[:, None] / np.linalg.norm(v))[0] < 1e-7


@pytest.mark.parametrize("seed", range(5))
def test_2dsvd_objective_non_increasing(seed):
    x = np.random.default_rng(seed).normal(size=(20, 9, 8))
    m = fit_2dsvd(x, FitConfig(3, 3, tol=1e-12, max_iters=200))
    tr = np.asarray(m.trace)
    assert np.all(np.diff(tr) <= 1e-10 * tr[0])


def test_error_monotone_in_npc(rng):
    x = rng.normal(size=(25, 10, 10))
    errs = [reconstruction_error(fit_2dsvd(x, FitConfig(k, k)), x) for k in range(1, 11)]
    assert np.all(np.diff(errs) <= 1e-12)


def test_reconstruction_error_exclude(rng, samples):
    m = fit_2dsvd(samples, FitConfig(2, 2))
    only = reconstruction_error(m, samples, exclude=range(1, 15))
    assert only == pytest.approx(m.weights.residuals[0], rel=1e-10)
    d = samples[3] - reconstruct(m, project(m, samples[3]))
    assert np.sum(d * d) == pytest.approx(m.weights.residuals[3], rel=1e-8)
    with pytest.raises(DomainError):
        reconstruction_error(m, samples, exclude=range(15))
    with pytest.raises(DimensionError):
        reconstruction_error(m, samples, exclude=[99])


def test_project_reconstruct_basics(samples):
    m = fit_2dsvd(samples, FitConfig(3, 3))
    np.testing.assert_array_equal(project(m, m.mean), np.zeros((3, 3)))
    np.testing.assert_array_equal(reconstruct(m, np.zeros((3, 3))), m.mean)
    np.testing.assert_allclose(reconstruct(m, project(m, samples[2])), m.left @ m.cores[2] @ m.right.T + m.mean, atol=1e-12)
    with pytest.raises(DimensionError):
        project(m, np.zeros((6, 7)))
    with pytest.raises(DimensionError):
        reconstruct(m, np.zeros((2, 3)))


def test_input_validation(rng):
    with pytest.raises(DimensionError):
        fit_2dsvd(rng.normal(size=(1, 4, 4)), FitConfig(2, 2))
    with pytest.raises(DimensionError):
        fit_2dsvd(rng.normal(size=(5, 4, 4)), FitConfig(5, 2))
    with pytest.raises(DimensionError):
        fit_2dsvd([np.zeros((3, 3)), np.zeros((3, 4))], FitConfig(1, 1))
    with pytest.raises(DimensionError):
        FitConfig(0, 2)
    with pytest.raises(DomainError):
        fit_method("pca", rng.normal(size=(5, 4, 4)), FitConfig(2, 2))
    with pytest.raises(DomainError):
        fit_method("corr-2dsvd", rng.normal(size=(5, 4, 4)), FitConfig(2, 2))


def test_r1_equal_residuals_match_2dsvd(rng):
    # X and -X have equal residuals for every L, R, so the reweighting is uniform
    base = rng.normal(size=(6, 5))
    x = np.stack([base, -base])
    a = fit_2dsvd(x, FitConfig(1, 1, tol=1e-12))
    b = fit_r1_2dsvd(x, FitConfig(1, 1, tol=1e-12))
    np.testing.assert_allclose(b.weights.weights, b.weights.weights[0], rtol=1e-12)
    np.testing.assert_allclose(projector(a.left), projector(b.left), atol=1e-8)
    np.testing.assert_allclose(projector(a.right), projector(b.right), atol=1e-8)


def test_r1_downweights_magnitude_outlier(rng):
    data = synthetic_lowrank(1, 20, (10, 10), ranks=(3, 3), noise=0.05, seed=3)
    x = data.samples.copy()
    x[4] *= 50
    m = fit_r1_2dsvd(x, FitConfig(3, 3))
    others = np.delete(m.weights.weights, 4)
    assert m.weights.weights[4] < 0.2 * np.median(others)


def test_r1_full_rank_clamps_residuals(samples):
    m = fit_r1_2dsvd(samples, FitConfig(7, 6))
    assert orthonormality_error(m.left) <= 1e-10
    assert np.all(np.isfinite(m.weights.weights))


def test_corr_weights_and_mean(rng):
    data = inject_outliers(synthetic_lowrank(1, 20, (12, 12), ranks=(4, 4), seed=5),
                           OutlierSpec("dummy", count=4, seed=5))
    p = CorrParams(1.6, 0.8)
    m = fit_corr_2dsvd(data.samples, FitConfig(4, 4), p)
    w = m.weights.weights
    assert np.all(w > 0) and np.all(w <= ct.sample_weight(ct.E_FLOOR, p))
    assert w[data.outlier_mask].mean() < 0.2 * w[~data.outlier_mask].mean()
    # the reweighted mean sits closer to the inlier mean than the plain mean does
    assert np.linalg.norm(m.mean - data.samples[~data.outlier_mask].mean(axis=0)) < \
        np.linalg.norm(data.samples.mean(axis=0) - data.samples[~data.outlier_mask].mean(axis=0))


def test_corr_rotation_invariance(rng):
    x = rng.normal(size=(12, 6, 5)) + 0.3
    p_rot = np.linalg.qr(rng.normal(size=(6, 6)))[0]
    q_rot = np.linalg.qr(rng.normal(size=(5, 5)))[0]
    y = p_rot @ x @ q_rot.T
    for fit in (FITTERS["corr-2dsvd"], FITTERS["2dsvd"], FITTERS["r1-2dsvd"]):
        a = fit(x, FitConfig(2, 3, tol=1e-10))
        b = fit(y, FitConfig(2, 3, tol=1e-10))
        np.testing.assert_allclose(projector(b.left), p_rot @ projector(a.left) @ p_rot.T, atol=1e-6)
        np.testing.assert_allclose(projector(b.right), q_rot @ projector(a.right) @ q_rot.T, atol=1e-6)
        np.testing.assert_allclose(b.weights.residuals, a.weights.residuals, atol=1e-8)


def test_corr_nonconvergence_returns_best_with_warning():
    data = inject_outliers(synthetic_lowrank(1, 20, (12, 12), ranks=(4, 4), seed=5),
                           OutlierSpec("dummy", count=4, seed=5))
    with pytest.warns(ConvergenceWarning):
        m = fit_corr_2dsvd(data.samples, FitConfig(4, 4, max_iters=1, tol=1e-300), CorrParams(1.6, 0.8))
    assert not m.converged
    j = ct.objective(m.weights.residuals, CorrParams(1.6, 0.8))
    assert j == pytest.approx(min(m.trace), rel=1e-12)


def test_corr_p_order_runs_and_traces_ploss():
    data = inject_outliers(synthetic_lowrank(1, 20, (12, 12), ranks=(4, 4), seed=5),
                           OutlierSpec("dummy", count=4, seed=5))
    p = CorrParams(1.6, 0.8, p=4)
    with warnings.catch_warnings():
        warnings.simplefilter("error", ConvergenceWarning)
        m = fit_corr_2dsvd(data.samples, FitConfig(4, 4), p)
    assert m.trace[-1] == pytest.approx(ct.objective(m.weights.residuals, p), rel=1e-12)
    assert m.weights.weights[data.outlier_mask].mean() < 0.2 * m.weights.weights[~data.outlier_mask].mean()


def test_fit_deterministic(samples):
    a = fit_corr_2dsvd(samples, FitConfig(3, 3), CorrParams(1.6, 0.8))
    b = fit_corr_2dsvd(samples.copy(), FitConfig(3, 3), CorrParams(1.6, 0.8))
    for f in ("left", "right", "cores", "mean"):
        assert getattr(a, f).tobytes() == getattr(b, f).tobytes()
