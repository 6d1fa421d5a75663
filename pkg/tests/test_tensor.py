import numpy as np
import pytest

from corrtensor.correntropy import CorrParams
from corrtensor.data_io import OutlierSpec, inject_outliers, synthetic_lowrank
from corrtensor.decomp2d import FitConfig, fit_2dsvd, fit_corr_2dsvd
from corrtensor.errors import DimensionError
from corrtensor.linalg import orthonormality_error, top_k_eigvecs
from corrtensor.tensor import (
    _mode_covariance,
    _project_batch,
    fit_corr_tensor,
    fit_tucker,
    fold,
    mode_n_product,
    project_tensor,
    reconstruct_tensor,
    tensor_reconstruction_error,
    unfold,
)

from conftest import projector


def elementwise_mode_product(t, u, n):
    # explicit index loop used as the oracle
    shape = list(t.shape)
    shape[n] = u.shape[0]
    out = np.zeros(shape)
    for idx in np.ndindex(*shape):
        acc = 0.0
        for j in range(t.shape[n]):
            src = list(idx)
            src[n] = j
            acc += u[idx[n], j] * t[tuple(src)]
        out[idx] = acc
    return out


def test_mode_product_identity_and_oracle(rng):
    t = rng.normal(size=(3, 4, 5))
    np.testing.assert_array_equal(mode_n_product(t, np.eye(4), 1), t)
    for n, rows in ((0, 2), (1, 3), (2, 6)):
        u = rng.normal(size=(rows, t.shape[n]))
        np.testing.assert_allclose(mode_n_product(t, u, n), elementwise_mode_product(t, u, n), atol=1e-12)


def test_mode_product_matrix_case(rng):
    x = rng.normal(size=(6, 5))
    left, right = rng.normal(size=(6, 2)), rng.normal(size=(5, 3))
    y = mode_n_product(mode_n_product(x, left.T, 0), right.T, 1)
    np.testing.assert_allclose(y, left.T @ x @ right, atol=1e-12)


def test_mode_products_commute(rng):
    t = rng.normal(size=(3, 4, 5))
    a, b = rng.normal(size=(2, 3)), rng.normal(size=(6, 4))
    np.testing.assert_allclose(
        mode_n_product(mode_n_product(t, a, 0), b, 1),
        mode_n_product(mode_n_product(t, b, 1), a, 0),
        atol=1e-12,
    )


def test_mode_product_errors(rng):
    t = rng.normal(size=(3, 4))
    with pytest.raises(DimensionError):
        mode_n_product(t, np.eye(3), 1)
    with pytest.raises(DimensionError):
        mode_n_product(t, np.eye(3), 2)
    with pytest.raises(DimensionError):
        unfold(t, -1)


def test_unfold_layout_and_roundtrip(rng):
    t = np.arange(8.0).reshape(2, 2, 2)
    np.testing.assert_array_equal(unfold(t, 0), [[0, 1, 2, 3], [4, 5, 6, 7]])
    np.testing.assert_array_equal(unfold(t, 1), [[0, 1, 4, 5], [2, 3, 6, 7]])
    np.testing.assert_array_equal(unfold(t, 2), [[0, 2, 4, 6], [1, 3, 5, 7]])
    for n in range(3):
        np.testing.assert_array_equal(fold(unfold(t, n), n, t.shape), t)
    m = rng.normal(size=(3, 5))
    np.testing.assert_array_equal(unfold(m, 0), m)
    np.testing.assert_array_equal(unfold(m, 1), m.T)
    r = rng.normal(size=(3, 4, 2, 5))
    for n in range(4):
        assert np.linalg.norm(unfold(r, n)) == pytest.approx(np.linalg.norm(r), rel=1e-14)


def test_tucker_matches_2dsvd(rng):
    x = rng.normal(size=(20, 8, 6))
    cfg = FitConfig(3, 2)
    a, b = fit_2dsvd(x, cfg), fit_tucker(x, (3, 2), cfg)
    np.testing.assert_array_equal(projector(a.left), projector(b.factors[0]))
    np.testing.assert_array_equal(projector(a.right), projector(b.factors[1]))


def test_corr_tensor_matches_corr_2dsvd(rng):
    x = rng.normal(size=(20, 8, 6))
    cfg, p = FitConfig(3, 3), CorrParams(1.6, 0.8)
    a, b = fit_corr_2dsvd(x, cfg, p), fit_corr_tensor(x, (3, 3), cfg, p)
    assert np.max(np.abs(projector(a.left) - projector(b.factors[0]))) <= 1e-8
    assert np.max(np.abs(projector(a.right) - projector(b.factors[1]))) <= 1e-8
    np.testing.assert_allclose(a.mean, b.mean, atol=1e-10)


def test_full_rank_zero_residual(rng):
    x = rng.normal(size=(6, 4, 3, 2))
    m = fit_corr_tensor(x, (4, 3, 2), FitConfig(4, 3), CorrParams(2, 1e6))
    assert tensor_reconstruction_error(m, x) <= 1e-10
    np.testing.assert_allclose(reconstruct_tensor(m, project_tensor(m, x[1])), x[1], atol=1e-10)


def test_model_invariants_and_pythagoras(rng):
    x = rng.normal(size=(10, 5, 4, 3))
    m = fit_corr_tensor(x, (2, 3, 2), FitConfig(2, 3), CorrParams(1.6, 0.8))
    for u in m.factors:
        assert orthonormality_error(u) <= 1e-10
    assert m.cores.shape == (10, 2, 3, 2)
    xh = x - m.mean
    core_norms = np.sum(m.cores.reshape(10, -1) ** 2, axis=1)
    sample_norms = np.sum(xh.reshape(10, -1) ** 2, axis=1)
    assert np.all(core_norms <= sample_norms + 1e-12)
    np.testing.assert_allclose(m.weights.residuals, sample_norms - core_norms, atol=1e-8)
    np.testing.assert_array_equal(reconstruct_tensor(m, np.zeros((2, 3, 2))), m.mean)
    tr = m.trace
    assert abs(tr[-1] - tr[-2]) < 1e-5 * max(1.0, tr[-2])


def test_tucker_fixed_point_equations(rng):
    x = rng.normal(size=(15, 5, 4, 3))
    m = fit_tucker(x, (2, 2, 2), FitConfig(2, 2, tol=1e-14, max_iters=2000))
    xh = x - m.mean
    for n in range(3):
        c = _mode_covariance(_project_batch(xh, m.factors, skip=n), n)
        u = top_k_eigvecs(c, 2)
        np.testing.assert_allclose(projector(u), projector(m.factors[n]), atol=1e-5)


def test_color_dummy_outliers_separated():
    data = synthetic_lowrank(1, 10, (8, 8, 3), ranks=(2, 2, 1), noise=0.01, seed=11)
    data = inject_outliers(data, OutlierSpec("dummy", count=2, seed=11))
    m = fit_corr_tensor(data.samples, (2, 2, 1), FitConfig(2, 2), CorrParams(1.6, 0.8))
    w = m.weights.weights
    assert w[data.outlier_mask].mean() < 0.2 * w[~data.outlier_mask].mean()


def test_rank_validation(rng):
    x = rng.normal(size=(5, 4, 3))
    with pytest.raises(DimensionError):
        fit_tucker(x, (2,), FitConfig(2, 2))
    with pytest.raises(DimensionError):
        fit_tucker(x, (5, 2), FitConfig(2, 2))
    m = fit_tucker(x, (2, 2), FitConfig(2, 2))
    with pytest.raises(DimensionError):
        project_tensor(m, np.zeros((3, 4)))
    with pytest.raises(DimensionError):
        reconstruct_tensor(m, np.zeros((3, 3)))
