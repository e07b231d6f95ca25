import numpy as np
import pytest

import gplvm


def test_compute_returns():
    prices = np.array([[100.0, 110.0, 99.0], [50.0, 50.0, 55.0]])
    r = gplvm.compute_returns(prices)
    np.testing.assert_allclose(r, [[0.1, -0.1], [0.0, 0.1]], rtol=1e-14)


def test_zero_price_is_an_input_error():
    with pytest.raises(gplvm.InputError):
        gplvm.compute_returns(np.array([[1.0, 0.0, 1.0]]))


def test_stationary_gram_has_unit_diagonal():
    z = np.random.default_rng(0).normal(size=(5, 2))
    c = gplvm.correlation_gram(z, kernel="se")
    np.testing.assert_allclose(np.diag(c), 1.0)
    np.testing.assert_array_equal(c, c.T)


def test_likelihood_matches_numpy_density():
    rng = np.random.default_rng(1)
    a = rng.normal(size=(4, 4))
    k = a @ a.T + 0.5 * np.eye(4)
    r = rng.normal(size=(4, 6))
    sign, logdet = np.linalg.slogdet(k)
    quad = np.einsum("id,ij,jd->", r, np.linalg.inv(k), r)
    expected = -0.5 * (r.size * np.log(2 * np.pi) + r.shape[1] * logdet + quad)
    assert gplvm.log_marginal_likelihood(r, k) == pytest.approx(expected, rel=1e-10)


def test_ledoit_wolf_matches_scikit_learn():
    sklearn_cov = pytest.importorskip("sklearn.covariance")
    rng = np.random.default_rng(2)
    r = rng.normal(size=(8, 40)) * np.linspace(0.5, 2.0, 8)[:, None]
    lw = sklearn_cov.LedoitWolf().fit(r.T)
    np.testing.assert_allclose(gplvm.ledoit_wolf(r), lw.covariance_, rtol=1e-10, atol=1e-14)
    assert gplvm.ledoit_wolf_intensity(r) == pytest.approx(lw.shrinkage_, rel=1e-10)
    np.testing.assert_allclose(
        gplvm.sample_covariance(r), sklearn_cov.empirical_covariance(r.T), rtol=1e-12
    )


def test_min_variance_weights():
    np.testing.assert_allclose(gplvm.min_variance_weights(np.eye(10), 0.1), 0.1)
    w = gplvm.min_variance_weights(np.diag([1.0, 1.0, 4.0]), 0.6)
    assert w.sum() == pytest.approx(1.0)
    assert w.max() <= 0.6 + 1e-9
    p = gplvm.project_capped_simplex(np.zeros(4), 1.0)
    np.testing.assert_allclose(p, 0.25)


def test_sharpe_ratio():
    mean, std, sharpe = gplvm.sharpe_ratio([0.001] * 10)
    assert mean == pytest.approx(0.252)
    assert std == 0.0
    assert sharpe is None
    _, _, sharpe = gplvm.sharpe_ratio([0.01, 0.02, 0.03])
    assert sharpe == pytest.approx(38.88, abs=0.01)


def test_small_fit_and_imputation():
    data = gplvm.generate_synthetic(8, 60, 2, 0.01, seed=3, kernel="linear", kernel_scale=0.02)
    result = gplvm.fit(data["returns"], kernel="linear", latent_dim=2, iterations=200, restarts=2, threads=1)
    k = result["covariance"]
    assert k.shape == (8, 8)
    np.testing.assert_array_equal(k, k.T)
    assert np.linalg.eigvalsh(k).min() > 0
    assert len(result["elbo_trace"]) == 200
    assert result["latents"].shape == (8, 2)
    again = gplvm.fit(data["returns"], kernel="linear", latent_dim=2, iterations=200, restarts=2, threads=1)
    assert again["model_json"] == result["model_json"]

    rep = gplvm.loocv_impute(data["returns"], k, data["returns"].mean(axis=1))
    assert rep["predicted"].shape == data["returns"].shape
    assert rep["r2"] > rep["baseline_r2"]
