"""GP regression correctness against brute-force linear-algebra oracles."""

import json
import math

import numpy as np
import pytest

from practicegp.gp import (
    GpModel,
    KernelParams,
    fit_hyperparameters,
    gram_matrix,
    matern52,
)


def matern52_scalar_oracle(d, variance, lengthscale):
    # independent scalar evaluation of the closed form
    return variance * (1.0 + d / lengthscale + d * d / (3.0 * lengthscale**2)) * math.exp(-d / lengthscale)


def posterior_oracle(X, y, x_star, params):
    """Direct matrix-inverse posterior, no Cholesky, no caching."""
    n = len(X)
    K = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            K[i, j] = matern52_scalar_oracle(np.linalg.norm(X[i] - X[j]), params.variance, params.lengthscale)
    K_inv = np.linalg.inv(K + params.noise_variance * np.eye(n))
    k_star = np.array([
        matern52_scalar_oracle(np.linalg.norm(x_star - X[i]), params.variance, params.lengthscale)
        for i in range(n)
    ])
    mean = k_star @ K_inv @ y
    var = params.variance - k_star @ K_inv @ k_star
    return mean, var


def lml_oracle(X, y, params):
    """Explicit inverse/determinant log marginal likelihood."""
    n = len(X)
    K = gram_matrix(X, params) + params.noise_variance * np.eye(n)
    sign, logdet = np.linalg.slogdet(K)
    assert sign > 0
    return -0.5 * y @ np.linalg.inv(K) @ y - 0.5 * logdet - 0.5 * n * math.log(2 * math.pi)


class TestMatern52:
    def test_zero_distance_returns_variance(self):
        assert matern52(0.0, KernelParams(lengthscale=1.0, variance=1.0)) == 1.0
        assert matern52(0.0, KernelParams(lengthscale=3.0, variance=2.5)) == 2.5

    def test_unit_distance_closed_form(self):
        # (1 + 1 + 1/3) * e^-1
        expected = (7.0 / 3.0) * math.exp(-1.0)
        got = matern52(1.0, KernelParams(lengthscale=1.0, variance=1.0))
        assert got == pytest.approx(0.8583853627333655, abs=1e-15)
        assert got == pytest.approx(expected, abs=1e-15)

    def test_matches_independent_scalar_implementation(self):
        got = matern52(3.0, KernelParams(lengthscale=1.0, variance=2.0))
        assert got == pytest.approx(matern52_scalar_oracle(3.0, 2.0, 1.0), abs=1e-12)

    @pytest.mark.parametrize("bad", [-0.5, float("nan"), float("inf")])
    def test_rejects_invalid_distance(self, bad):
        with pytest.raises(ValueError):
            matern52(bad, KernelParams())

    def test_strictly_decreasing_and_positive(self):
        params = KernelParams(lengthscale=2.0, variance=1.5)
        ds = np.linspace(0, 50, 400)
        ks = matern52(ds, params)
        assert np.all(np.diff(ks) < 0)
        assert np.all(ks > 0)


class TestGramMatrix:
    def test_single_input(self):
        params = KernelParams(variance=3.0)
        K = gram_matrix([np.array([1.0, 2.0])], params)
        assert K.shape == (1, 1)
        assert K[0, 0] == 3.0

    def test_identical_inputs_give_variance_off_diagonal(self):
        params = KernelParams(variance=2.0)
        x = np.array([0.5, -1.0, 4.0])
        K = gram_matrix([x, x], params)
        assert K[0, 1] == 2.0
        assert K[1, 0] == 2.0

    def test_matches_double_loop_oracle(self):
        rng = np.random.default_rng(7)
        X = rng.normal(size=(5, 3))
        params = KernelParams(lengthscale=1.7, variance=0.9)
        K = gram_matrix(X, params)
        for i in range(5):
            for j in range(5):
                d = np.linalg.norm(X[i] - X[j])
                assert K[i, j] == pytest.approx(
                    matern52_scalar_oracle(d, 0.9, 1.7), abs=1e-12
                )

    def test_exactly_symmetric(self):
        rng = np.random.default_rng(3)
        X = rng.normal(size=(20, 4))
        K = gram_matrix(X, KernelParams())
        assert np.array_equal(K, K.T)

    def test_dimension_mismatch_rejected(self):
        with pytest.raises(ValueError):
            gram_matrix([np.array([1.0, 2.0]), np.array([1.0])], KernelParams())

    def test_psd_with_jitter_for_many_random_inputs(self):
        params = KernelParams(lengthscale=1.0, variance=1.0, noise_variance=0.0)
        rng = np.random.default_rng(11)
        X = rng.uniform(0, 5, size=(50, 3))
        K = gram_matrix(X, params)
        np.linalg.cholesky(K + 1e-8 * np.eye(50))  # must not raise


class TestPredict:
    def test_empty_model_recovers_prior(self):
        model = GpModel(KernelParams(variance=2.5))
        post = model.predict(np.array([0.3, -2.0, 9.9]))
        assert post.mean == 0.0
        assert post.variance == 2.5

    def test_interpolates_noiseless_line(self):
        params = KernelParams(lengthscale=1.0, variance=1.0, noise_variance=1e-8)
        model = GpModel(params)
        xs = np.linspace(0, 3, 10)
        for x in xs:
            model.add_data_point(np.array([x]), x)
        for x in xs:
            assert abs(model.predict(np.array([x])).mean - x) <= 1e-4

    def test_matches_direct_inverse_oracle(self):
        rng = np.random.default_rng(42)
        params = KernelParams(lengthscale=1.3, variance=1.8, noise_variance=0.05)
        X = rng.normal(size=(10, 3))
        y = rng.normal(size=10)
        model = GpModel(params)
        for xi, yi in zip(X, y):
            model.add_data_point(xi, yi)
        x_star = rng.normal(size=3)
        mean_o, var_o = posterior_oracle(X, y, x_star, params)
        post = model.predict(x_star)
        assert post.mean == pytest.approx(mean_o, abs=1e-8)
        assert post.variance == pytest.approx(var_o, abs=1e-8)

    def test_duplicate_point_does_not_increase_variance(self):
        params = KernelParams(noise_variance=0.1)
        model = GpModel(params)
        x = np.array([1.0, 2.0, 3.0])
        model.add_data_point(x, 3.0)
        before = model.predict(x).variance
        model.add_data_point(x, 3.0)
        after = model.predict(x).variance
        assert after <= before + 1e-12

    def test_variance_non_increasing_as_data_arrives(self):
        rng = np.random.default_rng(5)
        model = GpModel(KernelParams())
        query = np.array([1.0, 1.0])
        last = model.predict(query).variance
        for _ in range(25):
            model.add_data_point(rng.normal(size=2), rng.normal())
            var = model.predict(query).variance
            assert var <= last + 1e-8
            last = var

    def test_mean_moves_toward_observation(self):
        model = GpModel(KernelParams())
        x = np.array([1.0, 2.0])
        model.add_data_point(x, 3.0)
        assert 0.0 < model.predict(x).mean <= 3.0

    def test_incremental_equals_batch(self):
        rng = np.random.default_rng(99)
        params = KernelParams(lengthscale=2.0, variance=1.0, noise_variance=0.1)
        X = rng.normal(size=(20, 3))
        y = rng.normal(size=20)
        incremental = GpModel(params)
        for xi, yi in zip(X, y):
            incremental.add_data_point(xi, yi)
        batch = GpModel.from_dict(
            {"params": params.to_dict(), "inputs": X.tolist(), "targets": y.tolist()}
        )
        queries = rng.normal(size=(30, 3))
        mi, vi = incremental.predict_batch(queries)
        mb, vb = batch.predict_batch(queries)
        np.testing.assert_allclose(mi, mb, atol=1e-10)
        np.testing.assert_allclose(vi, vb, atol=1e-10)

    def test_insertion_order_does_not_matter(self):
        rng = np.random.default_rng(123)
        X = rng.normal(size=(12, 2))
        y = rng.normal(size=12)
        a = GpModel(KernelParams())
        b = GpModel(KernelParams())
        for xi, yi in zip(X, y):
            a.add_data_point(xi, yi)
        order = rng.permutation(12)
        for i in order:
            b.add_data_point(X[i], y[i])
        q = rng.normal(size=(10, 2))
        ma, va = a.predict_batch(q)
        mb, vb = b.predict_batch(q)
        np.testing.assert_allclose(ma, mb, atol=1e-10)
        np.testing.assert_allclose(va, vb, atol=1e-10)

    def test_rejects_bad_inputs(self):
        model = GpModel(KernelParams())
        with pytest.raises(ValueError):
            model.add_data_point(np.array([np.nan, 1.0]), 0.0)
        with pytest.raises(ValueError):
            model.add_data_point(np.array([1.0, 2.0]), float("inf"))
        model.add_data_point(np.array([1.0, 2.0]), 0.5)
        with pytest.raises(ValueError):
            model.add_data_point(np.array([1.0, 2.0, 3.0]), 0.5)
        with pytest.raises(ValueError):
            model.predict(np.array([1.0]))


class TestLogMarginalLikelihood:
    def test_single_zero_target_closed_form(self):
        params = KernelParams(lengthscale=1.0, variance=1.5, noise_variance=0.1)
        model = GpModel(params)
        model.add_data_point(np.array([0.0]), 0.0)
        expected = -0.5 * math.log(1.5 + 0.1) - 0.5 * math.log(2 * math.pi)
        assert model.log_marginal_likelihood() == pytest.approx(expected, abs=1e-12)

    def test_matches_determinant_oracle(self):
        rng = np.random.default_rng(17)
        params = KernelParams(lengthscale=0.8, variance=1.2, noise_variance=0.2)
        X = rng.normal(size=(8, 2))
        y = rng.normal(size=8)
        model = GpModel(params)
        for xi, yi in zip(X, y):
            model.add_data_point(xi, yi)
        assert model.log_marginal_likelihood() == pytest.approx(lml_oracle(X, y, params), abs=1e-8)

    def test_empty_model_rejected(self):
        with pytest.raises(ValueError):
            GpModel(KernelParams()).log_marginal_likelihood()

    def test_perturbing_lengthscale_off_grid_max_decreases_lml(self):
        rng = np.random.default_rng(21)
        grid_ls = [0.5, 1.0, 2.0, 4.0, 8.0]
        X = rng.uniform(0, 8, size=(25, 1))
        true = KernelParams(lengthscale=2.0, variance=1.0, noise_variance=1e-6)
        L = np.linalg.cholesky(gram_matrix(X, true) + 1e-8 * np.eye(25))
        y = L @ rng.normal(size=25)
        model = GpModel(KernelParams())
        for xi, yi in zip(X, y):
            model.add_data_point(xi, yi)

        def lml_at(ls):
            model.params = KernelParams(lengthscale=ls, variance=1.0, noise_variance=0.01)
            return model.log_marginal_likelihood()

        lmls = {ls: lml_at(ls) for ls in grid_ls}
        best = max(lmls, key=lmls.get)
        others = [ls for ls in grid_ls if ls != best]
        assert all(lmls[best] > lmls[ls] for ls in others)
        # stepping one grid element away from the maximum strictly loses
        idx = grid_ls.index(best)
        for neighbour in grid_ls[max(idx - 1, 0):idx] + grid_ls[idx + 1:idx + 2]:
            assert lml_at(neighbour) < lmls[best]


class TestFitHyperparameters:
    def test_single_element_grid(self):
        model = GpModel(KernelParams())
        model.add_data_point(np.array([0.0]), 1.0)
        model.add_data_point(np.array([1.0]), 2.0)
        only = KernelParams(lengthscale=3.0, variance=2.0, noise_variance=0.05)
        assert fit_hyperparameters(model, [only]) == only

    def test_returns_grid_argmax(self):
        rng = np.random.default_rng(31)
        X = rng.uniform(0, 10, size=(15, 2))
        y = rng.normal(size=15)
        model = GpModel(KernelParams())
        for xi, yi in zip(X, y):
            model.add_data_point(xi, yi)
        grid = [KernelParams(lengthscale=l, variance=v, noise_variance=0.1)
                for l in (0.5, 1.0, 2.0, 4.0, 8.0) for v in (0.5, 1.0, 2.0)]
        best = fit_hyperparameters(model, grid)
        lmls = []
        for params in grid:
            model.params = params
            lmls.append(model.log_marginal_likelihood())
        assert best == grid[int(np.argmax(lmls))]

    def test_recovers_known_lengthscale_mostly(self):
        # sample data from a GP with known l, check the grid pick is within
        # one grid step in >= 80% of seeded trials
        grid_ls = [0.5, 1.0, 2.0, 4.0, 8.0]
        true_idx = grid_ls.index(2.0)
        hits = 0
        trials = 50
        for seed in range(trials):
            rng = np.random.default_rng(1000 + seed)
            X = rng.uniform(0, 12, size=(30, 1))
            true = KernelParams(lengthscale=2.0, variance=1.0, noise_variance=0.0)
            L = np.linalg.cholesky(gram_matrix(X, true) + 1e-10 * np.eye(30))
            y = L @ rng.normal(size=30)
            model = GpModel(KernelParams())
            for xi, yi in zip(X, y):
                model.add_data_point(xi, yi)
            grid = [KernelParams(lengthscale=l, variance=1.0, noise_variance=0.01) for l in grid_ls]
            picked = fit_hyperparameters(model, grid)
            if abs(grid_ls.index(picked.lengthscale) - true_idx) <= 1:
                hits += 1
        assert hits >= 0.8 * trials

    def test_requires_data_and_grid(self):
        model = GpModel(KernelParams())
        with pytest.raises(ValueError):
            fit_hyperparameters(model, [])
        with pytest.raises(ValueError):
            fit_hyperparameters(model, [KernelParams()])
        model.add_data_point(np.array([0.0]), 1.0)
        with pytest.raises(ValueError):
            fit_hyperparameters(model, [KernelParams()])

    def test_leaves_model_params_untouched(self):
        model = GpModel(KernelParams())
        model.add_data_point(np.array([0.0]), 1.0)
        model.add_data_point(np.array([2.0]), 0.0)
        before = model.params
        fit_hyperparameters(model, [KernelParams(lengthscale=1.0), KernelParams(lengthscale=9.0)])
        assert model.params == before


class TestKernelParamsValidation:
    @pytest.mark.parametrize(
        "kwargs",
        [
            {"lengthscale": 0.0},
            {"lengthscale": -1.0},
            {"variance": 0.0},
            {"noise_variance": -0.1},
            {"lengthscale": float("nan")},
        ],
    )
    def test_invalid_params_rejected(self, kwargs):
        with pytest.raises(ValueError):
            KernelParams(**kwargs)


class TestSerialization:
    def test_json_round_trip_is_bit_faithful(self):
        rng = np.random.default_rng(55)
        params = KernelParams(lengthscale=1.234567891234, variance=0.777, noise_variance=1e-7)
        model = GpModel(params)
        X = rng.normal(size=(15, 3)) * np.array([1e-8, 1.0, 1e8])
        y = rng.normal(size=15) * 1e5
        for xi, yi in zip(X, y):
            model.add_data_point(xi, yi)
        blob = json.dumps(model.to_dict())
        clone = GpModel.from_dict(json.loads(blob))
        assert clone.params == model.params
        assert np.array_equal(clone.inputs, model.inputs)
        assert np.array_equal(clone.targets, model.targets)
        q = rng.normal(size=(5, 3))
        np.testing.assert_array_equal(clone.predict_mean_batch(q), model.predict_mean_batch(q))

    def test_empty_model_round_trip(self):
        model = GpModel(KernelParams())
        clone = GpModel.from_dict(json.loads(json.dumps(model.to_dict())))
        assert clone.n_points == 0
        assert clone.predict(np.array([1.0])).mean == 0.0
