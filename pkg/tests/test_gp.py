import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from genbo.aggregation import AggregationSpec
from genbo.benchmarks import synthetic_surface
from genbo.core import Fingerprint, GeneralityProblem, Observation, ObservationSet
from genbo.gp import (
    NOISE_BOUNDS,
    OUTPUTSCALE_BOUNDS,
    GPModel,
    PairSpace,
    _neg_log_marginal,
    fit,
    fit_indices,
    tanimoto_kernel,
)
from genbo.tanimoto import tanimoto_matrix
from oracles import dense_posterior, tanimoto_bits


def fp(text):
    return Fingerprint([int(c) for c in text])


class TestKernel:
    def test_identity(self):
        a = fp("0110100")
        assert tanimoto_kernel(a, a) == 1.0

    def test_hand_value(self):
        assert tanimoto_kernel(fp("1100"), fp("1010")) == pytest.approx(1 / 3)

    def test_empty_is_zero(self):
        assert tanimoto_kernel(fp("0000"), fp("0110")) == 0.0
        assert tanimoto_kernel(fp("0000"), fp("0000")) == 0.0

    def test_outputscale(self):
        assert tanimoto_kernel(fp("1100"), fp("1010"), 3.0) == pytest.approx(1.0)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            tanimoto_kernel(fp("10"), fp("100"))

    @given(arrays(bool, 24), arrays(bool, 24))
    def test_symmetric(self, a, b):
        assert tanimoto_kernel(Fingerprint(a), Fingerprint(b)) == \
            tanimoto_kernel(Fingerprint(b), Fingerprint(a))
        assert tanimoto_kernel(Fingerprint(a), Fingerprint(b)) == pytest.approx(tanimoto_bits(a, b))

    @settings(max_examples=40, deadline=None)
    @given(st.integers(1, 50).flatmap(lambda n: arrays(bool, (n, 64))))
    def test_gram_is_psd(self, bits):
        gram = tanimoto_matrix(bits, bits)
        assert np.allclose(gram, gram.T)
        assert np.linalg.eigvalsh(gram).min() >= -1e-8


def random_space(rng, n_x=5, n_w=4, n_bits=24, density=0.35):
    return PairSpace(rng.random((n_x, n_bits)) < density, rng.random((n_w, n_bits)) < density)


def oracle_for(model, queries):
    rows = lambda idx: [model.space.joint_bits(p)[0] for p in idx]  # noqa: E731
    return dense_posterior(rows(model.train_idx), model.y, rows(queries), model.outputscale,
                           model.noise + model.jitter)


class TestFit:
    def test_empty_dataset(self):
        s = synthetic_surface(0, 3, 2)
        p = GeneralityProblem.from_surface(s, AggregationSpec(), 5)
        with pytest.raises(ValueError):
            fit(ObservationSet(), p)

    def test_single_observation_interpolates(self):
        space = random_space(np.random.default_rng(0))
        model = fit_indices(space, [[1, 2]], [0.7], hyperparams=(1.0, 1e-9))
        mean, _ = model.posterior([[1, 2]])
        assert mean[0] == pytest.approx(model.y[0], abs=1e-6)
        assert model.to_native(mean)[0] == pytest.approx(0.7, abs=1e-6)

    def test_five_observations_match_dense_oracle(self):
        s = synthetic_surface(3, 6, 4, n_bits=64, density=0.2)
        p = GeneralityProblem.from_surface(s, AggregationSpec(), 10)
        data = ObservationSet()
        pairs = [(0, 0), (1, 2), (2, 1), (4, 3), (5, 0)]
        for i, j in pairs:
            data.append(Observation(p.x_ids[i], p.train_ids[j], s.table[i, j]))
        model = fit(data, p)
        assert OUTPUTSCALE_BOUNDS[0] <= model.outputscale <= OUTPUTSCALE_BOUNDS[1]
        assert NOISE_BOUNDS[0] <= model.noise <= NOISE_BOUNDS[1]
        queries = np.array([[3, 0], [0, 1], [5, 3], [2, 2]])
        mean, cov = model.posterior(queries)
        want_mean, want_cov = oracle_for(model, queries)
        assert np.allclose(mean, want_mean, atol=1e-8)
        assert np.allclose(cov, want_cov, atol=1e-8)

    def test_standardization(self):
        space = random_space(np.random.default_rng(1))
        y = np.array([1.0, 3.0, 5.0])
        model = fit_indices(space, [[0, 0], [1, 1], [2, 2]], y, hyperparams=(1.0, 0.1))
        assert model.y_mean == pytest.approx(3.0)
        assert model.y_scale == pytest.approx(np.std(y))
        assert np.allclose(model.y_mean + model.y_scale * model.y, y)

    def test_constant_targets_keep_unit_scale(self):
        space = random_space(np.random.default_rng(1))
        model = fit_indices(space, [[0, 0], [1, 1]], [2.0, 2.0])
        assert model.y_scale == 1.0
        assert np.all(model.y == 0.0)

    def test_likelihood_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(2)
        space = random_space(rng)
        idx = np.array([[0, 0], [1, 1], [2, 3], [4, 2], [3, 0]])
        gram = space.similarity(idx, idx)
        y = rng.standard_normal(5)
        theta = np.log([0.7, 0.05])
        _, grad = _neg_log_marginal(theta, gram.copy(), y)
        h = 1e-6
        for k in range(2):
            e = np.zeros(2)
            e[k] = h
            up, _ = _neg_log_marginal(theta + e, gram.copy(), y)
            down, _ = _neg_log_marginal(theta - e, gram.copy(), y)
            assert grad[k] == pytest.approx((up - down) / (2 * h), rel=1e-5, abs=1e-7)

    def test_duplicate_inputs_are_factorizable(self):
        space = random_space(np.random.default_rng(3))
        model = fit_indices(space, [[0, 0]] * 4, [1.0, 1.0, 1.0, 1.0], hyperparams=(1.0, 1e-6))
        assert np.all(np.isfinite(model.alpha))


class TestPosterior:
    def test_training_point_variance_vanishes(self):
        space = random_space(np.random.default_rng(4))
        model = GPModel.build(space, [[0, 1], [2, 3]], [0.5, -0.5], 1.0, 1e-10)
        _, var = model.posterior([[0, 1]], full_cov=False)
        assert var[0] < 1e-8

    def test_disjoint_query_gets_prior(self):
        x_bits = np.array([[1, 1, 0, 0], [0, 0, 1, 1]], bool)
        w_bits = np.array([[1, 0, 0], [0, 1, 0]], bool)
        space = PairSpace(x_bits, w_bits)
        model = GPModel.build(space, [[0, 0]], [1.3], 2.5, 0.01)
        mean, cov = model.posterior([[1, 1]])
        assert mean[0] == 0.0
        assert cov[0, 0] == pytest.approx(2.5)

    def test_random_six_point_query(self):
        rng = np.random.default_rng(5)
        space = random_space(rng, 6, 4)
        idx = np.column_stack([rng.integers(0, 6, 9), rng.integers(0, 4, 9)])
        model = GPModel.build(space, idx, rng.standard_normal(9), 1.7, 0.03)
        q = np.column_stack([rng.integers(0, 6, 6), rng.integers(0, 4, 6)])
        mean, cov = model.posterior(q)
        want_mean, want_cov = oracle_for(model, q)
        assert np.allclose(mean, want_mean, atol=1e-8)
        assert np.allclose(cov, want_cov, atol=1e-8)
        _, var = model.posterior(q, full_cov=False)
        assert np.allclose(var, np.diag(want_cov), atol=1e-8)

    def test_covariance_symmetric_psd(self):
        rng = np.random.default_rng(6)
        space = random_space(rng, 8, 5)
        idx = np.column_stack([rng.integers(0, 8, 20), rng.integers(0, 5, 20)])
        model = GPModel.build(space, idx, rng.standard_normal(20), 1.0, 1e-6)
        _, cov = model.posterior(space.grid())
        assert np.array_equal(cov, cov.T)
        assert np.linalg.eigvalsh(cov).min() >= -1e-8


class TestSampling:
    def model(self, seed=7):
        rng = np.random.default_rng(seed)
        space = random_space(rng)
        idx = np.column_stack([rng.integers(0, 5, 6), rng.integers(0, 4, 6)])
        return GPModel.build(space, idx, rng.standard_normal(6), 1.0, 0.05)

    def test_monte_carlo_mean(self):
        model = self.model()
        q = np.array([[3, 1]])
        draws = model.sample(q, m=100_000, seed=11).values[:, 0]
        mean, var = model.posterior(q, full_cov=False)
        assert abs(draws.mean() - mean[0]) <= 4 * np.sqrt(var[0] / draws.size)

    def test_same_seed_same_draws(self):
        model = self.model()
        q = model.space.grid()
        a = model.sample(q, m=16, seed=3).values
        b = model.sample(q, m=16, seed=3).values
        assert np.array_equal(a, b)

    def test_zero_variance_query(self):
        space = random_space(np.random.default_rng(8))
        model = GPModel.build(space, [[1, 1], [2, 0]], [0.4, -0.2], 1.0, 1e-12)
        s = model.sample([[1, 1]], m=50, seed=0)
        mean, _ = model.posterior([[1, 1]])
        assert np.allclose(s.values[:, 0], mean[0], atol=1e-5)

    def test_needs_draw_count(self):
        with pytest.raises(ValueError):
            self.model().sample([[0, 0]])

    def test_marginals_consistent(self):
        ok = 0
        for k in range(20):
            model = self.model(100 + k)
            q = model.space.grid()
            draws = model.sample(q, m=4096, seed=k).values
            mean, var = model.posterior(q, full_cov=False)
            within = np.abs(draws.mean(axis=0) - mean) <= 5 * np.sqrt(var / 4096) + 1e-12
            ok += bool(within.all())
        assert ok >= 19


class TestFantasy:
    def setup_model(self, seed=9, noise=0.02):
        rng = np.random.default_rng(seed)
        space = random_space(rng, 4, 3)
        idx = np.array([[0, 0], [1, 2], [3, 1]])
        return GPModel.build(space, idx, rng.standard_normal(3), 1.2, noise)

    def test_fantasy_at_mean_keeps_mean(self):
        model = self.setup_model()
        grid = model.space.grid()
        m0, v0 = model.posterior(grid, full_cov=False)
        y = model.posterior([[2, 1]])[0][0]
        new = model.condition_on_fantasy(2, 1, y)
        m1, v1 = new.posterior(grid, full_cov=False)
        assert np.allclose(m0, m1, atol=1e-6)
        k = 2 * model.space.n_w + 1
        assert v1[k] < v0[k]

    def test_fantasized_point_is_interpolated(self):
        model = self.setup_model(noise=1e-8)
        new = model.condition_on_fantasy(2, 2, 1.75)
        assert new.posterior([[2, 2]])[0][0] == pytest.approx(1.75, abs=1e-4)

    def test_rank_one_equals_full_refactorization(self):
        model = self.setup_model()
        new = model.condition_on_fantasy(1, 0, -0.3)
        full = GPModel.build(model.space, new.train_idx, new.y, model.outputscale, model.noise)
        grid = model.space.grid()
        m1, c1 = new.posterior(grid)
        m2, c2 = full.posterior(grid)
        assert np.allclose(new.chol, full.chol, atol=1e-8)
        assert np.allclose(m1, m2, atol=1e-8)
        assert np.allclose(c1, c2, atol=1e-8)

    def test_original_model_untouched(self):
        model = self.setup_model()
        before = model.train_idx.copy()
        model.condition_on_fantasy(0, 1, 0.0)
        assert np.array_equal(model.train_idx, before)
