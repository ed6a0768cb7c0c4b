"""Dirichlet moments, density, divergence, and sampling."""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, special, stats

from direns.dirichlet import (
    DirichletParams,
    ProbabilityVector,
    class_variance,
    kl_to_uniform,
    kl_to_uniform_grad,
    log_density,
    log_likelihood,
    predictive_mean,
    sample,
    total_variance,
)


def params(*alpha: float) -> DirichletParams:
    return DirichletParams(np.array(alpha, dtype=float))


def oracle_logpdf(p: np.ndarray, alpha: np.ndarray) -> float:
    norm = special.gammaln(alpha.sum()) - special.gammaln(alpha).sum()
    return float(norm + ((alpha - 1.0) * np.log(p)).sum())


class TestParams:
    def test_basic_properties(self):
        d = params(3.0, 1.0, 0.5)
        assert d.k == 3
        assert d.alpha0 == pytest.approx(4.5, abs=0)

    @pytest.mark.parametrize(
        "alpha",
        [[2.0], [1.0, 0.0], [1.0, -3.0], [1.0, float("nan")], [1.0, float("inf")]],
    )
    def test_rejects_invalid(self, alpha):
        with pytest.raises(ValueError):
            DirichletParams(np.array(alpha, dtype=float))

    def test_rejects_matrix(self):
        with pytest.raises(ValueError):
            DirichletParams(np.ones((2, 2)))


class TestProbabilityVector:
    def test_accepts_near_simplex(self):
        v = ProbabilityVector(np.array([0.3, 0.7 + 5e-7]))
        assert v.p.shape == (2,)

    @pytest.mark.parametrize(
        "p", [[0.5, 0.6], [0.5, 0.4], [-0.1, 1.1], [1.5, -0.5]]
    )
    def test_rejects_off_simplex(self, p):
        with pytest.raises(ValueError):
            ProbabilityVector(np.array(p, dtype=float))


class TestMoments:
    def test_symmetric_pair(self):
        d = params(2.0, 2.0)
        assert predictive_mean(d).p == pytest.approx([0.5, 0.5], abs=1e-12)
        assert class_variance(d, 0) == pytest.approx(0.05, abs=1e-12)
        assert class_variance(d, 1) == pytest.approx(0.05, abs=1e-12)
        assert total_variance(d) == pytest.approx(0.1, abs=1e-12)

    def test_asymmetric_case(self):
        d = params(3.0, 1.0, 0.5)
        mu = predictive_mean(d).p
        np.testing.assert_allclose(mu, [3 / 4.5, 1 / 4.5, 0.5 / 4.5], rtol=1e-14)
        v0 = (3 / 4.5) * (1 - 3 / 4.5) / 5.5
        assert class_variance(d, 0) == pytest.approx(v0, rel=1e-13)

    def test_total_variance_identity(self, rng):
        # Sum of per-class variances equals (1 - sum mu^2) / (a0 + 1).
        for _ in range(300):
            k = int(rng.integers(2, 8))
            d = DirichletParams(rng.uniform(0.05, 50.0, size=k))
            total = math.fsum(class_variance(d, j) for j in range(k))
            assert total_variance(d) == pytest.approx(total, rel=1e-12)
            mu = predictive_mean(d).p
            closed = (1.0 - float(mu @ mu)) / (d.alpha0 + 1.0)
            assert total_variance(d) == pytest.approx(closed, rel=1e-12)

    def test_scaling_shrinks_variance(self):
        d = params(3.0, 1.0, 0.5)
        d10 = params(30.0, 10.0, 5.0)
        np.testing.assert_allclose(predictive_mean(d).p, predictive_mean(d10).p, rtol=1e-14)
        ratio = total_variance(d) / total_variance(d10)
        assert ratio == pytest.approx((45.0 + 1.0) / (4.5 + 1.0), rel=1e-12)

    def test_class_variance_index_errors(self):
        d = params(2.0, 2.0)
        with pytest.raises(IndexError):
            class_variance(d, 2)
        with pytest.raises(IndexError):
            class_variance(d, -1)

    @settings(max_examples=100, deadline=None)
    @given(
        st.lists(st.floats(min_value=0.01, max_value=100.0), min_size=2, max_size=6)
    )
    def test_mean_on_simplex_and_variance_positive(self, alpha):
        d = DirichletParams(np.array(alpha))
        mu = predictive_mean(d).p
        assert math.fsum(mu.tolist()) == pytest.approx(1.0, abs=1e-9)
        assert total_variance(d) > 0.0


class TestLogDensity:
    def test_matches_oracle(self, rng):
        for _ in range(200):
            k = int(rng.integers(2, 6))
            alpha = rng.uniform(0.2, 20.0, size=k)
            p = rng.dirichlet(np.full(k, 5.0))
            p = np.maximum(p, 1e-12)
            p = p / p.sum()
            got = log_density(DirichletParams(alpha), p)
            assert got == pytest.approx(oracle_logpdf(p, alpha), rel=1e-10, abs=1e-10)

    def test_normalizes_on_the_line(self):
        d = params(2.5, 4.0)

        def f(p0: float) -> float:
            return math.exp(log_density(d, np.array([p0, 1.0 - p0])))

        total, err = integrate.quad(f, 0.0, 1.0, limit=200)
        assert total == pytest.approx(1.0, abs=max(1e-8, 10 * err))

    def test_normalizes_on_the_triangle(self):
        d = params(3.0, 2.0, 1.5)

        def f(p1: float, p0: float) -> float:
            p2 = 1.0 - p0 - p1
            if p2 <= 1e-12:
                return 0.0
            return math.exp(log_density(d, np.array([p0, p1, p2])))

        total, err = integrate.dblquad(
            f, 0.0, 1.0, lambda p0: 0.0, lambda p0: 1.0 - p0
        )
        assert total == pytest.approx(1.0, abs=max(1e-6, 10 * err))

    def test_rejects_boundary_points(self):
        d = params(2.0, 2.0)
        with pytest.raises(ValueError):
            log_density(d, np.array([0.0, 1.0]))
        with pytest.raises(ValueError):
            log_density(d, np.array([1.0, 0.0]))


class TestKLToUniform:
    def test_uniform_prior_is_zero_exactly(self):
        for k in range(2, 12):
            assert kl_to_uniform(DirichletParams(np.ones(k))) == 0.0

    def test_symmetric_pair_closed_form(self):
        # For (2,2): ln Gamma(4) - ln Gamma(2) - 2 ln Gamma(2)
        #            + 2 * (2-1) * (psi(2) - psi(4)) = ln 6 - 5/3.
        got = kl_to_uniform(params(2.0, 2.0))
        assert got == pytest.approx(math.log(6.0) - 5.0 / 3.0, abs=1e-12)

    def test_matches_monte_carlo(self):
        alpha = np.array([2.0, 2.0])
        n = 200_000
        draws = np.random.default_rng(42).dirichlet(alpha, size=n)
        draws = np.clip(draws, 1e-15, None)
        draws /= draws.sum(axis=1, keepdims=True)
        norm = special.gammaln(alpha.sum()) - special.gammaln(alpha).sum()
        log_ratio = norm + ((alpha - 1.0) * np.log(draws)).sum(axis=1)
        mc = float(log_ratio.mean())
        se = float(log_ratio.std(ddof=1)) / math.sqrt(n)
        assert abs(kl_to_uniform(params(2.0, 2.0)) - mc) <= 3.0 * se

    def test_nonnegative_on_random_parameters(self, rng):
        for _ in range(1000):
            k = int(rng.integers(2, 9))
            d = DirichletParams(rng.uniform(0.05, 80.0, size=k))
            assert kl_to_uniform(d) >= 0.0

    def test_gradient_matches_finite_differences(self, rng):
        h = 1e-6
        for _ in range(100):
            k = int(rng.integers(2, 6))
            alpha = rng.uniform(0.5, 20.0, size=k)
            grad = kl_to_uniform_grad(DirichletParams(alpha))
            for j in range(k):
                up = alpha.copy()
                up[j] += h
                down = alpha.copy()
                down[j] -= h
                fd = (
                    kl_to_uniform(DirichletParams(up))
                    - kl_to_uniform(DirichletParams(down))
                ) / (2.0 * h)
                assert grad[j] == pytest.approx(fd, abs=1e-5, rel=1e-5)


class TestSampling:
    def test_shape_and_simplex(self):
        d = params(3.0, 1.0, 0.5)
        draws = sample(d, rng_seed=1, n=500)
        assert draws.shape == (500, 3)
        assert np.all(draws > 0.0)
        np.testing.assert_allclose(draws.sum(axis=1), 1.0, atol=1e-12)

    def test_deterministic_for_fixed_seed(self):
        d = params(2.0, 5.0)
        a = sample(d, rng_seed=9, n=100)
        b = sample(d, rng_seed=9, n=100)
        np.testing.assert_array_equal(a, b)
        c = sample(d, rng_seed=10, n=100)
        assert not np.array_equal(a, c)

    def test_moments_match_closed_forms(self):
        d = params(3.0, 1.0, 0.5)
        n = 200_000
        draws = sample(d, rng_seed=7, n=n)
        mu = predictive_mean(d).p
        emp_mean = draws.mean(axis=0)
        # SE of the mean is sqrt(V_k / n); allow 4 sigma per component.
        for j in range(3):
            se = math.sqrt(class_variance(d, j) / n)
            assert abs(emp_mean[j] - mu[j]) <= 4.0 * se
        emp_var = draws.var(axis=0, ddof=1)
        for j in range(3):
            assert emp_var[j] == pytest.approx(class_variance(d, j), rel=0.05)

    def test_rejects_bad_count(self):
        with pytest.raises(ValueError):
            sample(params(2.0, 2.0), rng_seed=0, n=0)


class TestLogLikelihood:
    def test_matches_per_row_oracle(self, rng):
        for _ in range(50):
            k = int(rng.integers(2, 5))
            alpha = rng.uniform(0.3, 15.0, size=k)
            m = int(rng.integers(2, 40))
            draws = rng.dirichlet(np.full(k, 3.0), size=m)
            draws = np.maximum(draws, 1e-12)
            draws /= draws.sum(axis=1, keepdims=True)
            ref = math.fsum(oracle_logpdf(row, alpha) for row in draws)
            got = log_likelihood(alpha, draws)
            assert got == pytest.approx(ref, rel=1e-9, abs=1e-9)

    def test_accepts_params_object_and_single_row(self):
        d = params(2.0, 3.0)
        row = np.array([0.4, 0.6])
        got = log_likelihood(d, row)
        assert got == pytest.approx(oracle_logpdf(row, d.alpha), rel=1e-12)

    def test_rejects_boundary_samples(self):
        with pytest.raises(ValueError):
            log_likelihood(np.array([2.0, 2.0]), np.array([[0.0, 1.0]]))

    def test_maximized_near_truth(self):
        # Likelihood of the generating parameters beats scaled copies.
        d = params(4.0, 2.0, 1.0)
        draws = sample(d, rng_seed=3, n=5000)
        at_truth = log_likelihood(d.alpha, draws)
        assert at_truth > log_likelihood(d.alpha * 3.0, draws)
        assert at_truth > log_likelihood(d.alpha / 3.0, draws)


class TestCollapseRegime:
    def test_variances_coincide_and_vanish(self):
        k, alpha0 = 100, 1e7
        d = DirichletParams(np.full(k, alpha0 / k))
        expected = (k - 1) / (k * k * (alpha0 + 1.0))
        for j in range(k):
            assert class_variance(d, j) == pytest.approx(expected, abs=1e-12)
        assert total_variance(d) == pytest.approx(0.99 / (alpha0 + 1.0), rel=1e-12)
        assert total_variance(d) < 1e-7
