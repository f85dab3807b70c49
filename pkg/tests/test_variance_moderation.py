#!/usr/bin/env python3
"""
Variance Moderation Tests

Covers hyperparameter estimation, the moderation formula, the infinite-ν₀
branch and the conditional t law of moderated statistics.
"""

import math
import os
import sys
import unittest

import numpy as np
from scipy import stats

sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from shrinkt.exceptions import EstimationError
from shrinkt.models import SummaryStats, VarianceObservations
from shrinkt.stats_core import INF_DF, digamma, make_rng, t_cdf
from shrinkt.variance_moderation import (
    estimate_hyperparams,
    moderate,
    moderated_t,
    posterior_variance_law,
    squeeze_variances,
)


def draw_variances(rng, n, s0_sq, nu0, nu):
    """True variances from the scaled inverse chi-square prior, then their estimates."""
    s2 = s0_sq * nu0 / rng.chisquare(nu0, n)
    s2_hat = s2 * rng.chisquare(nu, n) / nu
    return s2, s2_hat


class TestModerate(unittest.TestCase):
    """The shrinkage formula itself."""

    def test_worked_example(self):
        obs = VarianceObservations(s2_hat=[1.0], df=[2.0])
        mod = moderate(obs, s0_sq=4.0, nu0=3.0)
        self.assertAlmostEqual(float(mod.s2_tilde[0]), 2.8, places=12)
        self.assertEqual(float(mod.nu_tilde[0]), 5.0)

    def test_fixed_point(self):
        """Observed variances equal to s₀² are left unchanged."""
        obs = VarianceObservations(s2_hat=np.full(5, 2.5), df=np.arange(1.0, 6.0))
        mod = moderate(obs, s0_sq=2.5, nu0=7.0)
        np.testing.assert_allclose(mod.s2_tilde, 2.5, rtol=1e-14)

    def test_sandwich(self):
        rng = make_rng(11)
        s2_hat = rng.gamma(2.0, 1.0, 500)
        obs = VarianceObservations(s2_hat=s2_hat, df=rng.integers(1, 10, 500).astype(float))
        s0_sq = 1.3
        mod = moderate(obs, s0_sq=s0_sq, nu0=4.0)
        lo = np.minimum(s2_hat, s0_sq) - 1e-12
        hi = np.maximum(s2_hat, s0_sq) + 1e-12
        self.assertTrue(np.all((mod.s2_tilde >= lo) & (mod.s2_tilde <= hi)))
        self.assertTrue(np.all(mod.nu_tilde > obs.df))

    def test_infinite_prior_df(self):
        obs = VarianceObservations(s2_hat=[0.5, 3.0], df=[4.0, 4.0])
        mod = moderate(obs, s0_sq=2.0, nu0=INF_DF)
        np.testing.assert_allclose(mod.s2_tilde, 2.0)
        self.assertTrue(np.all(np.isinf(mod.nu_tilde)))
        self.assertTrue(mod.nu0_is_infinite)
        self.assertEqual(mod.to_dict(), {"s0_sq": 2.0, "nu0": "inf"})

    def test_known_variances_survive_infinite_prior_df(self):
        obs = VarianceObservations(s2_hat=[0.5, 3.0, 7.0], df=[4.0, INF_DF, INF_DF])
        for nu0 in (INF_DF, 5.0):
            mod = moderate(obs, s0_sq=2.0, nu0=nu0)
            with self.subTest(nu0=nu0):
                np.testing.assert_allclose(mod.s2_tilde[1:], [3.0, 7.0])
                self.assertTrue(np.all(np.isinf(mod.nu_tilde[1:])))
        self.assertAlmostEqual(float(moderate(obs, 2.0, INF_DF).s2_tilde[0]), 2.0)

    def test_invalid_hyperparameters(self):
        obs = VarianceObservations(s2_hat=[1.0], df=[2.0])
        with self.assertRaises(EstimationError):
            moderate(obs, s0_sq=0.0, nu0=3.0)
        with self.assertRaises(EstimationError):
            moderate(obs, s0_sq=1.0, nu0=-1.0)


class TestEstimateHyperparams(unittest.TestCase):
    """Log-scale moment matching for (s₀², ν₀)."""

    def test_recovers_hyperparameters(self):
        _, s2_hat = draw_variances(make_rng(2024), 100_000, s0_sq=1.0, nu0=4.0, nu=6.0)
        s0_sq, nu0 = estimate_hyperparams(VarianceObservations(s2_hat=s2_hat, df=6.0))
        self.assertAlmostEqual(s0_sq, 1.0, delta=0.05)
        self.assertAlmostEqual(nu0, 4.0, delta=0.8)

    def test_recovery_grid(self):
        """s₀² within 5% and ν₀ within 20% across prior and residual df, five seeds each."""
        for nu0_true in (2.0, 4.0, 10.0):
            for nu in (2.0, 4.0, 18.0):
                for seed in range(5):
                    rng = make_rng(int(1000 * nu0_true + 10 * nu + seed))
                    _, s2_hat = draw_variances(rng, 100_000, s0_sq=1.0, nu0=nu0_true, nu=nu)
                    s0_sq, nu0 = estimate_hyperparams(VarianceObservations(s2_hat=s2_hat, df=nu))
                    with self.subTest(nu0=nu0_true, nu=nu, seed=seed):
                        self.assertLess(abs(s0_sq - 1.0), 0.05)
                        self.assertLess(abs(nu0 - nu0_true), 0.2 * nu0_true)

    def test_worked_example_recovery(self):
        _, s2_hat = draw_variances(make_rng(303), 100_000, s0_sq=4.0, nu0=3.0, nu=2.0)
        s0_sq, nu0 = estimate_hyperparams(VarianceObservations(s2_hat=s2_hat, df=2.0))
        self.assertTrue(2.4 <= nu0 <= 3.6)
        self.assertAlmostEqual(s0_sq, 4.0, delta=0.2)

    def test_identical_variances_give_infinite_df(self):
        obs = VarianceObservations(s2_hat=np.full(50, 3.0), df=4.0)
        s0_sq, nu0 = estimate_hyperparams(obs)
        self.assertTrue(math.isinf(nu0))
        expected = 3.0 * math.exp(math.log(2.0) - digamma(2.0))
        self.assertAlmostEqual(s0_sq, expected, places=10)

        mod = squeeze_variances(obs)
        np.testing.assert_allclose(mod.s2_tilde, expected)
        self.assertTrue(np.all(np.isinf(mod.nu_tilde)))

    def test_scale_equivariance(self):
        _, s2_hat = draw_variances(make_rng(5), 2_000, s0_sq=0.7, nu0=5.0, nu=3.0)
        base = estimate_hyperparams(VarianceObservations(s2_hat=s2_hat, df=3.0))
        scaled = estimate_hyperparams(VarianceObservations(s2_hat=9.0 * s2_hat, df=3.0))
        self.assertAlmostEqual(scaled[0] / base[0], 9.0, places=8)
        self.assertAlmostEqual(scaled[1], base[1], places=6)

    def test_zero_variances_are_skipped(self):
        _, s2_hat = draw_variances(make_rng(6), 500, s0_sq=1.0, nu0=4.0, nu=4.0)
        with_zero = np.append(s2_hat, [0.0, 0.0])
        a = estimate_hyperparams(VarianceObservations(s2_hat=s2_hat, df=4.0))
        b = estimate_hyperparams(VarianceObservations(s2_hat=with_zero, df=4.0))
        self.assertAlmostEqual(a[0], b[0], places=12)
        self.assertAlmostEqual(a[1], b[1], places=12)

    def test_insufficient_data(self):
        with self.assertRaises(EstimationError):
            estimate_hyperparams(VarianceObservations(s2_hat=[0.0, 0.0, 0.0], df=3.0))
        with self.assertRaises(EstimationError):
            estimate_hyperparams(VarianceObservations(s2_hat=[1.2, 0.0], df=3.0))


class TestPosteriorLaws(unittest.TestCase):

    def test_posterior_variance_law(self):
        law = posterior_variance_law(1.0, s0_sq=4.0, nu0=3.0, nu_j=2.0)
        self.assertAlmostEqual(law.scale, 1.0 / 2.8)
        self.assertEqual(law.df, 5.0)
        point = posterior_variance_law(1.0, s0_sq=4.0, nu0=INF_DF, nu_j=2.0)
        self.assertTrue(point.is_degenerate)
        self.assertAlmostEqual(point.mean(), 0.25)

    def test_moderated_t_statistics(self):
        data = SummaryStats(beta_hat=[2.0, -1.0], se=[1.0, 2.0], df=[2.0, 2.0])
        mod = moderate(VarianceObservations.from_summary(data), s0_sq=4.0, nu0=3.0)
        t_stat, p_value = moderated_t(data, mod)
        np.testing.assert_allclose(t_stat, data.beta_hat / mod.s_tilde)
        expected = 2.0 * (1.0 - np.asarray(t_cdf(np.abs(t_stat), 5.0)))
        np.testing.assert_allclose(p_value, expected, atol=1e-14)

    def test_moderated_statistic_is_t_given_observed_variance(self):
        """Within bins of ŝ, β̂/s̃ keeps the t law on ν̃ degrees of freedom."""
        rng = make_rng(77)
        n, s0_sq, nu0, nu = 100_000, 1.0, 4.0, 4.0
        s2, s2_hat = draw_variances(rng, n, s0_sq, nu0, nu)
        beta_hat = rng.normal(0.0, np.sqrt(s2))
        obs = VarianceObservations(s2_hat=s2_hat, df=nu)
        mod = moderate(obs, s0_sq, nu0)
        t_stat = beta_hat / mod.s_tilde

        edges = np.quantile(s2_hat, np.linspace(0, 1, 21))
        bins = np.clip(np.searchsorted(edges, s2_hat, side="right") - 1, 0, 19)
        passed = 0
        for b in range(20):
            sample = t_stat[bins == b]
            if stats.kstest(sample, lambda v: t_cdf(v, nu0 + nu)).pvalue > 0.01:
                passed += 1
        self.assertGreaterEqual(passed, 18)

    def test_naive_ratio_is_t_only_marginally(self):
        """β̂/ŝ follows t_ν overall but not within a narrow band of ŝ."""
        rng = make_rng(2023)
        n = 100_000
        beta_hat = rng.standard_normal(n)
        s_hat = np.sqrt(rng.chisquare(1.0, n))
        ratio = beta_hat / s_hat
        self.assertGreater(stats.kstest(ratio, lambda v: t_cdf(v, 1.0)).pvalue, 0.01)

        band = (s_hat > 0.28) & (s_hat < 0.32)
        self.assertGreater(band.sum(), 1_000)
        # rescaling by ŝ recovers the conditional N(0, 1) law
        self.assertGreater(stats.kstest(ratio[band] * s_hat[band], "norm").pvalue, 0.01)
        self.assertLess(stats.kstest(ratio[band], lambda v: t_cdf(v, 1.0)).pvalue, 1e-6)


if __name__ == "__main__":
    unittest.main()
