#!/usr/bin/env python3
"""
Special Function and Distribution Tests

Checks the gamma family, normal and t laws, samplers and the distribution
value types against closed forms and scipy oracles.
"""

import math
import os
import sys
import unittest

import numpy as np
from scipy import integrate, stats

sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from shrinkt.exceptions import DomainError
from shrinkt.stats_core import (
    INF_DF,
    GeneralizedT,
    ScaledChiSquare,
    chisq_sample,
    digamma,
    log_gamma,
    make_rng,
    normal_cdf,
    normal_logpdf,
    normal_quantile,
    spawn_rng,
    t_cdf,
    t_central_prob,
    t_logpdf,
    t_logsf,
    t_quantile,
    t_sample,
    t_sf,
    trigamma,
    trigamma_inverse,
)

EULER_GAMMA = 0.5772156649015329


class TestGammaFamily(unittest.TestCase):
    """ln Γ, ψ, ψ′ and the trigamma inverse."""

    def test_log_gamma_values(self):
        self.assertAlmostEqual(log_gamma(1.0), 0.0, places=12)
        self.assertAlmostEqual(log_gamma(2.0), 0.0, places=12)
        self.assertAlmostEqual(log_gamma(0.5), 0.5 * math.log(math.pi), places=12)

    def test_digamma_values(self):
        self.assertAlmostEqual(digamma(1.0), -EULER_GAMMA, places=10)
        self.assertAlmostEqual(digamma(2.0), 1.0 - EULER_GAMMA, places=10)
        self.assertAlmostEqual(digamma(0.5), -EULER_GAMMA - 2.0 * math.log(2.0), places=10)

    def test_trigamma_values(self):
        self.assertAlmostEqual(trigamma(1.0), math.pi ** 2 / 6.0, places=10)
        self.assertAlmostEqual(trigamma(0.5), math.pi ** 2 / 2.0, places=10)

    def test_trigamma_inverse_round_trip(self):
        self.assertAlmostEqual(trigamma_inverse(trigamma(3.0)), 3.0, delta=1e-8)
        ys = np.array([1e-8, 1e-3, 0.1, 1.0, 10.0, 1e4, 1e8])
        xs = np.asarray(trigamma_inverse(ys))
        np.testing.assert_allclose(np.asarray(trigamma(xs)), ys, rtol=1e-8)

    def test_domain_errors(self):
        for fn in (log_gamma, digamma, trigamma, trigamma_inverse):
            with self.assertRaises(DomainError):
                fn(0.0)
            with self.assertRaises(DomainError):
                fn(-1.0)

    def test_array_shape_preserved(self):
        out = digamma(np.array([[1.0, 2.0], [3.0, 4.0]]))
        self.assertEqual(out.shape, (2, 2))
        self.assertIsInstance(digamma(1.0), float)


class TestNormalLaw(unittest.TestCase):

    def test_values(self):
        self.assertEqual(normal_cdf(0.0), 0.5)
        self.assertAlmostEqual(normal_quantile(1 - 0.05 / 2), 1.959963984540054, places=10)
        self.assertAlmostEqual(normal_logpdf(0.0), -0.9189385332046727, places=12)

    def test_quantile_domain(self):
        for p in (0.0, 1.0, -0.1, float("nan")):
            with self.assertRaises(DomainError):
                normal_quantile(p)


class TestStudentT(unittest.TestCase):
    """t density, CDF, survival function and quantile."""

    DFS = (1.0, 2.5, 4.0, 30.0, INF_DF)

    def test_cdf_values(self):
        self.assertEqual(t_cdf(0.0, 1.0), 0.5)
        self.assertAlmostEqual(t_cdf(1.0, 1.0), 0.75, places=12)
        self.assertAlmostEqual(t_quantile(0.975, INF_DF), 1.959963984540054, places=10)

    def test_cdf_matches_scipy(self):
        x = np.linspace(-15, 15, 61)
        for df in (1.0, 2.5, 4.0, 30.0):
            np.testing.assert_allclose(t_cdf(x, df), stats.t.cdf(x, df), rtol=1e-10, atol=1e-14)

    def test_symmetry_and_monotonicity(self):
        x = np.linspace(-30, 30, 601)
        for df in self.DFS:
            cdf = np.asarray(t_cdf(x, df))
            self.assertTrue(np.all(np.diff(cdf) >= 0))
            self.assertTrue(np.all((cdf >= 0) & (cdf <= 1)))
            np.testing.assert_allclose(np.asarray(t_cdf(-x, df)), 1.0 - cdf, atol=1e-14)

    def test_quantile_round_trip(self):
        # Upper half follows by symmetry; cdf rounds to 1 there for large x.
        x = np.linspace(-20, 0, 81)
        for df in self.DFS:
            p = np.asarray(t_cdf(x, df))
            np.testing.assert_allclose(np.asarray(t_quantile(p, df)), x, atol=1e-8)
            np.testing.assert_allclose(np.asarray(t_quantile(1.0 - p[1:], df)), -x[1:], atol=1e-6)

    def test_quantile_domain(self):
        with self.assertRaises(DomainError):
            t_quantile(1.0, 3.0)
        with self.assertRaises(DomainError):
            t_quantile(0.5, 0.0)

    def test_large_df_approaches_normal(self):
        x = np.linspace(-10, 10, 201)
        diff = np.abs(np.asarray(t_cdf(x, 1e6)) - np.asarray(normal_cdf(x)))
        self.assertLessEqual(diff.max(), 1e-4)

    def test_density_integrates_to_one(self):
        for df in (3.0, 4.0, 30.0, INF_DF):
            total, _ = integrate.quad(lambda v: math.exp(t_logpdf(v, df)), -200, 200, limit=200)
            self.assertAlmostEqual(total, 1.0, delta=1e-6)
        # Cauchy tails beyond ±200 are not negligible; compare with the CDF instead.
        total, _ = integrate.quad(lambda v: math.exp(t_logpdf(v, 1.0)), -200, 200, limit=200)
        self.assertAlmostEqual(total, t_cdf(200.0, 1.0) - t_cdf(-200.0, 1.0), delta=1e-8)

    def test_survival_and_log_survival(self):
        x = np.array([0.5, 3.0, 10.0, 40.0])
        for df in (1.0, 5.0, INF_DF):
            np.testing.assert_allclose(np.asarray(t_sf(x, df)), 1.0 - np.asarray(t_cdf(x, df)),
                                       atol=1e-14)
        # deep tail: finite where the survival function underflows
        self.assertTrue(math.isfinite(t_logsf(1e5, 50.0)))
        self.assertTrue(math.isfinite(t_logsf(100.0, INF_DF)))
        self.assertAlmostEqual(t_logsf(40.0, 5.0), stats.t.logsf(40.0, 5.0), places=8)

    def test_central_prob(self):
        for df in (1.0, 5.0, INF_DF):
            for x in (1e-9, 0.3, 2.0, -4.0):
                expected = t_cdf(abs(x), df) - 0.5
                self.assertAlmostEqual(t_central_prob(x, df), expected, delta=1e-14)
        # tiny intervals keep relative accuracy
        self.assertAlmostEqual(t_central_prob(1e-12, INF_DF) / 1e-12,
                               1.0 / math.sqrt(2 * math.pi), places=8)


class TestSampling(unittest.TestCase):

    def test_seeded_generators_reproduce(self):
        a = make_rng(42).standard_normal(5)
        b = make_rng(42).standard_normal(5)
        np.testing.assert_array_equal(a, b)
        c = spawn_rng(7, 1, 2, 3).random(4)
        d = spawn_rng(7, 1, 2, 3).random(4)
        e = spawn_rng(7, 1, 2, 4).random(4)
        np.testing.assert_array_equal(c, d)
        self.assertFalse(np.array_equal(c, e))

    def test_chisq_mean(self):
        draws = chisq_sample(make_rng(1), 2.0, 1_000_000)
        self.assertAlmostEqual(draws.mean(), 2.0, delta=0.01)
        with self.assertRaises(DomainError):
            chisq_sample(make_rng(1), INF_DF, 3)

    def test_t_sample_ks(self):
        draws = t_sample(make_rng(3), 4.0, 20_000)
        self.assertGreater(stats.kstest(draws, lambda v: t_cdf(v, 4.0)).pvalue, 0.01)
        normals = t_sample(make_rng(4), INF_DF, 20_000)
        self.assertGreater(stats.kstest(normals, "norm").pvalue, 0.01)


class TestDistributionTypes(unittest.TestCase):

    def test_generalized_t(self):
        law = GeneralizedT(location=2.0, scale=3.0, df=5.0)
        self.assertAlmostEqual(law.cdf(2.0), 0.5)
        self.assertAlmostEqual(law.logpdf(2.0), t_logpdf(0.0, 5.0) - math.log(3.0))
        self.assertAlmostEqual(law.cdf(law.quantile(0.9)), 0.9, places=10)
        self.assertAlmostEqual(law.sf(5.0), t_sf(1.0, 5.0))
        normal = GeneralizedT(location=0.0, scale=1.0, df=INF_DF)
        self.assertAlmostEqual(normal.cdf(1.0), normal_cdf(1.0))
        with self.assertRaises(DomainError):
            GeneralizedT(location=0.0, scale=0.0, df=3.0)

    def test_scaled_chi_square(self):
        law = ScaledChiSquare(scale=2.0, df=6.0)
        self.assertEqual(law.mean(), 2.0)
        self.assertAlmostEqual(float(np.mean(law.sample(make_rng(5), 200_000))), 2.0, delta=0.02)
        self.assertAlmostEqual(law.cdf(2.0), stats.chi2.cdf(6.0, 6.0))
        point = ScaledChiSquare(scale=0.5, df=INF_DF)
        self.assertTrue(point.is_degenerate)
        self.assertEqual(point.cdf(0.49), 0.0)
        self.assertEqual(point.cdf(0.5), 1.0)
        with self.assertRaises(DomainError):
            ScaledChiSquare(scale=1.0, df=0.0)


if __name__ == "__main__":
    unittest.main()
