#!/usr/bin/env python3
"""
Pipeline Tests

The naive, two-step, ad hoc and q-value routes from summary statistics to
posterior tables.
"""

import math
import os
import sys
import unittest

import numpy as np
import pandas as pd

sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from shrinkt.exceptions import DomainError
from shrinkt.models import SummaryStats
from shrinkt.pipelines import (
    ALL_PIPELINES,
    PipelineId,
    bh_adjust,
    pval2se,
    run_adhoc,
    run_naive,
    run_pipeline,
    run_qvalue_baseline,
    run_two_step,
    storey_pi0,
)
from shrinkt.simulation import gaussian_mode_generate, make_scenario
from shrinkt.stats_core import INF_DF, make_rng, normal_cdf


def known_variance_data(n=400, seed=0):
    rng = make_rng(seed)
    beta = np.where(rng.random(n) < 0.6, 0.0, rng.normal(0.0, 2.0, n))
    se = rng.uniform(0.5, 1.5, n)
    return SummaryStats(beta_hat=beta + se * rng.standard_normal(n), se=se, df=np.full(n, INF_DF))


def estimated_variance_data(n=400, df=4.0, seed=1):
    rng = make_rng(seed)
    s2 = 0.5 * 4.0 / rng.chisquare(4.0, n)
    beta = np.where(rng.random(n) < 0.7, 0.0, rng.normal(0.0, 2.0, n))
    beta_hat = beta + np.sqrt(s2) * rng.standard_normal(n)
    s_hat = np.sqrt(s2 * rng.chisquare(df, n) / df)
    return SummaryStats(beta_hat=beta_hat, se=s_hat, df=np.full(n, df))


class TestPval2se(unittest.TestCase):
    """Normal-means standard errors from p-values."""

    def test_reference_values(self):
        self.assertAlmostEqual(pval2se(2.0, 0.05), 1.0204270, places=7)
        self.assertAlmostEqual(pval2se(-3.0, 0.01), 1.1646684, places=7)

    def test_reproduces_p_values(self):
        rng = make_rng(12)
        beta_hat = rng.normal(0.0, 3.0, 1000)
        p = 10 ** rng.uniform(-12, 0, 1000)
        s_prime = pval2se(beta_hat, p)
        recovered = 2.0 * np.asarray(normal_cdf(-np.abs(beta_hat / s_prime)))
        np.testing.assert_allclose(recovered, p, rtol=1e-8)

    def test_degenerate_inputs(self):
        self.assertTrue(math.isnan(pval2se(0.0, 0.3)))
        self.assertTrue(math.isnan(pval2se(1.0, 1.0)))
        with self.assertRaises(DomainError):
            pval2se(1.0, 0.0)
        with self.assertRaises(DomainError):
            pval2se(1.0, 1.5)

    def test_tiny_p_values_are_floored(self):
        self.assertTrue(math.isfinite(pval2se(5.0, 1e-320)))


class TestStoreyAndBH(unittest.TestCase):

    def test_storey_pi0(self):
        self.assertEqual(storey_pi0(np.ones(50)), 1.0)
        uniform = make_rng(2).random(10_000)
        self.assertTrue(0.9 <= storey_pi0(uniform) <= 1.0)
        self.assertEqual(storey_pi0(np.full(20, 0.01)), 0.1)

    def test_bh_adjust(self):
        adjusted = bh_adjust([0.01, 0.04, 0.03, 0.5])
        np.testing.assert_allclose(adjusted, [0.04, 0.04 * 4 / 3, 0.04 * 4 / 3, 0.5])

    def test_bh_adjust_is_monotone(self):
        p = make_rng(4).random(300)
        adjusted = bh_adjust(p)
        order = np.argsort(p)
        self.assertTrue(np.all(np.diff(adjusted[order]) >= 0))
        self.assertTrue(np.all(adjusted >= p))

    def test_bh_adjust_matches_step_up(self):
        p = make_rng(9).random(257) ** 3
        m = len(p)
        order = np.argsort(p, kind="mergesort")
        ranked = np.minimum.accumulate((p[order] * m / np.arange(1, m + 1))[::-1])[::-1]
        expected = np.empty(m)
        expected[order] = np.minimum(ranked, 1.0)
        np.testing.assert_allclose(bh_adjust(p), expected, rtol=1e-12)
        self.assertEqual(len(bh_adjust([])), 0)

    def test_qvalue_baseline_small_p_values(self):
        p = np.r_[np.full(10, 0.001), np.full(90, 0.9)]
        self.assertEqual(storey_pi0(p), 1.0)
        q = np.minimum(storey_pi0(p) * bh_adjust(p), 1.0)
        np.testing.assert_allclose(q[:10], 0.01)


class TestPipelineId(unittest.TestCase):

    def test_parse(self):
        self.assertIs(PipelineId.parse("two-step"), PipelineId.TWO_STEP_ALPHA0)
        self.assertIs(PipelineId.parse("two_step", alpha=1), PipelineId.TWO_STEP_ALPHA1)
        self.assertIs(PipelineId.parse("adhoc"), PipelineId.ADHOC_PVAL2SE)
        self.assertIs(PipelineId.parse("QVALUE"), PipelineId.QVALUE_BASELINE)
        self.assertIs(PipelineId.parse("naive"), PipelineId.NAIVE)
        with self.assertRaises(ValueError):
            PipelineId.parse("bayes")
        with self.assertRaises(ValueError):
            PipelineId.parse("two-step", alpha=0.5)
        self.assertEqual(len(ALL_PIPELINES), 5)


class TestPipelines(unittest.TestCase):
    """End-to-end pipeline behaviour."""

    def test_naive_equals_two_step_for_known_variances(self):
        data = known_variance_data()
        naive = run_naive(data)
        two = run_two_step(data, alpha=0)
        pd.testing.assert_frame_equal(naive.summary.table, two.summary.table)
        self.assertEqual(naive.pi0_hat, two.pi0_hat)

    def test_adhoc_matches_two_step_for_known_variances(self):
        data = known_variance_data(seed=5)
        adhoc = run_adhoc(data)
        two = run_two_step(data, alpha=0)
        np.testing.assert_allclose(adhoc.summary.column("post_mean"),
                                   two.summary.column("post_mean"), rtol=1e-6, atol=1e-9)
        self.assertAlmostEqual(adhoc.pi0_hat, two.pi0_hat, places=6)

    def test_two_step_alpha_agree_for_equal_standard_errors(self):
        rng = make_rng(6)
        n = 300
        beta = np.where(rng.random(n) < 0.5, 0.0, rng.normal(0.0, 3.0, n))
        data = SummaryStats(beta_hat=beta + 2.0 * rng.standard_normal(n), se=np.full(n, 2.0),
                            df=np.full(n, INF_DF))
        a0 = run_two_step(data, alpha=0)
        a1 = run_two_step(data, alpha=1)
        np.testing.assert_allclose(a0.summary.column("post_mean"), a1.summary.column("post_mean"),
                                   rtol=1e-6, atol=1e-9)
        np.testing.assert_allclose(a0.summary.column("lfdr"), a1.summary.column("lfdr"), atol=1e-8)

    def test_two_step_moderates(self):
        data = estimated_variance_data()
        result = run_two_step(data)
        self.assertTrue(np.all(result.df_moderated > data.df))
        s0 = math.sqrt(result.moderated.s0_sq)
        lo = np.minimum(data.se, s0) - 1e-12
        hi = np.maximum(data.se, s0) + 1e-12
        self.assertTrue(np.all((result.se_moderated >= lo) & (result.se_moderated <= hi)))
        frame = result.to_frame()
        self.assertEqual(list(frame.columns),
                         ["id", "beta_hat", "se_hat", "df", "se_moderated", "df_moderated",
                          "post_mean", "post_sd", "lfdr", "lfsr", "qvalue",
                          "lower_cred_95", "upper_cred_95"])
        report = result.report()
        self.assertEqual(report["pipeline"], "two_step_alpha0")
        self.assertIn("nu0", report)
        self.assertIn("log_likelihood", report)

    def test_naive_excludes_zero_standard_errors(self):
        data = SummaryStats(beta_hat=[1.0, 0.5, -2.0, 3.0], se=[1.0, 0.0, 1.2, 0.8],
                            df=[3.0, 3.0, 3.0, 3.0], ids=["a", "b", "c", "d"])
        result = run_naive(data)
        table = result.summary.table
        self.assertEqual(table["excluded"].tolist(), [False, True, False, False])
        self.assertTrue(table.loc[1, ["post_mean", "lfdr", "qvalue"]].isna().all())
        self.assertFalse(table.loc[[0, 2, 3], "lfdr"].isna().any())
        self.assertEqual(result.report()["n_excluded"], 1)

    def test_two_step_keeps_zero_standard_errors(self):
        data = SummaryStats(beta_hat=[1.0, 0.5, -2.0, 3.0], se=[1.0, 0.0, 1.2, 0.8],
                            df=[3.0, 3.0, 3.0, 3.0])
        result = run_two_step(data)
        self.assertFalse(result.summary.excluded.any())
        self.assertGreater(result.se_moderated[1], 0.0)

    def test_adhoc_excludes_zero_effects(self):
        data = estimated_variance_data(n=50)
        beta_hat = data.beta_hat.copy()
        beta_hat[3] = 0.0
        data = SummaryStats(beta_hat=beta_hat, se=data.se, df=data.df)
        table = run_adhoc(data).summary.table
        self.assertTrue(table["excluded"][3])
        self.assertTrue(math.isnan(table["lfdr"][3]))

    def test_qvalue_baseline(self):
        data = estimated_variance_data(seed=9)
        result = run_qvalue_baseline(data)
        table = result.summary.table
        np.testing.assert_allclose(table["post_mean"], data.beta_hat)
        self.assertTrue(table["lfdr"].isna().all())
        self.assertTrue(np.all(table["lower_cred_95"] < table["upper_cred_95"]))
        self.assertTrue(0.0 < result.pi0_hat <= 1.0)
        self.assertIsNone(result.fit)

    def test_single_unit(self):
        result = run_naive(SummaryStats(beta_hat=[1.2], se=[0.5], df=[4.0]))
        self.assertEqual(len(result.summary), 1)
        self.assertTrue(0.0 <= result.summary.column("lfdr")[0] <= 1.0)

    def test_dispatch_is_deterministic(self):
        data = estimated_variance_data(n=200, seed=3)
        for pipeline in ALL_PIPELINES:
            with self.subTest(pipeline=pipeline.value):
                a = run_pipeline(pipeline, data).to_frame()
                b = run_pipeline(pipeline.value, data).to_frame()
                pd.testing.assert_frame_equal(a, b)


class TestNullCalibration(unittest.TestCase):
    """All-null data at two samples per group."""

    @staticmethod
    def null_replicates(count):
        spec = make_scenario("spiky", 2, n_genes=2000, pi0=1.0)
        for rep in range(count):
            data, _ = gaussian_mode_generate(spec, None, make_rng(1000 + rep))
            yield data

    def test_two_step_is_conservative(self):
        pi0 = [run_two_step(data).pi0_hat for data in self.null_replicates(10)]
        self.assertGreaterEqual(sum(p >= 0.95 for p in pi0), 9)

    def test_naive_underestimates(self):
        pi0 = [run_naive(data).pi0_hat for data in self.null_replicates(10)]
        self.assertGreater(1.0 - float(np.mean(pi0)), 0.1)


if __name__ == "__main__":
    unittest.main()
