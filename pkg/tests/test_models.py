#!/usr/bin/env python3
"""
Data Model Tests

Validation, persistence and documentation of the shrinkt dataclasses.
"""

import inspect
import os
import sys
import tempfile
import unittest

import numpy as np

sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from shrinkt import models
from shrinkt.models import SummaryStats, UnimodalPrior


class TestDocumentation(unittest.TestCase):

    def test_public_methods_have_docstrings(self):
        undocumented = []
        for cls_name, cls in inspect.getmembers(models, inspect.isclass):
            if cls.__module__ != models.__name__:
                continue
            for name, member in vars(cls).items():
                if name.startswith("_"):
                    continue
                func = member.fget if isinstance(member, property) else getattr(member, "__func__", member)
                if callable(func) and not inspect.getdoc(func):
                    undocumented.append(f"{cls_name}.{name}")
        self.assertEqual(undocumented, [])


class TestUnimodalPriorPersistence(unittest.TestCase):

    def test_save_and_load(self):
        prior = UnimodalPrior(weights=[0.6, 0.3, 0.1], intervals=[[0, 0], [-1, 1], [-2, 2]])
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "prior.json")
            prior.save_to_file(path)
            loaded = UnimodalPrior.load_from_file(path)
        np.testing.assert_allclose(loaded.weights, prior.weights)
        np.testing.assert_allclose(loaded.intervals, prior.intervals)
        self.assertAlmostEqual(loaded.mean(), 0.0)

    def test_rejects_interval_without_zero(self):
        with self.assertRaises(ValueError):
            UnimodalPrior(weights=[0.5, 0.5], intervals=[[0, 0], [1, 2]])


class TestSummaryStats(unittest.TestCase):

    def test_frame_columns_and_subset(self):
        data = SummaryStats(beta_hat=[1.0, -2.0, 0.5], se=[0.5, 0.0, 1.0], df=[4.0, 4.0, 4.0])
        self.assertEqual(list(data.to_frame().columns), ["id", "beta_hat", "se_hat", "df"])
        np.testing.assert_array_equal(data.zero_se, [False, True, False])
        kept = data.subset(~data.zero_se)
        self.assertEqual(len(kept), 2)
        np.testing.assert_allclose(kept.beta_hat, [1.0, 0.5])


if __name__ == "__main__":
    unittest.main()
