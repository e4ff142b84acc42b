# Copyright (c) 2026, Mansy and Contributors
# See license.txt

import tempfile
import unittest
from pathlib import Path

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from feature_cp.exceptions import DataError, ValidationError
from feature_cp.feature_cp.data import (
	Dataset,
	gen_synthetic_1d_hetero,
	gen_synthetic_classification,
	gen_synthetic_multidim,
	gen_zero_quantile,
	load_csv,
	split,
	standardize,
	write_csv,
)


class TestGenerators(unittest.TestCase):
	def test_multidim_is_deterministic(self):
		a = gen_synthetic_multidim(3, 3)
		b = gen_synthetic_multidim(3, 3)
		np.testing.assert_array_equal(a.X, b.X)
		np.testing.assert_array_equal(a.Y, b.Y)
		self.assertEqual(a.X.shape, (3, 100))
		self.assertEqual(a.Y.shape, (3, 10))

	def test_multidim_moments(self):
		ds = gen_synthetic_multidim(0, 100_000)
		np.testing.assert_allclose(ds.X.mean(axis=0), 0.5, atol=0.01)
		rng = np.random.default_rng(0)
		W = rng.standard_normal((10, 100)) / np.sqrt(100)
		residual = ds.Y - ds.X @ W.T
		np.testing.assert_allclose(residual.var(axis=0), 1.0, atol=0.05)

	def test_hetero_is_deterministic(self):
		np.testing.assert_array_equal(gen_synthetic_1d_hetero(5, 10).Y, gen_synthetic_1d_hetero(5, 10).Y)

	def test_hetero_noise_grows_with_x(self):
		ds = gen_synthetic_1d_hetero(1, 100_000)
		x, y = ds.X[:, 0], ds.Y[:, 0]
		residual = y - x * np.sin(x)
		low = residual[x < 0.1]
		high = residual[x > 4.9]
		self.assertAlmostEqual(low.std(), 0.11, delta=0.02)
		self.assertAlmostEqual(high.std(), 1.09, delta=0.08)
		self.assertAlmostEqual(y[x < 0.05].mean(), 0.0, delta=0.05)

	def test_classification_labels(self):
		ds = gen_synthetic_classification(2, 500, n_classes=3)
		self.assertEqual(set(np.unique(ds.Y)), {0.0, 1.0, 2.0})

	def test_zero_quantile_oracle_is_exact_on_clean_rows(self):
		ds, oracle = gen_zero_quantile(4, 2000)
		exact = np.all(oracle.forward(ds.X) == ds.Y, axis=1)
		self.assertAlmostEqual(exact.mean(), 0.901, delta=0.03)

	def test_dataset_rejects_non_finite(self):
		with self.assertRaises(ValidationError):
			Dataset(np.array([[np.nan]]), np.array([[1.0]]))


class TestCsv(unittest.TestCase):
	def test_reads_features_and_targets(self):
		with tempfile.TemporaryDirectory() as tmp:
			path = Path(tmp) / "data.csv"
			path.write_text("a,b,t\n1,2,3\n4,5,6\n7,8,9\n", encoding="utf-8")
			ds = load_csv(path, ["t"])
		self.assertEqual(ds.X.shape, (3, 2))
		self.assertEqual(ds.Y.shape, (3, 1))
		np.testing.assert_array_equal(ds.Y[:, 0], [3, 6, 9])
		self.assertEqual(ds.feature_names, ["a", "b"])

	def test_nan_cell_names_its_location(self):
		with tempfile.TemporaryDirectory() as tmp:
			path = Path(tmp) / "data.csv"
			path.write_text("a,t\n1,2\nNaN,3\n", encoding="utf-8")
			with self.assertRaises(DataError) as ctx:
				load_csv(path, ["t"])
		self.assertEqual(ctx.exception.row, 1)
		self.assertEqual(ctx.exception.column, "a")

	def test_missing_file_and_targets(self):
		with self.assertRaises(DataError):
			load_csv("/nonexistent/file.csv", ["t"])
		with self.assertRaises(DataError):
			load_csv("/nonexistent/file.csv", [])

	def test_round_trip(self):
		ds = gen_synthetic_multidim(9, 20, d=4, k=2)
		with tempfile.TemporaryDirectory() as tmp:
			path = write_csv(ds, Path(tmp) / "out.csv")
			back = load_csv(path, ["y0", "y1"])
		np.testing.assert_array_equal(back.X, ds.X)
		np.testing.assert_array_equal(back.Y, ds.Y)


class TestSplit(unittest.TestCase):
	def test_sizes(self):
		s = split(5, (2, 2, 1), 0)
		self.assertEqual((len(s.train), len(s.cal), len(s.test)), (2, 2, 1))
		s = split(10, (2, 2, 1), 0)
		self.assertEqual((len(s.train), len(s.cal), len(s.test)), (4, 4, 2))

	@given(st.integers(3, 500), st.integers(0, 2**32 - 1))
	@settings(max_examples=100, deadline=None)
	def test_disjoint_and_exhaustive(self, n, seed):
		s = split(n, (2, 2, 1), seed)
		parts = [set(s.train.tolist()), set(s.cal.tolist()), set(s.test.tolist())]
		self.assertEqual(sum(map(len, parts)), n)
		self.assertEqual(set().union(*parts), set(range(n)))
		for size, share in zip(map(len, parts), (0.4, 0.4, 0.2)):
			self.assertLess(abs(size - share * n), 1.0 + 1e-9)

	def test_too_few_rows(self):
		with self.assertRaises(ValidationError):
			split(2, (2, 2, 1), 0)


class TestStandardize(unittest.TestCase):
	def test_constant_column_passes_through(self):
		X = np.column_stack([np.full(6, 3.0), np.arange(6.0)])
		out, state = standardize(Dataset(X, np.arange(6.0)), np.arange(6))
		np.testing.assert_array_equal(out.X[:, 0], 3.0)
		self.assertEqual(state.x_std[0], 1.0)

	def test_train_columns_are_standard(self):
		ds = gen_synthetic_multidim(1, 300, d=5, k=2)
		fit = np.arange(200)
		out, _ = standardize(ds, fit)
		np.testing.assert_allclose(out.X[fit].mean(axis=0), 0.0, atol=1e-12)
		np.testing.assert_allclose(out.X[fit].std(axis=0), 1.0, atol=1e-12)
		np.testing.assert_allclose(out.Y[fit].mean(axis=0), 0.0, atol=1e-12)

	def test_inverse_round_trip(self):
		ds = gen_synthetic_multidim(2, 50, d=3, k=2)
		out, state = standardize(ds, np.arange(30))
		back = state.inverse(out)
		np.testing.assert_allclose(back.X, ds.X, atol=1e-12)
		np.testing.assert_allclose(back.Y, ds.Y, atol=1e-12)

	def test_statistics_only_see_the_fit_rows(self):
		ds = gen_synthetic_multidim(3, 100, d=3, k=1)
		_, on_train = standardize(ds, np.arange(40))
		_, on_all = standardize(ds, np.arange(100))
		self.assertFalse(np.array_equal(on_train.x_mean, on_all.x_mean))
