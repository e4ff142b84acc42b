# Copyright (c) 2026, Mansy and Contributors
# See license.txt

import itertools
import unittest

import numpy as np

from feature_cp.exceptions import ConfigDigestMismatch, ValidationError
from feature_cp.feature_cp.band import Box
from feature_cp.feature_cp.conformal import CalibrationRecord, ScoreKind, UnboundedBand
from feature_cp.feature_cp.data import (
	Dataset,
	gen_synthetic_1d_hetero,
	gen_synthetic_classification,
	gen_synthetic_multidim,
)
from feature_cp.feature_cp.fcp import (
	MSelectionReport,
	SurrogateSearchConfig,
	combine_endpoints,
	fcp_calibrate,
	fcp_calibrate_classifier,
	fcp_classify_set,
	fcp_classify_sets,
	fcp_detect,
	fcp_detect_batch,
	fcp_estimate,
	fcp_estimate_bands,
	fcqr_band,
	fcqr_bands,
	fcqr_calibrate,
	fcqr_detect,
	fcqr_detect_batch,
	fcqr_indicators,
	fcqr_score_config,
	fcqr_scores,
	record_search_config,
	fcqr_search_config,
	select_steps,
	tolerance_slack,
)
from feature_cp.feature_cp.nn import LossKind, MlpParams, MlpSpec, SplitModel, TrainConfig, init_params, train


def fixed_record(q: float, cfg: SurrogateSearchConfig) -> CalibrationRecord:
	return CalibrationRecord.build([q] * 20, 0.1, ScoreKind.FEATURE_SURROGATE, cfg.to_dict())


def affine_head_model(seed: int) -> tuple[SplitModel, float]:
	"""Random ReLU feature extractor (3 -> 8 -> 4) with a well-conditioned affine head 4 -> 2."""
	rng = np.random.default_rng(seed)
	base = init_params(MlpSpec((3, 8, 4)), seed)
	q, _ = np.linalg.qr(rng.normal(size=(4, 4)))
	s = rng.uniform(1.0, 2.0, size=2)
	head = s[:, None] * q[:2]
	spec = MlpSpec((3, 8, 4, 2))
	params = MlpParams((*base.weights, head), (np.full(8, 0.1), np.full(4, 0.1), rng.normal(size=2)))
	return SplitModel(spec, params, 2), float(s.max())


def scalar_head(slope: float, offset: float) -> SplitModel:
	"""v = relu(x) on a one-wide feature layer, then g(v) = slope * v + offset."""
	spec = MlpSpec((1, 1, 1))
	return SplitModel(spec, MlpParams((np.ones((1, 1)), np.array([[slope]])), (np.zeros(1), np.array([offset]))), 1)


class TestStepSelection(unittest.TestCase):
	def test_smallest_step_count_reaching_target(self):
		report = select_steps([10, 100], [0.84, 0.93], 0.1)
		self.assertEqual(report.chosen_M, 100)
		self.assertTrue(report.reached_target)
		self.assertEqual(select_steps([10, 30, 100], [0.91, 0.95, 0.97], 0.1).chosen_M, 10)

	def test_narrowest_candidate_reaching_target(self):
		report = select_steps([10, 30, 100], [0.95, 0.91, 0.93], 0.1, widths=[0.8, 0.5, 0.6])
		self.assertEqual(report.chosen_M, 30)
		self.assertEqual(report.widths, (0.8, 0.5, 0.6))
		# ties go to the smaller step count
		self.assertEqual(select_steps([10, 30], [0.9, 0.9], 0.1, widths=[0.0, 0.0]).chosen_M, 10)

	def test_infinite_width_never_qualifies(self):
		report = select_steps([10, 30], [1.0, 0.92], 0.1, widths=[np.inf, 2.0])
		self.assertEqual(report.chosen_M, 30)
		report = select_steps([10, 30], [1.0, 1.0], 0.1, widths=[np.inf, np.inf])
		self.assertEqual(report.chosen_M, 30)
		self.assertFalse(report.reached_target)
		self.assertEqual(MSelectionReport.from_dict(report.to_dict()), report)

	def test_falls_back_to_the_largest_and_flags(self):
		report = select_steps([10, 30, 100], [0.5, 0.6, 0.7], 0.1)
		self.assertEqual(report.chosen_M, 100)
		self.assertFalse(report.reached_target)
		self.assertEqual(MSelectionReport.from_dict(report.to_dict()), report)


class TestFeatureCalibration(unittest.TestCase):
	def test_perfect_model_gives_a_zero_quantile(self):
		model, _ = affine_head_model(0)
		X = np.random.default_rng(0).uniform(size=(50, 3))
		ds = Dataset(X, model.forward(X))
		record, report = fcp_calibrate(model, ds, np.arange(50), 0.1, SurrogateSearchConfig(), (10, 30))
		self.assertEqual(record.q, 0.0)
		self.assertEqual(report.chosen_M, 10)
		band = fcp_estimate(model, record, X[0])
		np.testing.assert_allclose(band.lo, band.hi)
		np.testing.assert_allclose(band.lo, model.forward(X[0]), atol=1e-12)
		self.assertTrue(fcp_detect(model, record, X[0], model.forward(X[0]), record_search_config(record)))

	def test_record_binds_the_chosen_step_count(self):
		model = SplitModel(MlpSpec((10, 16, 16, 2)), init_params(MlpSpec((10, 16, 16, 2)), 1), 1)
		ds = gen_synthetic_multidim(1, 100, d=10, k=2)
		record, report = fcp_calibrate(model, ds, np.arange(100), 0.2, SurrogateSearchConfig(), (5, 20))
		self.assertEqual(record.score_config["max_steps"], report.chosen_M)
		self.assertEqual(record.scores.size, 80)
		self.assertEqual(len(report.validation_coverages), 2)

	def test_deterministic(self):
		model = SplitModel(MlpSpec((10, 16, 16, 2)), init_params(MlpSpec((10, 16, 16, 2)), 2), 1)
		ds = gen_synthetic_multidim(2, 60, d=10, k=2)
		a = fcp_calibrate(model, ds, np.arange(60), 0.1, SurrogateSearchConfig(), (10, 30))
		b = fcp_calibrate(model, ds, np.arange(60), 0.1, SurrogateSearchConfig(), (10, 30))
		self.assertEqual(a[0].to_dict(), b[0].to_dict())
		self.assertEqual(a[1], b[1])

	def test_fold_too_small_for_selection(self):
		model, _ = affine_head_model(0)
		ds = Dataset(np.zeros((4, 3)), np.zeros((4, 2)))
		with self.assertRaises(ValidationError):
			fcp_calibrate(model, ds, np.arange(4), 0.1, SurrogateSearchConfig())
		with self.assertRaises(ValidationError):
			fcp_calibrate(model, ds, [], 0.1, SurrogateSearchConfig())

	def test_marginal_coverage_of_detection(self):
		spec = MlpSpec((10, 16, 16, 2))
		coverages = []
		for seed in range(5):
			model = SplitModel(spec, init_params(spec, seed), 2)
			ds = gen_synthetic_multidim(10 + seed, 2500, d=10, k=2)
			record, _ = fcp_calibrate(model, ds, np.arange(500), 0.1, SurrogateSearchConfig(), (30, 100))
			self.assertTrue(record.is_finite)
			test = np.arange(500, 2500)
			coverages.append(np.mean(fcp_detect_batch(model, record, ds.X[test], ds.Y[test], record_search_config(record))))
		self.assertGreaterEqual(np.mean(coverages), 0.87)
		self.assertLessEqual(np.mean(coverages), 0.93)


class TestDetectionAndEstimation(unittest.TestCase):
	def test_digest_mismatch_is_refused(self):
		model, _ = affine_head_model(1)
		record = fixed_record(0.5, SurrogateSearchConfig())
		with self.assertRaises(ConfigDigestMismatch):
			fcp_detect(model, record, np.zeros(3), np.zeros(2), SurrogateSearchConfig(max_steps=99))

	def test_infinite_quantile_accepts_everything(self):
		model, _ = affine_head_model(1)
		cfg = SurrogateSearchConfig()
		record = CalibrationRecord.build([0.3], 0.1, ScoreKind.FEATURE_SURROGATE, cfg.to_dict())
		self.assertTrue(fcp_detect(model, record, np.zeros(3), [1e6, -1e6], cfg))
		self.assertIsInstance(fcp_estimate(model, record, np.zeros(3)), UnboundedBand)

	def test_own_prediction_is_accepted(self):
		model, _ = affine_head_model(2)
		cfg = SurrogateSearchConfig()
		x = np.array([0.2, 0.4, 0.9])
		self.assertTrue(fcp_detect(model, fixed_record(0.01, cfg), x, model.forward(x), cfg))

	def test_linear_head_band_is_exact(self):
		a, b = np.array([[0.5, -2.0, 1.0]]), np.array([0.3])
		spec = MlpSpec((3, 3, 1))
		model = SplitModel(spec, MlpParams((np.eye(3), a), (np.zeros(3), b)), 1)
		x = np.array([0.1, 0.7, 0.4])
		center = a[0] @ x + b[0]
		# half-width is q times the dual norm of a: l2 for an l2 ball, l1 for an l_inf ball
		for norm, half in (("l2", 0.2 * np.sqrt(5.25)), ("linf", 0.2 * 3.5)):
			with self.subTest(norm=norm):
				band = fcp_estimate(model, fixed_record(0.2, SurrogateSearchConfig(feature_norm=norm)), x)
				self.assertAlmostEqual(band.lo[0], center - half, places=12)
				self.assertAlmostEqual(band.hi[0], center + half, places=12)

	def test_band_shrinks_with_the_quantile(self):
		model, _ = affine_head_model(3)
		cfg = SurrogateSearchConfig()
		X = np.random.default_rng(3).uniform(size=(10, 3))
		wide = fcp_estimate_bands(model, fixed_record(0.5, cfg), X)
		narrow = fcp_estimate_bands(model, fixed_record(0.2, cfg), X)
		for w, n in zip(wide, narrow):
			self.assertTrue(np.all(w.lo <= n.lo) and np.all(n.hi <= w.hi))

	def test_detection_implies_membership(self):
		model, s_max = affine_head_model(4)
		cfg = SurrogateSearchConfig(eta=0.5 / s_max**2, max_steps=1000)
		record = fixed_record(0.4, cfg)
		rng = np.random.default_rng(4)
		X = rng.uniform(size=(1000, 3))
		Y = model.forward(X) + rng.uniform(-1.5, 1.5, size=(1000, 2))
		accepted = fcp_detect_batch(model, record, X, Y, cfg)
		bands = fcp_estimate_bands(model, record, X)
		self.assertTrue(accepted.any() and not accepted.all())
		for ok, band, y, slack in zip(accepted, bands, Y, tolerance_slack(Y, cfg)):
			if ok:
				self.assertTrue(band.contains(y, atol=slack))

	def test_detection_implies_membership_on_a_trained_relu_head(self):
		ds = gen_synthetic_multidim(6, 1500, d=10, k=3)
		spec = MlpSpec((10, 32, 32, 3))
		model = train(spec, 1, ds.X[:500], ds.Y[:500], LossKind.mse(), TrainConfig(epochs=30, batch_size=32, seed=6))
		self.assertTrue(any(relu for _w, _b, relu in model.head_layers()))
		record, _ = fcp_calibrate(model, ds, np.arange(500, 1000), 0.1, SurrogateSearchConfig(), (30, 100, 300))
		self.assertTrue(record.is_finite)
		cfg = record_search_config(record)
		test = np.arange(1000, 1500)
		Y = ds.Y[test] + np.random.default_rng(6).uniform(-0.5, 0.5, size=(500, 3))
		accepted = fcp_detect_batch(model, record, ds.X[test], Y, cfg)
		bands = fcp_estimate_bands(model, record, ds.X[test])
		self.assertTrue(accepted.any())
		for ok, band, y, slack in zip(accepted, bands, Y, tolerance_slack(Y, cfg)):
			if ok:
				self.assertTrue(band.contains(y, atol=slack))


class TestFeatureCQR(unittest.TestCase):
	def test_indicators(self):
		c_lo, c_hi = fcqr_indicators([1.0], [3.0], [2.0])
		self.assertEqual((c_lo[0], c_hi[0]), (1.0, 1.0))
		c_lo, c_hi = fcqr_indicators([2.5], [1.5], [2.0])
		self.assertEqual((c_lo[0], c_hi[0]), (-1.0, -1.0))

	def test_signed_scores(self):
		cfg = SurrogateSearchConfig(eta=0.5, max_steps=10, rel_tol=1e-24, abs_tol=1e-24)
		lo, hi = scalar_head(1.0, -1.0), scalar_head(1.0, 1.0)
		# x = 2: lower head predicts 1, upper head predicts 3
		s_lo, s_hi = fcqr_scores(lo, hi, [[2.0]], [2.5], cfg)
		np.testing.assert_allclose([s_lo.scores[0], s_hi.scores[0]], [-1.5, -0.5])
		s_lo, s_hi = fcqr_scores(lo, hi, [[2.0]], [4.0], cfg)
		np.testing.assert_allclose([s_lo.scores[0], s_hi.scores[0]], [-3.0, 1.0])

	def test_endpoint_table(self):
		lo_box = Box([0.0], [1.0])
		hi_box = Box([4.0], [5.0])
		cases = {(0.5, 0.5): (0.0, 5.0), (0.5, -0.5): (0.0, 4.0), (-0.5, 0.5): (1.0, 5.0), (-0.5, -0.5): (1.0, 4.0)}
		for (q_lo, q_hi), expected in cases.items():
			lower, upper = combine_endpoints(q_lo, q_hi, lo_box, hi_box)
			self.assertEqual((lower[0], upper[0]), expected)

	def test_no_negative_zero_scores(self):
		cfg = SurrogateSearchConfig(eta=0.5)
		lo, hi = scalar_head(1.0, -1.0), scalar_head(1.0, 1.0)
		# y sits exactly on the lower prediction: covered, zero displacement
		s_lo, _ = fcqr_scores(lo, hi, [[2.0]], [1.0], cfg)
		self.assertEqual(s_lo.scores[0], 0.0)
		self.assertFalse(np.signbit(s_lo.scores[0]))

	def test_negative_zero_quantile_is_a_point_end(self):
		cfg = SurrogateSearchConfig()
		lo, hi = scalar_head(1.0, -1.0), scalar_head(1.0, 1.0)
		record_lo = CalibrationRecord.build([-0.0] * 20, 0.05, ScoreKind.FEATURE_CQR_SIGNED_LO, fcqr_score_config(cfg, "lo"))
		record_hi = CalibrationRecord.build([-0.022] * 20, 0.05, ScoreKind.FEATURE_CQR_SIGNED_HI, fcqr_score_config(cfg, "hi"))
		band = fcqr_band(record_lo, record_hi, lo, hi, [2.0])
		self.assertFalse(band.degenerate)
		self.assertEqual(band.lo[0], 1.0)
		self.assertAlmostEqual(band.hi[0], 3.0 - 0.022, places=9)

	def test_unconverged_searches_score_infinity(self):
		cfg = SurrogateSearchConfig(eta=1e-3, max_steps=1, backtrack=False)
		lo, hi = scalar_head(1.0, -1.0), scalar_head(1.0, 1.0)
		s_lo, s_hi = fcqr_scores(lo, hi, [[2.0]], [2.5], cfg)
		self.assertEqual((s_lo.scores[0], s_hi.scores[0]), (np.inf, np.inf))

	def test_zero_quantiles_reproduce_the_heads(self):
		cfg = SurrogateSearchConfig()
		lo, hi = scalar_head(1.0, -1.0), scalar_head(2.0, 1.0)
		record_lo = CalibrationRecord.build([0.0] * 20, 0.05, ScoreKind.FEATURE_CQR_SIGNED_LO, fcqr_score_config(cfg, "lo"))
		record_hi = CalibrationRecord.build([0.0] * 20, 0.05, ScoreKind.FEATURE_CQR_SIGNED_HI, fcqr_score_config(cfg, "hi"))
		band = fcqr_band(record_lo, record_hi, lo, hi, [1.5])
		self.assertEqual((band.lo[0], band.hi[0]), (0.5, 4.0))

	def test_detection_agrees_with_the_band(self):
		cfg = SurrogateSearchConfig(eta=0.5, max_steps=10)
		lo, hi = scalar_head(1.0, -1.0), scalar_head(1.0, 1.0)
		rng = np.random.default_rng(5)
		for q_lo, q_hi in itertools.product((0.3, -0.4, -0.0), (0.6, -0.2, -0.022)):
			record_lo = CalibrationRecord.build([q_lo] * 20, 0.05, ScoreKind.FEATURE_CQR_SIGNED_LO, fcqr_score_config(cfg, "lo"))
			record_hi = CalibrationRecord.build([q_hi] * 20, 0.05, ScoreKind.FEATURE_CQR_SIGNED_HI, fcqr_score_config(cfg, "hi"))
			for _ in range(250):
				x = rng.uniform(1.0, 3.0)
				y = x + rng.uniform(-2.5, 2.5)
				band = fcqr_band(record_lo, record_hi, lo, hi, [x])
				slack = tolerance_slack([y], cfg)[0]
				if min(abs(y - band.lo[0]), abs(y - band.hi[0])) < slack + 1e-6:
					continue
				self.assertEqual(fcqr_detect(lo, hi, record_lo, record_hi, [x], y, cfg), band.contains(y, atol=0.0))

	def test_calibration_coverage(self):
		spec = MlpSpec((1, 16, 16, 1))
		cfg = SurrogateSearchConfig()
		coverages = []
		for seed in range(5):
			lo = SplitModel(spec, init_params(spec, 2 * seed), 2)
			hi = SplitModel(spec, init_params(spec, 2 * seed + 1), 2)
			ds = gen_synthetic_1d_hetero(seed, 2500)
			record_lo, record_hi, report = fcqr_calibrate(lo, hi, ds, np.arange(500), 0.1, cfg, (10, 30))
			self.assertIn(report.chosen_M, (10, 30))
			self.assertEqual(record_lo.alpha, 0.05)
			test = np.arange(500, 2500)
			chosen = fcqr_search_config(record_lo, record_hi)
			coverages.append(np.mean(fcqr_detect_batch(lo, hi, record_lo, record_hi, ds.X[test], ds.Y[test, 0], chosen)))
		self.assertGreaterEqual(np.mean(coverages), 0.87)

	def test_detection_stays_inside_the_band_on_trained_relu_heads(self):
		ds = gen_synthetic_1d_hetero(7, 1500)
		spec = MlpSpec((1, 32, 32, 1))
		train_cfg = TrainConfig(epochs=30, batch_size=32, seed=7)
		lo = train(spec, 1, ds.X[:500], ds.Y[:500], LossKind.pinball(0.05), train_cfg)
		hi = train(spec, 1, ds.X[:500], ds.Y[:500], LossKind.pinball(0.95), train_cfg)
		record_lo, record_hi, _ = fcqr_calibrate(lo, hi, ds, np.arange(500, 1000), 0.1, SurrogateSearchConfig(), (30, 100, 300))
		self.assertTrue(record_lo.is_finite and record_hi.is_finite)
		cfg = fcqr_search_config(record_lo, record_hi)
		test = np.arange(1000, 1500)
		y = ds.Y[test, 0]
		accepted = fcqr_detect_batch(lo, hi, record_lo, record_hi, ds.X[test], y, cfg)
		bands = fcqr_bands(record_lo, record_hi, lo, hi, ds.X[test])
		slack = tolerance_slack(y, cfg)
		inside = np.array([b.contains(v, atol=s) for b, v, s in zip(bands, y, slack)])
		self.assertGreater(accepted.mean(), 0.8)
		# the shrinking side follows the search path only up to its step size
		self.assertLessEqual(np.mean(accepted & ~inside), 0.01)

	def test_rejects_multidimensional_responses(self):
		with self.assertRaises(ValidationError):
			fcqr_calibrate(
				scalar_head(1, 0), scalar_head(1, 0), Dataset(np.zeros((10, 1)), np.zeros((10, 2))), np.arange(10), 0.1,
				SurrogateSearchConfig(),
			)


class TestClassification(unittest.TestCase):
	def three_sector_head(self) -> SplitModel:
		angles = np.array([0.0, 2 * np.pi / 3, 4 * np.pi / 3])
		w = np.stack([np.cos(angles), np.sin(angles)], axis=1)
		spec = MlpSpec((2, 2, 3))
		return SplitModel(spec, MlpParams((np.eye(2), w), (np.zeros(2), np.zeros(3))), 1)

	def record(self, q: float) -> CalibrationRecord:
		cfg = SurrogateSearchConfig(loss="cross_entropy")
		return CalibrationRecord.build([q] * 20, 0.1, ScoreKind.FEATURE_SURROGATE, cfg.to_dict())

	def test_zero_radius_is_the_point_prediction(self):
		model = self.three_sector_head()
		x = np.array([0.5, 0.1])
		self.assertEqual(fcp_classify_set(model, self.record(0.0), x), {int(np.argmax(model.forward(x)))})

	def test_large_radius_reaches_every_label(self):
		spec = MlpSpec((2, 2, 2))
		model = SplitModel(spec, MlpParams((np.eye(2), np.eye(2)), (np.zeros(2), np.zeros(2))), 1)
		self.assertEqual(fcp_classify_set(model, self.record(10.0), [0.3, 0.0]), {0, 1})

	def test_sampled_set_matches_the_grid_image(self):
		model = self.three_sector_head()
		x, q = np.array([0.05, 0.02]), 0.3
		axis = np.linspace(-q, q, 401)
		gx, gy = np.meshgrid(x[0] + axis, x[1] + axis, indexing="ij")
		grid = set(np.argmax(model.head_forward(np.stack([gx.ravel(), gy.ravel()], axis=1)), axis=1).tolist())
		sampled = fcp_classify_set(model, self.record(q), x, n_samples=100_000, seed=0)
		self.assertLessEqual(sampled, grid)
		self.assertEqual(sampled, grid)

	def test_classifier_calibration(self):
		spec = MlpSpec((10, 16, 16, 3))
		model = SplitModel(spec, init_params(spec, 0), 2)
		ds = gen_synthetic_classification(0, 300)
		record, _ = fcp_calibrate_classifier(model, ds, np.arange(200), 0.1, SurrogateSearchConfig(), (10, 30))
		self.assertEqual(record.score_config["loss"], "cross_entropy")
		sets = fcp_classify_sets(model, record, ds.X[200:210], n_samples=200)
		for x, labels in zip(ds.X[200:210], sets):
			self.assertIn(int(np.argmax(model.forward(x))), labels)
