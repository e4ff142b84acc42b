# Copyright (c) 2026, Mansy and contributors
# For license information, please see license.txt

"""
Conformal methods as seen by the experiment runner.

Each method owns its base model(s) and calibration records and exposes the
same four stages: fit, calibrate, evaluate and diagnostics. Calibration can
be repeated on the same fitted models, which is how alpha sweeps reuse one
training run per seed.
"""

from dataclasses import replace
from pathlib import Path

import numpy as np

from feature_cp.exceptions import ValidationError
from feature_cp.feature_cp.band import forward_bounds, sample_inner_box, tightness_ratio
from feature_cp.feature_cp.conformal import (
	CalibrationRecord,
	cqr_bands,
	cqr_calibrate,
	vanilla_cp_bands,
	vanilla_cp_calibrate,
)
from feature_cp.feature_cp.data import Dataset
from feature_cp.feature_cp.fcp import (
	MSelectionReport,
	fcp_calibrate,
	fcp_calibrate_classifier,
	fcp_classify_sets,
	fcp_detect_batch,
	fcp_estimate_bands,
	fcp_feature_band,
	fcqr_bands,
	fcqr_calibrate,
	fcqr_detect_batch,
	fcqr_search_config,
	record_search_config,
)
from feature_cp.feature_cp.metrics import (
	CubicReport,
	EvalReport,
	cubic_diagnostics,
	evaluate_bands,
	evaluate_label_sets,
	weighted_lengths,
)
from feature_cp.feature_cp.nn import LossKind, SplitModel, initial_params, load_model, save_model, train
from feature_cp.logger import logger

log = logger("workers.methods")

TIGHTNESS_POINTS = 200
TIGHTNESS_SAMPLES = 1000


class ConformalMethod:
	name = ""
	model_keys: tuple[str, ...] = ("model",)
	standardize_targets = True

	def __init__(self, config):
		self.config = config
		self.models: dict[str, SplitModel] = {}
		self.records: dict[str, CalibrationRecord] = {}
		self.selection: MSelectionReport | None = None

	# Fit
	# ------------------

	def losses(self, ds: Dataset) -> dict[str, LossKind]:
		return {"model": LossKind.mse()}

	def output_width(self, ds: Dataset) -> int:
		return ds.Y.shape[1]

	def fit(self, ds: Dataset, train_indices, seed: int, oracle: SplitModel | None = None) -> None:
		if oracle is not None:
			self.models = {key: oracle for key in self.model_keys}
			log.info("%s: using the oracle model, no training", self.name)
			return
		spec = self.config.model.spec(ds.X.shape[1], self.output_width(ds))
		split_index = self.config.model.split_index
		idx = np.asarray(train_indices, dtype=np.int64)
		train_cfg = replace(self.config.train, seed=seed)
		for key, loss in self.losses(ds).items():
			if self.config.untrained_control:
				self.models[key] = SplitModel(spec, initial_params(spec, seed), split_index)
			else:
				self.models[key] = train(spec, split_index, ds.X[idx], ds.Y[idx], loss, train_cfg)

	@property
	def model(self) -> SplitModel:
		return self.models["model"]

	def save_models(self, directory: str | Path) -> list[Path]:
		return [save_model(self.models[key], Path(directory) / f"{key}.npz") for key in self.model_keys]

	def load_models(self, directory: str | Path) -> None:
		missing = [key for key in self.model_keys if not (Path(directory) / f"{key}.npz").is_file()]
		if missing:
			raise ValidationError(f"no trained {', '.join(missing)} model in {directory}; run train first")
		self.models = {key: load_model(Path(directory) / f"{key}.npz") for key in self.model_keys}

	# Calibrate
	# ------------------

	def calibrate(self, ds: Dataset, cal_indices, alpha: float) -> None:
		raise NotImplementedError

	def calibration_document(self) -> dict:
		return {
			"records": {key: record.to_dict() for key, record in self.records.items()},
			"m_selection": self.selection.to_dict() if self.selection else None,
		}

	def load_calibration(self, document: dict) -> None:
		self.records = {key: CalibrationRecord.from_dict(value) for key, value in document["records"].items()}
		selection = document.get("m_selection")
		self.selection = MSelectionReport.from_dict(selection) if selection else None

	# Evaluate
	# ------------------

	def bands(self, X) -> list:
		raise NotImplementedError

	def membership(self, X, Y) -> np.ndarray | None:
		"""Per-sample acceptance when the method decides coverage by detection, else None."""
		return None

	def evaluate(self, ds: Dataset, test_indices, raw_Y=None, seed: int = 0) -> EvalReport:
		"""Coverage and lengths on the test fold.

		``raw_Y`` are the untransformed test targets; the weighted length is
		reported when they all lie in [0, 1].
		"""
		idx = np.asarray(test_indices, dtype=np.int64)
		bands = self.bands(ds.X[idx])
		report = evaluate_bands(bands, ds.Y[idx], membership=self.membership(ds.X[idx], ds.Y[idx]))
		if raw_Y is not None:
			raw_Y = np.asarray(raw_Y, dtype=np.float64)
			if np.all((raw_Y >= 0.0) & (raw_Y <= 1.0)):
				values, report.weighted_skipped = weighted_lengths(bands, raw_Y)
				if not np.all(np.isnan(values)):
					report.weighted_length = float(np.nanmean(values))
		return report

	def diagnostics(self, ds: Dataset, cal_indices, alpha: float) -> CubicReport | None:
		return None

	def tightness(self, X, seed: int = 0) -> float | None:
		return None


class VanillaCP(ConformalMethod):
	name = "vanilla_cp"

	def calibrate(self, ds: Dataset, cal_indices, alpha: float) -> None:
		self.records = {"record": vanilla_cp_calibrate(self.model, ds, cal_indices, alpha)}

	def bands(self, X) -> list:
		return vanilla_cp_bands(self.records["record"], self.model, X)


class FeatureCP(ConformalMethod):
	name = "feature_cp"

	def calibrate(self, ds: Dataset, cal_indices, alpha: float) -> None:
		record, self.selection = fcp_calibrate(
			self.model, ds, cal_indices, alpha, self.config.search, self.config.candidate_steps
		)
		self.records = {"record": record}

	def bands(self, X) -> list:
		return fcp_estimate_bands(self.model, self.records["record"], X)

	def membership(self, X, Y) -> np.ndarray:
		record = self.records["record"]
		return fcp_detect_batch(self.model, record, X, Y, record_search_config(record))

	def diagnostics(self, ds: Dataset, cal_indices, alpha: float) -> CubicReport | None:
		return cubic_diagnostics(self.records["record"], self.model, ds, cal_indices, alpha, self.config.cubic_level)

	def tightness(self, X, seed: int = 0) -> float | None:
		"""Mean ratio of the sampled inner band to the estimated outer band over the first test points."""
		record = self.records["record"]
		if not record.is_finite:
			return None
		ratios = []
		for i, x in enumerate(np.atleast_2d(X)[:TIGHTNESS_POINTS]):
			band = fcp_feature_band(self.model, record, x)
			outer = forward_bounds(self.model, band.center, band.radius, band.norm)
			if outer.exact:
				ratios.append(1.0)
			else:
				ratios.append(tightness_ratio(sample_inner_box(self.model, band, TIGHTNESS_SAMPLES, seed + i), outer))
		return float(np.mean(ratios)) if ratios else None


class CQR(ConformalMethod):
	"""Conformalized quantile regression on two pinball-trained heads.

	The heads target alpha/2 and 1 - alpha/2 of the configured alpha; sweeps
	recalibrate them at other levels without retraining.
	"""

	name = "cqr"
	model_keys = ("lo", "hi")

	def losses(self, ds: Dataset) -> dict[str, LossKind]:
		if ds.Y.shape[1] != 1:
			raise ValidationError(f"{self.name} supports one-dimensional responses, got {ds.Y.shape[1]}")
		alpha = self.config.alpha
		return {"lo": LossKind.pinball(alpha / 2.0), "hi": LossKind.pinball(1.0 - alpha / 2.0)}

	def calibrate(self, ds: Dataset, cal_indices, alpha: float) -> None:
		self.records = {"record": cqr_calibrate(self.models["lo"], self.models["hi"], ds, cal_indices, alpha)}

	def bands(self, X) -> list:
		return cqr_bands(self.records["record"], self.models["lo"], self.models["hi"], X)


class FeatureCQR(CQR):
	name = "feature_cqr"

	def calibrate(self, ds: Dataset, cal_indices, alpha: float) -> None:
		record_lo, record_hi, self.selection = fcqr_calibrate(
			self.models["lo"],
			self.models["hi"],
			ds,
			cal_indices,
			alpha,
			self.config.search,
			self.config.candidate_steps,
		)
		self.records = {"lo": record_lo, "hi": record_hi}

	def bands(self, X) -> list:
		return fcqr_bands(self.records["lo"], self.records["hi"], self.models["lo"], self.models["hi"], X)

	def membership(self, X, Y) -> np.ndarray:
		record_lo, record_hi = self.records["lo"], self.records["hi"]
		cfg = fcqr_search_config(record_lo, record_hi)
		return fcqr_detect_batch(self.models["lo"], self.models["hi"], record_lo, record_hi, X, Y[:, 0], cfg)


class FeatureCPClassify(FeatureCP):
	"""Feature CP on a logit head; prediction sets are labels reachable inside the feature ball."""

	name = "feature_cp_classify"
	standardize_targets = False

	def losses(self, ds: Dataset) -> dict[str, LossKind]:
		return {"model": LossKind.cross_entropy()}

	def output_width(self, ds: Dataset) -> int:
		labels = ds.Y[:, 0]
		if ds.Y.shape[1] != 1 or not np.array_equal(labels, np.rint(labels)) or labels.min() < 0:
			raise ValidationError("classification needs one column of non-negative integer labels")
		return int(labels.max()) + 1

	def calibrate(self, ds: Dataset, cal_indices, alpha: float) -> None:
		record, self.selection = fcp_calibrate_classifier(
			self.model, ds, cal_indices, alpha, self.config.search, self.config.candidate_steps
		)
		self.records = {"record": record}

	def evaluate(self, ds: Dataset, test_indices, raw_Y=None, seed: int = 0) -> EvalReport:
		idx = np.asarray(test_indices, dtype=np.int64)
		sets = fcp_classify_sets(self.model, self.records["record"], ds.X[idx], seed=seed)
		return evaluate_label_sets(sets, ds.Y[idx, 0])

	def tightness(self, X, seed: int = 0) -> float | None:
		return None
