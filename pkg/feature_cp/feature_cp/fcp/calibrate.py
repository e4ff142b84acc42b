# Copyright (c) 2026, Mansy and contributors
# For license information, please see license.txt

"""
Feature CP: calibration with step-count selection, band detection and band estimation.
"""

from dataclasses import dataclass, replace

import numpy as np

from feature_cp.exceptions import ConfigDigestMismatch, ValidationError
from feature_cp.feature_cp.band.ball import FeatureBand, FeatureNorm
from feature_cp.feature_cp.band.ibp import forward_bounds
from feature_cp.feature_cp.conformal.quantile import conformal_quantile
from feature_cp.feature_cp.conformal.records import (
	CalibrationRecord,
	OutputBand,
	ScoreKind,
	UnboundedBand,
	bands_from_arrays,
	config_digest,
)
from feature_cp.feature_cp.data.datasets import Dataset
from feature_cp.feature_cp.fcp.surrogate import SurrogateSearchConfig, surrogate_scores
from feature_cp.feature_cp.nn.losses import LossName
from feature_cp.feature_cp.nn.mlp import SplitModel
from feature_cp.logger import logger

log = logger("fcp.calibrate")

DEFAULT_CANDIDATE_STEPS = (10, 30, 100, 300, 1000)
# One part in VALIDATION_SHARE of the calibration fold is held out to pick M.
VALIDATION_SHARE = 5


@dataclass(frozen=True)
class MSelectionReport:
	candidate_steps: tuple[int, ...]
	validation_coverages: tuple[float, ...]
	chosen_M: int
	reached_target: bool = True
	# Width proxy per candidate (the quantile, or the sum of both quantiles for Feature CQR).
	widths: tuple[float, ...] | None = None

	def to_dict(self) -> dict:
		return {
			"candidate_steps": list(self.candidate_steps),
			"validation_coverages": list(self.validation_coverages),
			"chosen_M": self.chosen_M,
			"reached_target": self.reached_target,
			"widths": None if self.widths is None else [w if np.isfinite(w) else "inf" for w in self.widths],
		}

	@classmethod
	def from_dict(cls, data: dict) -> "MSelectionReport":
		widths = data.get("widths")
		return cls(
			tuple(int(m) for m in data["candidate_steps"]),
			tuple(float(c) for c in data["validation_coverages"]),
			int(data["chosen_M"]),
			bool(data.get("reached_target", True)),
			None if widths is None else tuple(float(w) for w in widths),
		)


def select_steps(candidates, coverages, alpha: float, widths=None) -> MSelectionReport:
	"""Pick the number of search steps from validation coverages.

	Without widths: the smallest M whose coverage reaches 1 - alpha. With
	widths: the narrowest finite candidate among those reaching 1 - alpha,
	ties going to the smaller M. If none qualifies the largest M is used and
	the report is flagged.
	"""
	candidates = tuple(int(m) for m in candidates)
	coverages = tuple(float(c) for c in coverages)
	if len(candidates) != len(coverages) or not candidates:
		raise ValidationError("need one validation coverage per candidate step count")
	if widths is not None:
		widths = tuple(float(w) for w in widths)
		if len(widths) != len(candidates):
			raise ValidationError("need one width per candidate step count")
		qualified = [
			(w, m) for m, cov, w in zip(candidates, coverages, widths) if cov >= 1.0 - alpha and np.isfinite(w)
		]
		if qualified:
			return MSelectionReport(candidates, coverages, min(qualified)[1], True, widths)
		return MSelectionReport(candidates, coverages, max(candidates), False, widths)
	for m, cov in sorted(zip(candidates, coverages)):
		if cov >= 1.0 - alpha:
			return MSelectionReport(candidates, coverages, m, True)
	return MSelectionReport(candidates, coverages, max(candidates), False)


def selection_split(cal_indices) -> tuple[np.ndarray, np.ndarray]:
	"""Split the calibration fold 4:1 into a scoring part and a validation part, in fold order."""
	idx = np.asarray(cal_indices, dtype=np.int64)
	n_val = idx.size // VALIDATION_SHARE
	if n_val == 0:
		raise ValidationError(f"a calibration fold of {idx.size} leaves no validation part for M selection")
	return idx[: idx.size - n_val], idx[idx.size - n_val :]


def fold_targets(ds: Dataset, idx: np.ndarray, cfg: SurrogateSearchConfig) -> np.ndarray:
	return ds.Y[idx, 0] if cfg.classification else ds.Y[idx]


def check_candidates(candidate_steps) -> list[int]:
	candidates = sorted({int(m) for m in candidate_steps})
	if not candidates or candidates[0] < 1:
		raise ValidationError(f"candidate step counts must be positive, got {list(candidate_steps)}")
	return candidates


def fcp_calibrate(
	model: SplitModel,
	ds: Dataset,
	cal_indices,
	alpha: float,
	cfg: SurrogateSearchConfig,
	candidate_steps=DEFAULT_CANDIDATE_STEPS,
) -> tuple[CalibrationRecord, MSelectionReport]:
	"""Score the calibration fold in feature space and pick the number of search steps.

	Scores are censored (unconverged searches count as +inf). Each candidate M
	gets a quantile from the scoring part and a coverage on the validation
	part; the narrowest M that reaches 1 - alpha wins.

	The returned record's config binds the chosen M; detection must use that config.
	"""
	idx = np.asarray(cal_indices, dtype=np.int64)
	if idx.size == 0:
		raise ValidationError("empty calibration fold")
	candidates = check_candidates(candidate_steps)
	score_idx, val_idx = selection_split(idx)
	search = cfg.with_steps(candidates[-1])

	scored = surrogate_scores(model, ds.X[score_idx], fold_targets(ds, score_idx, cfg), search, candidates)
	validated = surrogate_scores(model, ds.X[val_idx], fold_targets(ds, val_idx, cfg), search, candidates)
	quantiles = [conformal_quantile(scored.censored_at(m), alpha) for m in candidates]
	coverages = [float(np.mean(validated.censored_at(m) <= q)) for m, q in zip(candidates, quantiles)]
	report = select_steps(candidates, coverages, alpha, quantiles)
	if not report.reached_target:
		log.warning(
			"no step count reached validation coverage %.3f (best %.3f); using M=%d",
			1.0 - alpha,
			max(coverages),
			report.chosen_M,
		)

	chosen = cfg.with_steps(report.chosen_M)
	record = CalibrationRecord.build(
		scored.censored_at(report.chosen_M), alpha, ScoreKind.FEATURE_SURROGATE, chosen.to_dict()
	)
	log.info(
		"feature CP calibrated on %d samples: M=%d q=%s (%d searches unconverged at M=%d)",
		score_idx.size,
		report.chosen_M,
		record.q,
		int((~scored.checkpoint_converged[report.chosen_M]).sum()),
		report.chosen_M,
	)
	return record, report


def fcp_calibrate_classifier(
	model: SplitModel,
	ds: Dataset,
	cal_indices,
	alpha: float,
	cfg: SurrogateSearchConfig,
	candidate_steps=DEFAULT_CANDIDATE_STEPS,
) -> tuple[CalibrationRecord, MSelectionReport]:
	"""Feature CP for a logit head: the search minimises cross entropy and converges on an argmax hit."""
	return fcp_calibrate(model, ds, cal_indices, alpha, replace(cfg, loss=LossName.CROSS_ENTROPY), candidate_steps)


def _check_record(record: CalibrationRecord) -> None:
	if record.score_kind is not ScoreKind.FEATURE_SURROGATE:
		raise ValidationError(f"feature CP needs a feature_surrogate record, got {record.score_kind.value}")


def record_search_config(record: CalibrationRecord) -> SurrogateSearchConfig:
	"""The search configuration the record was calibrated with."""
	_check_record(record)
	return SurrogateSearchConfig.from_dict(record.score_config)


def check_digest(record: CalibrationRecord, cfg: SurrogateSearchConfig) -> None:
	got = config_digest(cfg.to_dict())
	if got != record.score_config_digest:
		raise ConfigDigestMismatch(record.score_config_digest, got)


def fcp_detect_batch(model: SplitModel, record: CalibrationRecord, X, Y, cfg: SurrogateSearchConfig) -> np.ndarray:
	_check_record(record)
	check_digest(record, cfg)
	X = np.asarray(X, dtype=np.float64)
	if X.ndim == 1:
		X = X[None, :]
	if not record.is_finite:
		return np.ones(X.shape[0], dtype=bool)
	return surrogate_scores(model, X, Y, cfg).censored <= record.q


def fcp_detect(model: SplitModel, record: CalibrationRecord, x, y_tilde, cfg: SurrogateSearchConfig) -> bool:
	"""Accept ``y_tilde`` when its search converges within a displacement of at most q."""
	X = np.asarray(x, dtype=np.float64).reshape(1, -1)
	return bool(fcp_detect_batch(model, record, X, np.asarray(y_tilde)[None, ...], cfg)[0])


def _record_norm(record: CalibrationRecord) -> FeatureNorm:
	return record_search_config(record).feature_norm


def fcp_feature_band(model: SplitModel, record: CalibrationRecord, x) -> FeatureBand:
	_check_record(record)
	if not record.is_finite:
		raise ValidationError("an infinite quantile has no feature ball")
	return FeatureBand(model.feature_forward(np.asarray(x, dtype=np.float64).reshape(-1)), record.q, _record_norm(record))


def fcp_estimate_bands(model: SplitModel, record: CalibrationRecord, X) -> list[OutputBand | UnboundedBand]:
	_check_record(record)
	X = np.asarray(X, dtype=np.float64)
	if X.ndim == 1:
		X = X[None, :]
	if not record.is_finite:
		return [UnboundedBand(model.output_width) for _ in range(X.shape[0])]
	box = forward_bounds(model, model.feature_forward(X), record.q, _record_norm(record))
	return bands_from_arrays(box.lo, box.hi)


def fcp_estimate(model: SplitModel, record: CalibrationRecord, x) -> OutputBand | UnboundedBand:
	"""Output box enclosing g over the feature ball of radius q around f(x).

	Detection accepts y only up to the search tolerance, so an accepted y may
	sit up to ``tolerance_slack`` outside this box.
	"""
	return fcp_estimate_bands(model, record, np.asarray(x, dtype=np.float64).reshape(1, -1))[0]
