# Copyright (c) 2026, Mansy and contributors
# For license information, please see license.txt

"""
Feature CQR: conformalized quantile regression with feature-space scores.

Each quantile head gets a signed surrogate score. The magnitude is the
feature distance the head needs to reach y; the sign is negative when the
head already sits on the covering side of y (lower head at or below it,
upper head at or above it) and positive otherwise. A positive quantile
widens that side of the band, a negative one pulls it inwards. Searches
that do not converge score +inf on either side.

Each head is calibrated at level 1 - alpha/2, so the two one-sided miss
rates add up to at most alpha.
"""

import numpy as np

from feature_cp.exceptions import ConfigDigestMismatch, ValidationError
from feature_cp.feature_cp.band.ball import FeatureNorm
from feature_cp.feature_cp.band.ibp import Box, forward_bounds, inner_extremes
from feature_cp.feature_cp.conformal.quantile import conformal_quantile
from feature_cp.feature_cp.conformal.records import (
	CalibrationRecord,
	OutputBand,
	ScoreKind,
	UnboundedBand,
	bands_from_arrays,
	clamp_crossed,
	config_digest,
)
from feature_cp.feature_cp.data.datasets import Dataset
from feature_cp.feature_cp.fcp.calibrate import (
	DEFAULT_CANDIDATE_STEPS,
	MSelectionReport,
	check_candidates,
	select_steps,
	selection_split,
)
from feature_cp.feature_cp.fcp.surrogate import SurrogateResult, SurrogateSearchConfig, surrogate_scores
from feature_cp.feature_cp.nn.mlp import SplitModel
from feature_cp.logger import logger

log = logger("fcp.fcqr")

# Which end of each head's estimated interval [C0, C1] bounds the band,
# keyed on whether that head's quantile expands (q >= 0) or shrinks (q < 0).
ENDPOINT_TABLE = {
	(True, True): ("C0", "C1"),
	(True, False): ("C0", "C0"),
	(False, True): ("C1", "C1"),
	(False, False): ("C1", "C0"),
}


def _expands(q: float) -> bool:
	# -0.0 counts as zero: the band end is the prediction itself.
	return q > 0.0 or q == 0.0


def fcqr_indicators(pred_lo, pred_hi, y) -> tuple[np.ndarray, np.ndarray]:
	"""c_lo = +1 when pred_lo <= y, c_hi = +1 when pred_hi >= y; -1 otherwise."""
	pred_lo, pred_hi, y = (np.asarray(a, dtype=np.float64).reshape(-1) for a in (pred_lo, pred_hi, y))
	return np.where(pred_lo <= y, 1.0, -1.0), np.where(pred_hi >= y, 1.0, -1.0)


def _check_heads(model_lo: SplitModel, model_hi: SplitModel, cfg: SurrogateSearchConfig) -> None:
	if model_lo.output_width != 1 or model_hi.output_width != 1:
		raise ValidationError("feature CQR needs one-dimensional quantile heads")
	if cfg.classification:
		raise ValidationError("feature CQR searches with the mse objective")


def _signed(model: SplitModel, X, y, cfg: SurrogateSearchConfig, covered: np.ndarray, checkpoints=()) -> SurrogateResult:
	raw = surrogate_scores(model, X, y, cfg, checkpoints)
	sign = np.where(covered, -1.0, 1.0)

	def signed(scores, converged):
		# adding 0.0 turns -0.0 into 0.0
		return np.where(converged, sign * scores, np.inf) + 0.0

	return SurrogateResult(
		signed(raw.scores, raw.converged),
		raw.steps_used,
		raw.converged,
		{m: signed(s, raw.checkpoint_converged[m]) for m, s in raw.checkpoint_scores.items()},
		dict(raw.checkpoint_converged),
	)


def fcqr_scores(
	model_lo: SplitModel, model_hi: SplitModel, X, y, cfg: SurrogateSearchConfig, checkpoints=()
) -> tuple[SurrogateResult, SurrogateResult]:
	X = np.asarray(X, dtype=np.float64)
	if X.ndim == 1:
		X = X[None, :]
	y = np.asarray(y, dtype=np.float64).reshape(-1)
	c_lo, c_hi = fcqr_indicators(model_lo.forward(X)[:, 0], model_hi.forward(X)[:, 0], y)
	return (
		_signed(model_lo, X, y, cfg, c_lo > 0, checkpoints),
		_signed(model_hi, X, y, cfg, c_hi > 0, checkpoints),
	)


def fcqr_score_config(cfg: SurrogateSearchConfig, side: str) -> dict:
	return {**cfg.to_dict(), "side": side}


def fcqr_calibrate(
	model_lo: SplitModel,
	model_hi: SplitModel,
	ds: Dataset,
	cal_indices,
	alpha: float,
	cfg: SurrogateSearchConfig,
	candidate_steps=DEFAULT_CANDIDATE_STEPS,
) -> tuple[CalibrationRecord, CalibrationRecord, MSelectionReport]:
	if ds.Y.shape[1] != 1:
		raise ValidationError(f"feature CQR supports one-dimensional responses, got {ds.Y.shape[1]}")
	_check_heads(model_lo, model_hi, cfg)
	idx = np.asarray(cal_indices, dtype=np.int64)
	if idx.size == 0:
		raise ValidationError("empty calibration fold")
	candidates = check_candidates(candidate_steps)
	score_idx, val_idx = selection_split(idx)
	search = cfg.with_steps(candidates[-1])
	side_alpha = alpha / 2.0

	lo_s, hi_s = fcqr_scores(model_lo, model_hi, ds.X[score_idx], ds.Y[score_idx, 0], search, candidates)
	lo_v, hi_v = fcqr_scores(model_lo, model_hi, ds.X[val_idx], ds.Y[val_idx, 0], search, candidates)
	coverages, widths = [], []
	for m in candidates:
		q_lo = conformal_quantile(lo_s.checkpoint_scores[m], side_alpha)
		q_hi = conformal_quantile(hi_s.checkpoint_scores[m], side_alpha)
		accepted = (lo_v.checkpoint_scores[m] <= q_lo) & (hi_v.checkpoint_scores[m] <= q_hi)
		coverages.append(float(np.mean(accepted)))
		widths.append(q_lo + q_hi)
	report = select_steps(candidates, coverages, alpha, widths)
	if not report.reached_target:
		log.warning("feature CQR: no step count reached validation coverage %.3f; using M=%d", 1 - alpha, report.chosen_M)

	chosen = cfg.with_steps(report.chosen_M)
	record_lo = CalibrationRecord.build(
		lo_s.checkpoint_scores[report.chosen_M], side_alpha, ScoreKind.FEATURE_CQR_SIGNED_LO, fcqr_score_config(chosen, "lo")
	)
	record_hi = CalibrationRecord.build(
		hi_s.checkpoint_scores[report.chosen_M], side_alpha, ScoreKind.FEATURE_CQR_SIGNED_HI, fcqr_score_config(chosen, "hi")
	)
	log.info("feature CQR calibrated: M=%d q_lo=%s q_hi=%s", report.chosen_M, record_lo.q, record_hi.q)
	return record_lo, record_hi, report


def _check_records(record_lo: CalibrationRecord, record_hi: CalibrationRecord) -> None:
	if record_lo.score_kind is not ScoreKind.FEATURE_CQR_SIGNED_LO:
		raise ValidationError(f"expected a feature_cqr_signed_lo record, got {record_lo.score_kind.value}")
	if record_hi.score_kind is not ScoreKind.FEATURE_CQR_SIGNED_HI:
		raise ValidationError(f"expected a feature_cqr_signed_hi record, got {record_hi.score_kind.value}")


def fcqr_search_config(record_lo: CalibrationRecord, record_hi: CalibrationRecord) -> SurrogateSearchConfig:
	_check_records(record_lo, record_hi)
	data = {k: v for k, v in record_lo.score_config.items() if k != "side"}
	return SurrogateSearchConfig.from_dict(data)


def _head_box(model: SplitModel, X: np.ndarray, q: float, norm: FeatureNorm) -> Box:
	"""[C0, C1] for one head: outer bounds when expanding, attained values when shrinking."""
	centers = model.feature_forward(X)
	if q == 0.0:
		pred = model.head_forward(centers)
		return Box(pred, pred.copy(), exact=True)
	if _expands(q):
		return forward_bounds(model, centers, q, norm)
	return inner_extremes(model, centers, -q, norm)


def combine_endpoints(q_lo: float, q_hi: float, lo_box: Box, hi_box: Box) -> tuple[np.ndarray, np.ndarray]:
	"""Pick the band ends from each head's [C0, C1] by the signs of the two quantiles."""
	lower_end, upper_end = ENDPOINT_TABLE[(_expands(q_lo), _expands(q_hi))]
	ends_lo = {"C0": lo_box.lo, "C1": lo_box.hi}
	ends_hi = {"C0": hi_box.lo, "C1": hi_box.hi}
	return ends_lo[lower_end], ends_hi[upper_end]


def fcqr_bands(
	record_lo: CalibrationRecord, record_hi: CalibrationRecord, model_lo: SplitModel, model_hi: SplitModel, X
) -> list[OutputBand | UnboundedBand]:
	"""Band Estimation for Feature CQR.

	A crossed band (lower end above upper end) means detection accepts no y
	at that x; it is collapsed to its midpoint and flagged degenerate.
	"""
	_check_records(record_lo, record_hi)
	X = np.asarray(X, dtype=np.float64)
	if X.ndim == 1:
		X = X[None, :]
	if not (record_lo.is_finite and record_hi.is_finite):
		return [UnboundedBand(1) for _ in range(X.shape[0])]
	norm = fcqr_search_config(record_lo, record_hi).feature_norm
	lo_box = _head_box(model_lo, X, record_lo.q, norm)
	hi_box = _head_box(model_hi, X, record_hi.q, norm)
	lo, hi, crossed = clamp_crossed(*combine_endpoints(record_lo.q, record_hi.q, lo_box, hi_box))
	if crossed.any():
		log.warning("%d feature CQR bands crossed; clamped to their midpoint", int(crossed.sum()))
	return bands_from_arrays(lo, hi, crossed)


def fcqr_band(
	record_lo: CalibrationRecord, record_hi: CalibrationRecord, model_lo: SplitModel, model_hi: SplitModel, x
) -> OutputBand | UnboundedBand:
	return fcqr_bands(record_lo, record_hi, model_lo, model_hi, np.asarray(x, dtype=np.float64).reshape(1, -1))[0]


def fcqr_detect_batch(
	model_lo: SplitModel,
	model_hi: SplitModel,
	record_lo: CalibrationRecord,
	record_hi: CalibrationRecord,
	X,
	y,
	cfg: SurrogateSearchConfig,
) -> np.ndarray:
	_check_records(record_lo, record_hi)
	for record, side in ((record_lo, "lo"), (record_hi, "hi")):
		got = config_digest(fcqr_score_config(cfg, side))
		if got != record.score_config_digest:
			raise ConfigDigestMismatch(record.score_config_digest, got)
	lo, hi = fcqr_scores(model_lo, model_hi, X, y, cfg)
	return (lo.scores <= record_lo.q) & (hi.scores <= record_hi.q)


def fcqr_detect(
	model_lo: SplitModel,
	model_hi: SplitModel,
	record_lo: CalibrationRecord,
	record_hi: CalibrationRecord,
	x,
	y_tilde: float,
	cfg: SurrogateSearchConfig,
) -> bool:
	"""Accept when both signed scores stay within their quantiles."""
	X = np.asarray(x, dtype=np.float64).reshape(1, -1)
	return bool(fcqr_detect_batch(model_lo, model_hi, record_lo, record_hi, X, [y_tilde], cfg)[0])
