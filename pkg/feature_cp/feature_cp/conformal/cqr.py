# Copyright (c) 2026, Mansy and contributors
# For license information, please see license.txt

"""
Conformalized quantile regression for one-dimensional responses.
"""

import numpy as np

from feature_cp.exceptions import ValidationError
from feature_cp.feature_cp.conformal.records import (
	CalibrationRecord,
	OutputBand,
	ScoreKind,
	UnboundedBand,
	bands_from_arrays,
	clamp_crossed,
)
from feature_cp.feature_cp.data.datasets import Dataset
from feature_cp.feature_cp.nn.mlp import SplitModel
from feature_cp.logger import logger

log = logger("conformal.cqr")

CQR_CONFIG = {"score": ScoreKind.CQR_SIGNED.value}


def _check_1d(model_lo: SplitModel, model_hi: SplitModel) -> None:
	if model_lo.output_width != 1 or model_hi.output_width != 1:
		raise ValidationError("CQR needs one-dimensional quantile heads")


def cqr_scores(model_lo: SplitModel, model_hi: SplitModel, X, y) -> np.ndarray:
	"""E = max(q_lo(x) - y, y - q_hi(x)); negative inside the raw interval."""
	y = np.asarray(y, dtype=np.float64).reshape(-1)
	lo = np.atleast_2d(model_lo.forward(X))[:, 0]
	hi = np.atleast_2d(model_hi.forward(X))[:, 0]
	return np.maximum(lo - y, y - hi)


def cqr_calibrate(
	model_lo: SplitModel, model_hi: SplitModel, ds: Dataset, cal_indices, alpha: float
) -> CalibrationRecord:
	if ds.Y.shape[1] != 1:
		raise ValidationError(f"CQR supports one-dimensional responses, got {ds.Y.shape[1]}")
	_check_1d(model_lo, model_hi)
	idx = np.asarray(cal_indices, dtype=np.int64)
	if idx.size == 0:
		raise ValidationError("empty calibration fold")
	scores = cqr_scores(model_lo, model_hi, ds.X[idx], ds.Y[idx, 0])
	return CalibrationRecord.build(scores, alpha, ScoreKind.CQR_SIGNED, CQR_CONFIG)


def cqr_bands(
	record: CalibrationRecord, model_lo: SplitModel, model_hi: SplitModel, X
) -> list[OutputBand | UnboundedBand]:
	if record.score_kind is not ScoreKind.CQR_SIGNED:
		raise ValidationError(f"CQR needs a cqr_signed record, got {record.score_kind.value}")
	_check_1d(model_lo, model_hi)
	lo = np.atleast_2d(model_lo.forward(X))
	hi = np.atleast_2d(model_hi.forward(X))
	if not record.is_finite:
		return [UnboundedBand(1) for _ in range(lo.shape[0])]
	lo, hi, crossed = clamp_crossed(lo - record.q, hi + record.q)
	if crossed.any():
		log.warning("%d CQR intervals crossed after correction; clamped to their midpoint", int(crossed.sum()))
	return bands_from_arrays(lo, hi, crossed)


def cqr_band(record: CalibrationRecord, model_lo: SplitModel, model_hi: SplitModel, x) -> OutputBand | UnboundedBand:
	"""[q_lo(x) - q, q_hi(x) + q]."""
	return cqr_bands(record, model_lo, model_hi, np.asarray(x, dtype=np.float64).reshape(1, -1))[0]
