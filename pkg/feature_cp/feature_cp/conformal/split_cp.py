# Copyright (c) 2026, Mansy and contributors
# For license information, please see license.txt

"""
Vanilla split conformal prediction with the output-space l_inf score.
"""

import numpy as np

from feature_cp.exceptions import ValidationError
from feature_cp.feature_cp.conformal.records import (
	CalibrationRecord,
	OutputBand,
	ScoreKind,
	UnboundedBand,
	bands_from_arrays,
)
from feature_cp.feature_cp.data.datasets import Dataset
from feature_cp.feature_cp.nn.mlp import SplitModel

OUTPUT_LINF_CONFIG = {"score": ScoreKind.OUTPUT_LINF.value}


def output_linf_scores(model: SplitModel, X, Y) -> np.ndarray:
	Y = np.asarray(Y, dtype=np.float64)
	return np.max(np.abs(Y - model.forward(X)), axis=-1)


def vanilla_cp_calibrate(model: SplitModel, ds: Dataset, cal_indices, alpha: float) -> CalibrationRecord:
	idx = np.asarray(cal_indices, dtype=np.int64)
	if idx.size == 0:
		raise ValidationError("empty calibration fold")
	scores = output_linf_scores(model, ds.X[idx], ds.Y[idx])
	return CalibrationRecord.build(scores, alpha, ScoreKind.OUTPUT_LINF, OUTPUT_LINF_CONFIG)


def _check(record: CalibrationRecord) -> None:
	if record.score_kind is not ScoreKind.OUTPUT_LINF:
		raise ValidationError(f"vanilla CP needs an output_linf record, got {record.score_kind.value}")


def vanilla_cp_bands(record: CalibrationRecord, model: SplitModel, X) -> list[OutputBand | UnboundedBand]:
	_check(record)
	pred = np.atleast_2d(model.forward(X))
	if not record.is_finite:
		return [UnboundedBand(pred.shape[1]) for _ in range(pred.shape[0])]
	return bands_from_arrays(pred - record.q, pred + record.q)


def vanilla_cp_band(record: CalibrationRecord, model: SplitModel, x) -> OutputBand | UnboundedBand:
	"""[mu(x) - q, mu(x) + q] in every response dimension."""
	return vanilla_cp_bands(record, model, np.asarray(x, dtype=np.float64).reshape(1, -1))[0]
