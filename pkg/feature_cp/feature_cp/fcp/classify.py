# Copyright (c) 2026, Mansy and contributors
# For license information, please see license.txt

"""
Label sets from a calibrated feature ball around a logit head's input.
"""

import numpy as np

from feature_cp.exceptions import ValidationError
from feature_cp.feature_cp.conformal.records import CalibrationRecord
from feature_cp.feature_cp.fcp.calibrate import fcp_feature_band
from feature_cp.feature_cp.nn.mlp import SplitModel

DEFAULT_SET_SAMPLES = 1000


def _label_set(model: SplitModel, record: CalibrationRecord, x: np.ndarray, n_samples: int, rng) -> frozenset[int]:
	if not record.is_finite:
		return frozenset(range(model.output_width))
	band = fcp_feature_band(model, record, x)
	labels = np.argmax(model.head_forward(band.sample(n_samples, rng)), axis=1)
	center = int(np.argmax(model.head_forward(band.center)))
	return frozenset(int(k) for k in np.unique(labels)) | {center}


def fcp_classify_set(
	model: SplitModel, record: CalibrationRecord, x, n_samples: int = DEFAULT_SET_SAMPLES, seed: int = 0
) -> frozenset[int]:
	"""Argmax labels of g over ``n_samples`` uniform draws from the feature ball, plus the point prediction."""
	if n_samples < 1:
		raise ValidationError(f"n_samples must be >= 1, got {n_samples}")
	return _label_set(model, record, np.asarray(x, dtype=np.float64).reshape(-1), n_samples, np.random.default_rng(seed))


def fcp_classify_sets(
	model: SplitModel, record: CalibrationRecord, X, n_samples: int = DEFAULT_SET_SAMPLES, seed: int = 0
) -> list[frozenset[int]]:
	if n_samples < 1:
		raise ValidationError(f"n_samples must be >= 1, got {n_samples}")
	rng = np.random.default_rng(seed)
	return [_label_set(model, record, x, n_samples, rng) for x in np.atleast_2d(np.asarray(X, dtype=np.float64))]
