# Copyright (c) 2026, Mansy and contributors
# For license information, please see license.txt

import math

import numpy as np

from feature_cp.exceptions import ValidationError

# (1 - alpha)(n + 1) lands a few ulps above an integer for some alpha; that must not bump k.
_RANK_SLACK = 1e-10


def _check_alpha(alpha: float) -> None:
	if not 0.0 < alpha < 1.0:
		raise ValidationError(f"alpha must lie in (0, 1), got {alpha}")


def conformal_rank(n: int, alpha: float) -> int:
	"""k = ceil((1 - alpha)(n + 1)); k > n means the +inf atom is selected."""
	_check_alpha(alpha)
	return max(1, math.ceil((1.0 - alpha) * (n + 1) - _RANK_SLACK))


def conformal_quantile(scores, alpha: float) -> float:
	"""(1 - alpha)-quantile of the scores' empirical law augmented with a point mass at +inf.

	Order statistics only, no interpolation. Scores may be +inf (a search that
	never reached its target); NaN and -inf are rejected.
	"""
	values = np.sort(np.asarray(scores, dtype=np.float64).reshape(-1))
	if np.any(np.isnan(values)) or np.any(values == -math.inf):
		raise ValidationError("calibration scores must be finite or +inf")
	k = conformal_rank(values.size, alpha)
	if k > values.size:
		return math.inf
	return float(values[k - 1])


def empirical_quantile(scores, level: float) -> float:
	"""Smallest score s with at least ``level`` of the scores <= s."""
	values = np.sort(np.asarray(scores, dtype=np.float64).reshape(-1))
	if values.size == 0:
		raise ValidationError("empirical_quantile of an empty list")
	if not 0.0 <= level <= 1.0:
		raise ValidationError(f"level must lie in [0, 1], got {level}")
	k = max(1, math.ceil(level * values.size - _RANK_SLACK))
	return float(values[k - 1])
