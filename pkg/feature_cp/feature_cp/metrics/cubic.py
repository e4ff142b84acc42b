# Copyright (c) 2026, Mansy and contributors
# For license information, please see license.txt

"""
Spread diagnostics comparing feature-space scores with output-space band widths.

For every calibration sample whose search converges, the feature score
V_i is its surrogate distance, and H_i is the mean width of the estimated output band around
that sample when the ball radius is V_i itself. A feature space where
scores cluster tightly around their quantile while output widths stay
spread out is where feature-level calibration pays off.
"""

from dataclasses import asdict, dataclass

import numpy as np

from feature_cp.feature_cp.band.ball import FeatureNorm
from feature_cp.feature_cp.band.ibp import forward_bounds
from feature_cp.feature_cp.conformal.quantile import empirical_quantile
from feature_cp.feature_cp.conformal.records import CalibrationRecord
from feature_cp.feature_cp.data.datasets import Dataset
from feature_cp.feature_cp.fcp.calibrate import fold_targets, record_search_config
from feature_cp.feature_cp.fcp.surrogate import surrogate_scores
from feature_cp.feature_cp.nn.mlp import SplitModel
from feature_cp.logger import logger

log = logger("metrics.cubic")


@dataclass(frozen=True)
class CubicReport:
	feature_spread: float
	output_spread: float
	alpha_used: float
	level: float

	@property
	def ratio(self) -> float | None:
		return self.feature_spread / self.output_spread if self.output_spread > 0 else None

	def to_dict(self) -> dict:
		return {**asdict(self), "ratio": self.ratio}


def feature_spread(scores, level: float) -> float:
	"""Mean absolute deviation of the scores from their empirical quantile."""
	scores = np.asarray(scores, dtype=np.float64)
	return float(np.mean(np.abs(empirical_quantile(scores, level) - scores)))


def output_spread(widths, level: float) -> float:
	"""Signed mean of (quantile - width)."""
	widths = np.asarray(widths, dtype=np.float64)
	return float(np.mean(empirical_quantile(widths, level) - widths))


def own_radius_widths(model: SplitModel, X, radii, norm: FeatureNorm = FeatureNorm.L2) -> np.ndarray:
	"""Mean output-band width for each sample with its own feature radius."""
	box = forward_bounds(model, model.feature_forward(X), np.asarray(radii, dtype=np.float64), norm)
	return np.mean(box.widths, axis=1)


def cubic_diagnostics(
	record: CalibrationRecord, model: SplitModel, ds: Dataset, cal_indices, alpha: float, level: float | None = None
) -> CubicReport | None:
	"""Spread diagnostics over the converged calibration searches; None if there are none."""
	level = 1.0 - alpha if level is None else level
	cfg = record_search_config(record)
	idx = np.asarray(cal_indices, dtype=np.int64)
	result = surrogate_scores(model, ds.X[idx], fold_targets(ds, idx, cfg), cfg)
	if not result.converged.any():
		log.warning("no calibration search converged; skipping spread diagnostics")
		return None
	if not result.converged.all():
		log.debug("spread diagnostics skip %d unconverged searches", int((~result.converged).sum()))
	idx = idx[result.converged]
	scores = result.scores[result.converged]
	widths = own_radius_widths(model, ds.X[idx], scores, cfg.feature_norm)
	report = CubicReport(feature_spread(scores, level), output_spread(widths, level), alpha, level)
	log.info("spread: feature %.4f output %.4f at level %.2f", report.feature_spread, report.output_spread, level)
	return report
