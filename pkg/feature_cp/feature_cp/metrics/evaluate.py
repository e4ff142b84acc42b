# Copyright (c) 2026, Mansy and contributors
# For license information, please see license.txt

"""
Coverage and band-length metrics.
"""

import math
from dataclasses import asdict, dataclass, field

import numpy as np
import pandas as pd

from feature_cp.exceptions import ValidationError
from feature_cp.feature_cp.conformal.records import OutputBand


@dataclass
class EvalReport:
	coverage: float
	avg_length: float
	weighted_length: float | None = None
	group_coverage: float | None = None
	per_sample_lengths: list[float] = field(default_factory=list)
	unbounded_count: int = 0
	weighted_skipped: int = 0
	# Box-membership rate when coverage comes from a separate membership test.
	band_coverage: float | None = None

	def __post_init__(self):
		if not 0.0 <= self.coverage <= 1.0:
			raise ValidationError(f"coverage must lie in [0, 1], got {self.coverage}")
		if self.avg_length < 0:
			raise ValidationError(f"avg_length must be >= 0, got {self.avg_length}")

	def to_dict(self) -> dict:
		return asdict(self)


def coverage(membership) -> float:
	hits = np.asarray(membership, dtype=bool).reshape(-1)
	if hits.size == 0:
		raise ValidationError("coverage of an empty test set")
	return float(np.mean(hits))


def band_lengths(bands) -> tuple[np.ndarray, int]:
	"""Per-sample mean width of every bounded band, and how many bands were unbounded."""
	if len(bands) == 0:
		raise ValidationError("no bands to measure")
	bounded = [b for b in bands if isinstance(b, OutputBand)]
	return np.array([float(np.mean(b.lengths)) for b in bounded]), len(bands) - len(bounded)


def avg_length(bands) -> float:
	lengths, _ = band_lengths(bands)
	if lengths.size == 0:
		raise ValidationError("every band is unbounded; no finite length to average")
	return float(np.mean(lengths))


def weighted_lengths(bands, y_true) -> tuple[np.ndarray, int]:
	"""Per-sample sum_j w_j |C|_j with w_j = |2 y_j - 1| / sum_j |2 y_j - 1|.

	Samples whose weights vanish (every y_j = 0.5) come back as NaN and are counted.
	"""
	Y = np.asarray(y_true, dtype=np.float64)
	if Y.ndim == 1:
		Y = Y[:, None]
	if Y.shape[0] != len(bands):
		raise ValidationError(f"{len(bands)} bands but {Y.shape[0]} targets")
	if np.any(Y < 0.0) or np.any(Y > 1.0):
		raise ValidationError("weighted length needs targets in [0, 1]")
	raw = np.abs(2.0 * Y - 1.0)
	total = raw.sum(axis=1)
	values = np.full(Y.shape[0], np.nan)
	skipped = 0
	for i, band in enumerate(bands):
		if total[i] == 0.0:
			skipped += 1
		elif isinstance(band, OutputBand):
			values[i] = float(np.sum(raw[i] / total[i] * band.lengths))
	return values, skipped


def weighted_length(bands, y_true) -> float:
	values, _ = weighted_lengths(bands, y_true)
	if np.all(np.isnan(values)):
		raise ValidationError("no sample has a usable weighted length")
	return float(np.nanmean(values))


def group_coverage(membership, y_true, n_groups: int = 3) -> float:
	"""Minimum coverage over equal-count groups of the sorted response values."""
	hits = np.asarray(membership, dtype=bool).reshape(-1)
	y = np.asarray(y_true, dtype=np.float64)
	if y.ndim == 2:
		if y.shape[1] != 1:
			raise ValidationError("group coverage needs one-dimensional responses")
		y = y[:, 0]
	if y.shape[0] != hits.shape[0]:
		raise ValidationError(f"{hits.shape[0]} membership flags but {y.shape[0]} responses")
	if hits.size < n_groups:
		raise ValidationError(f"{hits.size} samples cannot fill {n_groups} groups")
	order = np.argsort(y, kind="stable")
	return min(float(np.mean(hits[g])) for g in np.array_split(order, n_groups))


def evaluate_bands(bands, Y, weighted: bool = False, n_groups: int = 3, membership=None) -> EvalReport:
	"""Coverage, length and group coverage of a test fold.

	Coverage counts box membership unless ``membership`` (one flag per
	sample, e.g. Band Detection results) is given; the box rate is then
	reported as ``band_coverage``. If every band is unbounded the average
	length is infinite.
	"""
	Y = np.asarray(Y, dtype=np.float64)
	if Y.ndim == 1:
		Y = Y[:, None]
	if Y.shape[0] != len(bands):
		raise ValidationError(f"{len(bands)} bands but {Y.shape[0]} targets")
	in_band = np.array([b.contains(y) for b, y in zip(bands, Y)])
	band_coverage = None
	if membership is None:
		membership = in_band
	else:
		membership = np.asarray(membership, dtype=bool).reshape(-1)
		if membership.size != len(bands):
			raise ValidationError(f"{len(bands)} bands but {membership.size} membership flags")
		band_coverage = coverage(in_band)
	lengths, unbounded = band_lengths(bands)
	report = EvalReport(
		coverage=coverage(membership),
		avg_length=float(np.mean(lengths)) if lengths.size else math.inf,
		per_sample_lengths=lengths.tolist(),
		unbounded_count=unbounded,
		band_coverage=band_coverage,
	)
	if weighted:
		values, report.weighted_skipped = weighted_lengths(bands, Y)
		report.weighted_length = float(np.nanmean(values)) if not np.all(np.isnan(values)) else None
	if Y.shape[1] == 1 and len(bands) >= n_groups:
		report.group_coverage = group_coverage(membership, Y[:, 0], n_groups)
	return report


def evaluate_label_sets(label_sets, labels) -> EvalReport:
	"""Coverage of the true label and mean set size (reported as the length)."""
	labels = np.asarray(labels).reshape(-1).astype(np.int64)
	if len(label_sets) != labels.size:
		raise ValidationError(f"{len(label_sets)} label sets but {labels.size} labels")
	sizes = np.array([len(s) for s in label_sets], dtype=np.float64)
	return EvalReport(
		coverage=coverage([int(y) in s for s, y in zip(label_sets, labels)]),
		avg_length=float(np.mean(sizes)),
		per_sample_lengths=sizes.tolist(),
	)


def aggregate(rows: list[dict], keys) -> dict[str, dict[str, float]]:
	"""Mean and population std of each key across rows, ignoring missing values."""
	frame = pd.DataFrame(rows)
	summary = {}
	for key in keys:
		if key not in frame:
			continue
		values = pd.to_numeric(frame[key], errors="coerce").dropna()
		if len(values):
			summary[key] = {"mean": float(values.mean()), "std": float(values.std(ddof=0)), "n": len(values)}
	return summary
