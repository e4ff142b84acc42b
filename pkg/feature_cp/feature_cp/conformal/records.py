# Copyright (c) 2026, Mansy and contributors
# For license information, please see license.txt

"""
Calibration records and output-space bands.
"""

import hashlib
import json
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from feature_cp.exceptions import ValidationError
from feature_cp.feature_cp.conformal.quantile import conformal_quantile

# Membership slack so that a point band still contains a target reproduced up to float rounding.
MEMBERSHIP_ATOL = 1e-9


class ScoreKind(str, Enum):
	OUTPUT_LINF = "output_linf"
	FEATURE_SURROGATE = "feature_surrogate"
	CQR_SIGNED = "cqr_signed"
	FEATURE_CQR_SIGNED_LO = "feature_cqr_signed_lo"
	FEATURE_CQR_SIGNED_HI = "feature_cqr_signed_hi"


def config_digest(config: dict) -> str:
	"""Stable digest of a scoring configuration (canonical JSON, sha256)."""
	payload = json.dumps(config, sort_keys=True, separators=(",", ":"), allow_nan=False)
	return hashlib.sha256(payload.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class CalibrationRecord:
	scores: np.ndarray
	alpha: float
	q: float
	score_kind: ScoreKind
	score_config_digest: str
	score_config: dict = field(default_factory=dict)

	def __post_init__(self):
		scores = np.sort(np.asarray(self.scores, dtype=np.float64).reshape(-1))
		scores.setflags(write=False)
		object.__setattr__(self, "scores", scores)
		object.__setattr__(self, "score_kind", ScoreKind(self.score_kind))
		expected = conformal_quantile(scores, self.alpha)
		if not (expected == self.q or (math.isinf(expected) and math.isinf(self.q))):
			raise ValidationError(f"record q={self.q} is not the conformal quantile {expected}")

	@classmethod
	def build(cls, scores, alpha: float, score_kind: ScoreKind, score_config: dict) -> "CalibrationRecord":
		return cls(
			scores=scores,
			alpha=alpha,
			q=conformal_quantile(scores, alpha),
			score_kind=score_kind,
			score_config_digest=config_digest(score_config),
			score_config=dict(score_config),
		)

	@property
	def is_finite(self) -> bool:
		return math.isfinite(self.q)

	def with_alpha(self, alpha: float) -> "CalibrationRecord":
		"""Same scores, re-quantiled at another level."""
		return CalibrationRecord.build(self.scores, alpha, self.score_kind, self.score_config)

	def to_dict(self) -> dict:
		return {
			"alpha": self.alpha,
			"q": self.q if self.is_finite else "inf",
			"score_kind": self.score_kind.value,
			"score_config_digest": self.score_config_digest,
			"score_config": self.score_config,
			"scores": [s if math.isfinite(s) else "inf" for s in self.scores.tolist()],
		}

	@classmethod
	def from_dict(cls, data: dict) -> "CalibrationRecord":
		q = data["q"]
		return cls(
			scores=np.asarray([math.inf if s == "inf" else float(s) for s in data["scores"]], dtype=np.float64),
			alpha=float(data["alpha"]),
			q=math.inf if q == "inf" else float(q),
			score_kind=ScoreKind(data["score_kind"]),
			score_config_digest=data["score_config_digest"],
			score_config=dict(data.get("score_config", {})),
		)


@dataclass(frozen=True)
class OutputBand:
	"""Closed box [lo, hi] in response space, one interval per dimension."""

	lo: np.ndarray
	hi: np.ndarray
	degenerate: bool = False

	def __post_init__(self):
		lo = np.asarray(self.lo, dtype=np.float64).reshape(-1)
		hi = np.asarray(self.hi, dtype=np.float64).reshape(-1)
		if lo.shape != hi.shape:
			raise ValidationError(f"band bounds differ in shape: {lo.shape} vs {hi.shape}")
		if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
			raise ValidationError("band bounds must be finite; use UnboundedBand")
		if np.any(lo > hi):
			raise ValidationError("band has lo > hi")
		object.__setattr__(self, "lo", lo)
		object.__setattr__(self, "hi", hi)

	@property
	def lengths(self) -> np.ndarray:
		return self.hi - self.lo

	def contains(self, y, atol: float = MEMBERSHIP_ATOL) -> bool:
		y = np.asarray(y, dtype=np.float64).reshape(-1)
		return bool(np.all(y >= self.lo - atol) and np.all(y <= self.hi + atol))


@dataclass(frozen=True)
class UnboundedBand:
	"""The whole response space, produced when the calibrated quantile is +inf."""

	dim: int
	degenerate: bool = False

	def contains(self, y, atol: float = MEMBERSHIP_ATOL) -> bool:
		return True


def bands_from_arrays(lo: np.ndarray, hi: np.ndarray, degenerate=None) -> list[OutputBand]:
	if degenerate is None:
		degenerate = np.zeros(lo.shape[0], dtype=bool)
	return [OutputBand(l, h, bool(d)) for l, h, d in zip(lo, hi, degenerate)]


def clamp_crossed(lo: np.ndarray, hi: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
	"""Collapse rows with lo > hi to their midpoint; returns (lo, hi, crossed)."""
	inverted = lo > hi
	mid = 0.5 * (lo + hi)
	return np.where(inverted, mid, lo), np.where(inverted, mid, hi), np.any(inverted, axis=-1)
