# Copyright (c) 2026, Mansy and contributors
# For license information, please see license.txt

from dataclasses import dataclass
from enum import Enum

import numpy as np

from feature_cp.exceptions import ValidationError


class FeatureNorm(str, Enum):
	LINF = "linf"
	L2 = "l2"

	def measure(self, delta: np.ndarray) -> np.ndarray:
		"""Row-wise norm of displacement vectors."""
		if self is FeatureNorm.LINF:
			return np.max(np.abs(delta), axis=-1)
		return np.linalg.norm(delta, axis=-1)

	def dual(self, rows: np.ndarray) -> np.ndarray:
		"""Dual norm along the last axis: max of a . delta over the unit ball."""
		if self is FeatureNorm.LINF:
			return np.sum(np.abs(rows), axis=-1)
		return np.linalg.norm(rows, axis=-1)

	def project(self, delta: np.ndarray, radius) -> np.ndarray:
		"""Row-wise projection of displacements onto the ball of ``radius``."""
		radius = np.asarray(radius, dtype=np.float64)
		if self is FeatureNorm.LINF:
			r = radius[..., None] if radius.ndim else radius
			return np.clip(delta, -r, r)
		norms = self.measure(delta)
		scale = np.minimum(1.0, np.divide(radius, norms, out=np.ones_like(norms), where=norms > radius))
		return delta * scale[..., None]


@dataclass(frozen=True)
class FeatureBand:
	"""Ball {v : ||v - center|| <= radius} in feature space."""

	center: np.ndarray
	radius: float
	norm: FeatureNorm = FeatureNorm.LINF

	def __post_init__(self):
		center = np.asarray(self.center, dtype=np.float64)
		if not np.all(np.isfinite(center)):
			raise ValidationError("feature band center must be finite")
		if not self.radius >= 0 or not np.isfinite(self.radius):
			raise ValidationError(f"feature band radius must be finite and >= 0, got {self.radius}")
		object.__setattr__(self, "center", center)
		object.__setattr__(self, "norm", FeatureNorm(self.norm))

	def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
		"""``n`` points drawn uniformly from the ball (center must be a single vector)."""
		dim = self.center.shape[-1]
		if self.norm is FeatureNorm.LINF:
			return self.center + self.radius * rng.uniform(-1.0, 1.0, size=(n, dim))
		direction = rng.standard_normal((n, dim))
		direction /= np.linalg.norm(direction, axis=1, keepdims=True)
		scale = self.radius * rng.uniform(size=(n, 1)) ** (1.0 / dim)
		return self.center + scale * direction
