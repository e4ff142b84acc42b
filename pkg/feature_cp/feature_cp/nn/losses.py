# Copyright (c) 2026, Mansy and contributors
# For license information, please see license.txt

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.special import logsumexp, softmax

from feature_cp.exceptions import ValidationError


class LossName(str, Enum):
	MSE = "mse"
	PINBALL = "pinball"
	CROSS_ENTROPY = "cross_entropy"


@dataclass(frozen=True)
class LossKind:
	name: LossName
	tau: float | None = None

	def __post_init__(self):
		object.__setattr__(self, "name", LossName(self.name))
		if self.name is LossName.PINBALL:
			if self.tau is None or not 0.0 < self.tau < 1.0:
				raise ValidationError(f"pinball tau must lie strictly inside (0, 1), got {self.tau}")
		elif self.tau is not None:
			raise ValidationError(f"{self.name.value} takes no tau")

	@classmethod
	def mse(cls) -> "LossKind":
		return cls(LossName.MSE)

	@classmethod
	def pinball(cls, tau: float) -> "LossKind":
		return cls(LossName.PINBALL, float(tau))

	@classmethod
	def cross_entropy(cls) -> "LossKind":
		return cls(LossName.CROSS_ENTROPY)

	@property
	def is_pinball(self) -> bool:
		return self.name is LossName.PINBALL

	@property
	def is_cross_entropy(self) -> bool:
		return self.name is LossName.CROSS_ENTROPY


def _labels(y: np.ndarray) -> np.ndarray:
	labels = np.asarray(y).reshape(-1)
	as_int = labels.astype(np.int64)
	if not np.array_equal(as_int, labels):
		raise ValidationError("cross-entropy targets must be integer class labels")
	return as_int


def loss_values(loss: LossKind, out: np.ndarray, y: np.ndarray) -> np.ndarray:
	"""Per-row loss; rows are samples, summed over output dimensions."""
	if loss.is_cross_entropy:
		labels = _labels(y)
		return logsumexp(out, axis=1) - out[np.arange(out.shape[0]), labels]
	r = y - out
	if loss.is_pinball:
		return np.sum(np.maximum(loss.tau * r, (loss.tau - 1.0) * r), axis=1)
	return np.sum(r * r, axis=1)


def loss_output_grad(loss: LossKind, out: np.ndarray, y: np.ndarray) -> np.ndarray:
	"""Row-wise gradient of ``loss_values`` with respect to ``out``."""
	if loss.is_cross_entropy:
		labels = _labels(y)
		g = softmax(out, axis=1)
		g[np.arange(out.shape[0]), labels] -= 1.0
		return g
	if loss.is_pinball:
		return np.where(y - out > 0, -loss.tau, 1.0 - loss.tau)
	return 2.0 * (out - y)
