# Copyright (c) 2026, Mansy and contributors
# For license information, please see license.txt

from dataclasses import dataclass

import numpy as np

from feature_cp.exceptions import ValidationError
from feature_cp.feature_cp.data.datasets import Dataset

DEFAULT_RATIOS = (2.0, 2.0, 1.0)


@dataclass(frozen=True)
class SplitIndices:
	train: np.ndarray
	cal: np.ndarray
	test: np.ndarray

	def to_dict(self) -> dict:
		return {"train": self.train.tolist(), "cal": self.cal.tolist(), "test": self.test.tolist()}


def split(n: int, ratios=DEFAULT_RATIOS, seed: int = 0) -> SplitIndices:
	"""Seeded permutation of range(n) cut at the cumulative ``ratios`` (train:cal:test)."""
	ratios = np.asarray(ratios, dtype=np.float64)
	if ratios.shape != (3,) or np.any(ratios <= 0):
		raise ValidationError(f"need three positive ratios, got {ratios.tolist()}")
	if n < len(ratios):
		raise ValidationError(f"cannot split {n} rows into {len(ratios)} non-empty parts")
	bounds = np.rint(n * np.cumsum(ratios) / ratios.sum()).astype(np.int64)
	bounds[-1] = n
	perm = np.random.default_rng(seed).permutation(n)
	train, cal, test = np.split(perm, bounds[:-1])
	if min(len(train), len(cal), len(test)) == 0:
		raise ValidationError(f"ratios {ratios.tolist()} leave an empty fold for n={n}")
	return SplitIndices(train, cal, test)


@dataclass(frozen=True)
class StandardizerState:
	x_mean: np.ndarray
	x_std: np.ndarray
	y_mean: np.ndarray | None = None
	y_std: np.ndarray | None = None

	def transform(self, ds: Dataset) -> Dataset:
		Y = ds.Y if self.y_mean is None else (ds.Y - self.y_mean) / self.y_std
		return Dataset((ds.X - self.x_mean) / self.x_std, Y, ds.feature_names, ds.target_names)

	def inverse(self, ds: Dataset) -> Dataset:
		Y = ds.Y if self.y_mean is None else ds.Y * self.y_std + self.y_mean
		return Dataset(ds.X * self.x_std + self.x_mean, Y, ds.feature_names, ds.target_names)

	def to_dict(self) -> dict:
		return {
			key: None if value is None else value.tolist()
			for key, value in (
				("x_mean", self.x_mean),
				("x_std", self.x_std),
				("y_mean", self.y_mean),
				("y_std", self.y_std),
			)
		}

	@classmethod
	def from_dict(cls, data: dict) -> "StandardizerState":
		return cls(**{k: None if v is None else np.asarray(v, dtype=np.float64) for k, v in data.items()})


def _moments(values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
	mean = values.mean(axis=0)
	std = values.std(axis=0)
	constant = std == 0
	# zero-variance columns pass through untouched
	return np.where(constant, 0.0, mean), np.where(constant, 1.0, std)


def standardize(ds: Dataset, fit_indices, standardize_y: bool = True) -> tuple[Dataset, StandardizerState]:
	"""Fit column statistics on ``fit_indices`` only and apply them to every row."""
	idx = np.asarray(fit_indices, dtype=np.int64)
	if idx.size == 0:
		raise ValidationError("standardize needs at least one fitting row")
	x_mean, x_std = _moments(ds.X[idx])
	y_mean = y_std = None
	if standardize_y:
		y_mean, y_std = _moments(ds.Y[idx])
	state = StandardizerState(x_mean, x_std, y_mean, y_std)
	return state.transform(ds), state
