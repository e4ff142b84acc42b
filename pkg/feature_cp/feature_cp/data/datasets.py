# Copyright (c) 2026, Mansy and contributors
# For license information, please see license.txt

"""
Datasets: synthetic generators and CSV ingestion.

Every generator is a pure function of (seed, n).
"""

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

from feature_cp.exceptions import DataError, ValidationError
from feature_cp.feature_cp.nn.mlp import MlpParams, MlpSpec, SplitModel, init_params


@dataclass(frozen=True)
class Dataset:
	X: np.ndarray
	Y: np.ndarray
	feature_names: list[str] | None = None
	target_names: list[str] | None = None

	def __post_init__(self):
		X = np.array(self.X, dtype=np.float64)
		Y = np.array(self.Y, dtype=np.float64)
		if Y.ndim == 1:
			Y = Y[:, None]
		if X.ndim != 2:
			raise ValidationError(f"X must be a matrix, got shape {X.shape}")
		if X.shape[0] != Y.shape[0]:
			raise ValidationError(f"X has {X.shape[0]} rows but Y has {Y.shape[0]}")
		if not (np.all(np.isfinite(X)) and np.all(np.isfinite(Y))):
			raise ValidationError("dataset contains non-finite entries")
		X.setflags(write=False)
		Y.setflags(write=False)
		object.__setattr__(self, "X", X)
		object.__setattr__(self, "Y", Y)

	@property
	def n(self) -> int:
		return self.X.shape[0]

	def subset(self, indices) -> "Dataset":
		idx = np.asarray(indices, dtype=np.int64)
		return Dataset(self.X[idx], self.Y[idx], self.feature_names, self.target_names)


def _check_n(n: int) -> None:
	if n < 1:
		raise ValidationError(f"n must be >= 1, got {n}")


def gen_synthetic_multidim(seed: int, n: int, d: int = 100, k: int = 10) -> Dataset:
	"""Y = W X + eps with X ~ U[0,1]^d and W (k x d) fixed by the seed."""
	_check_n(n)
	rng = np.random.default_rng(seed)
	W = rng.standard_normal((k, d)) / np.sqrt(d)
	X = rng.uniform(0.0, 1.0, size=(n, d))
	Y = X @ W.T + rng.standard_normal((n, k))
	return Dataset(X, Y)


def gen_synthetic_1d_hetero(seed: int, n: int) -> Dataset:
	"""y = x sin(x) + (0.1 + 0.2 x) eps, x ~ U[0, 5]: noise grows with x."""
	_check_n(n)
	rng = np.random.default_rng(seed)
	x = rng.uniform(0.0, 5.0, size=n)
	y = x * np.sin(x) + (0.1 + 0.2 * x) * rng.standard_normal(n)
	return Dataset(x[:, None], y[:, None])


def gen_synthetic_classification(seed: int, n: int, d: int = 10, n_classes: int = 3) -> Dataset:
	"""Labels are argmax(W x + Gumbel noise) for a seeded W; Y holds the label as a float column."""
	_check_n(n)
	rng = np.random.default_rng(seed)
	W = 2.0 * rng.standard_normal((n_classes, d)) / np.sqrt(d)
	X = rng.standard_normal((n, d))
	labels = np.argmax(X @ W.T + rng.gumbel(size=(n, n_classes)), axis=1)
	return Dataset(X, labels.astype(np.float64)[:, None])


def zero_quantile_oracle(seed: int, hidden: int = 16) -> SplitModel:
	spec = MlpSpec((1, hidden, hidden, 1))
	params = init_params(spec, seed)
	rng = np.random.default_rng(seed)
	biases = tuple(rng.uniform(-0.5, 0.5, size=b.shape) for b in params.biases)
	return SplitModel(spec, MlpParams(params.weights, biases), 2)


def gen_zero_quantile(seed: int, n: int, zero_fraction: float = 0.901) -> tuple[Dataset, SplitModel]:
	"""y = f*(x) + eps where eps is exactly 0 with probability ``zero_fraction``.

	f* is a seeded three-layer ReLU net, returned as the oracle model.
	"""
	_check_n(n)
	if not 0.0 <= zero_fraction <= 1.0:
		raise ValidationError(f"zero_fraction must lie in [0, 1], got {zero_fraction}")
	oracle = zero_quantile_oracle(seed)
	rng = np.random.default_rng(seed + 1)
	X = rng.uniform(0.0, 1.0, size=(n, 1))
	noisy = rng.uniform(size=n) >= zero_fraction
	eps = np.where(noisy, rng.standard_normal(n), 0.0)
	return Dataset(X, oracle.forward(X) + eps[:, None]), oracle


def load_csv(path: str | Path, target_columns: list[str]) -> Dataset:
	"""Read a header-row CSV; ``target_columns`` become Y, every other column X."""
	path = Path(path)
	if not target_columns:
		raise DataError("no target columns given")
	if not path.exists():
		raise DataError(f"file not found: {path}")
	try:
		frame = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
	except pd.errors.EmptyDataError:
		raise DataError(f"no header row in {path}")
	missing = [c for c in target_columns if c not in frame.columns]
	if missing:
		raise DataError(f"target columns not in header: {missing}")
	numeric = frame.apply(pd.to_numeric, errors="coerce")
	bad = ~np.isfinite(numeric.to_numpy(dtype=np.float64))
	if bad.any():
		row, col = np.argwhere(bad)[0]
		raise DataError(f"cannot parse {frame.iat[row, col]!r} as a finite real", row=int(row), column=frame.columns[col])
	feature_columns = [c for c in frame.columns if c not in target_columns]
	return Dataset(
		numeric[feature_columns].to_numpy(dtype=np.float64),
		numeric[list(target_columns)].to_numpy(dtype=np.float64),
		feature_columns,
		list(target_columns),
	)


def write_csv(ds: Dataset, path: str | Path) -> Path:
	path = Path(path)
	path.parent.mkdir(parents=True, exist_ok=True)
	feature_names = ds.feature_names or [f"x{j}" for j in range(ds.X.shape[1])]
	target_names = ds.target_names or [f"y{j}" for j in range(ds.Y.shape[1])]
	frame = pd.DataFrame(np.hstack([ds.X, ds.Y]), columns=feature_names + target_names)
	frame.to_csv(path, index=False, float_format="%.17g")
	return path
