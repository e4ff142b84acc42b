# Copyright (c) 2026, Mansy and contributors
# For license information, please see license.txt

"""
Deterministic mini-batch SGD for MlpSpec networks.
"""

from dataclasses import asdict, dataclass

import numpy as np

from feature_cp.exceptions import DimensionMismatchError, NonFiniteError, ValidationError
from feature_cp.feature_cp.nn.losses import LossKind, loss_output_grad, loss_values
from feature_cp.feature_cp.nn.mlp import MlpParams, MlpSpec, SplitModel, init_params
from feature_cp.logger import logger

log = logger("nn.train")


@dataclass(frozen=True)
class TrainConfig:
	epochs: int = 100
	batch_size: int = 64
	learning_rate: float = 0.01
	seed: int = 0
	weight_decay: float = 0.0

	def __post_init__(self):
		if self.epochs < 0:
			raise ValidationError(f"epochs must be >= 0, got {self.epochs}")
		if self.batch_size < 1:
			raise ValidationError(f"batch_size must be positive, got {self.batch_size}")
		if not self.learning_rate > 0:
			raise ValidationError(f"learning_rate must be positive, got {self.learning_rate}")
		if self.seed < 0:
			raise ValidationError(f"seed must be unsigned, got {self.seed}")
		if self.weight_decay < 0:
			raise ValidationError(f"weight_decay must be >= 0, got {self.weight_decay}")

	@classmethod
	def from_dict(cls, data: dict) -> "TrainConfig":
		return cls(**data)

	def to_dict(self) -> dict:
		return asdict(self)


def _streams(seed: int) -> tuple[np.random.Generator, np.random.Generator]:
	init_seq, shuffle_seq = np.random.SeedSequence(seed).spawn(2)
	return (
		np.random.Generator(np.random.Philox(init_seq)),
		np.random.Generator(np.random.Philox(shuffle_seq)),
	)


def initial_params(spec: MlpSpec, seed: int) -> MlpParams:
	"""The parameters ``train`` starts from for this seed (the untrained control)."""
	init_rng, _ = _streams(seed)
	return init_params(spec, int(init_rng.integers(2**63)))


def _forward_cache(params: MlpParams, x: np.ndarray) -> tuple[list[np.ndarray], list[np.ndarray], np.ndarray]:
	inputs, pre = [], []
	h = x
	last = len(params.weights) - 1
	for i, (w, b) in enumerate(zip(params.weights, params.biases)):
		inputs.append(h)
		z = h @ w.T + b
		pre.append(z)
		h = np.maximum(z, 0.0) if i < last else z
	return inputs, pre, h


def _mean_loss(params: MlpParams, x: np.ndarray, y: np.ndarray, loss: LossKind) -> float:
	_, _, out = _forward_cache(params, x)
	return float(np.mean(loss_values(loss, out, y)))


def _sgd_step(params: MlpParams, x: np.ndarray, y: np.ndarray, loss: LossKind, cfg: TrainConfig) -> MlpParams:
	inputs, pre, out = _forward_cache(params, x)
	g = loss_output_grad(loss, out, y) / x.shape[0]
	weights, biases = list(params.weights), list(params.biases)
	last = len(weights) - 1
	for i in range(last, -1, -1):
		if i < last:
			g = g * (pre[i] > 0)
		dw = g.T @ inputs[i] + cfg.weight_decay * weights[i]
		db = g.sum(axis=0)
		g = g @ weights[i]
		weights[i] = weights[i] - cfg.learning_rate * dw
		biases[i] = biases[i] - cfg.learning_rate * db
	return MlpParams(tuple(weights), tuple(biases))


def train_params(
	spec: MlpSpec, X, Y, loss: LossKind, cfg: TrainConfig, init: MlpParams | None = None
) -> tuple[MlpParams, list[float]]:
	"""Fit ``spec`` on (X, Y); returns the parameters and the training loss per epoch.

	``history[0]`` is the loss at initialisation, ``history[e]`` after epoch e.
	"""
	x = np.asarray(X, dtype=np.float64)
	y = np.asarray(Y, dtype=np.float64)
	if x.ndim != 2 or x.shape[1] != spec.input_width:
		raise DimensionMismatchError("X columns", spec.input_width, x.shape[-1])
	if y.ndim == 1:
		y = y[:, None]
	if y.shape[0] != x.shape[0]:
		raise ValidationError(f"X has {x.shape[0]} rows but Y has {y.shape[0]}")
	if not loss.is_cross_entropy and y.shape[1] != spec.output_width:
		raise DimensionMismatchError("Y columns", spec.output_width, y.shape[1])

	init_rng, shuffle_rng = _streams(cfg.seed)
	params = init if init is not None else init_params(spec, int(init_rng.integers(2**63)))
	params.check(spec)

	history = [_mean_loss(params, x, y, loss)]
	n = x.shape[0]
	for epoch in range(1, cfg.epochs + 1):
		order = shuffle_rng.permutation(n)
		for start in range(0, n, cfg.batch_size):
			batch = order[start : start + cfg.batch_size]
			params = _sgd_step(params, x[batch], y[batch], loss, cfg)
		current = _mean_loss(params, x, y, loss)
		if not np.isfinite(current):
			raise NonFiniteError(f"training loss became {current} at epoch {epoch}", epoch=epoch)
		history.append(current)
		log.debug("epoch %d loss %.6f", epoch, current)
	if cfg.epochs:
		log.info("trained %s: loss %.5f -> %.5f", list(spec.layer_widths), history[0], history[-1])
	return params, history


def train(spec: MlpSpec, split_index: int, X, Y, loss: LossKind, cfg: TrainConfig) -> SplitModel:
	if not 1 <= split_index <= spec.n_layers - 1:
		raise ValidationError(f"split_index {split_index} leaves f or g without an affine layer")
	params, _ = train_params(spec, X, Y, loss, cfg)
	return SplitModel(spec, params, split_index)
