# Copyright (c) 2026, Mansy and contributors
# For license information, please see license.txt

"""
Dense ReLU networks split into a feature extractor f and a prediction head g.

Weights are stored as (out, in) matrices; every op accepts one sample as a
1-D vector or a batch as a 2-D array with one sample per row.
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np

from feature_cp.exceptions import DimensionMismatchError, ValidationError
from feature_cp.feature_cp.nn.losses import LossKind, loss_output_grad


class Activation(str, Enum):
	RELU = "relu"
	IDENTITY = "identity"


@dataclass(frozen=True)
class MlpSpec:
	layer_widths: tuple[int, ...]
	hidden_activation: Activation = Activation.RELU
	output_activation: Activation = Activation.IDENTITY

	def __post_init__(self):
		widths = tuple(int(w) for w in self.layer_widths)
		object.__setattr__(self, "layer_widths", widths)
		object.__setattr__(self, "hidden_activation", Activation(self.hidden_activation))
		object.__setattr__(self, "output_activation", Activation(self.output_activation))
		if len(widths) < 2:
			raise ValidationError(f"an MLP needs at least two widths, got {list(widths)}")
		if any(w < 1 for w in widths):
			raise ValidationError(f"all layer widths must be >= 1, got {list(widths)}")
		if self.hidden_activation is not Activation.RELU:
			raise ValidationError("only ReLU hidden activations are supported")
		if self.output_activation is not Activation.IDENTITY:
			raise ValidationError("only identity output activations are supported")

	@property
	def n_layers(self) -> int:
		return len(self.layer_widths) - 1

	@property
	def input_width(self) -> int:
		return self.layer_widths[0]

	@property
	def output_width(self) -> int:
		return self.layer_widths[-1]

	def to_dict(self) -> dict:
		return {
			"layer_widths": list(self.layer_widths),
			"hidden_activation": self.hidden_activation.value,
			"output_activation": self.output_activation.value,
		}


@dataclass(frozen=True)
class MlpParams:
	weights: tuple[np.ndarray, ...]
	biases: tuple[np.ndarray, ...]

	def __post_init__(self):
		object.__setattr__(self, "weights", tuple(np.asarray(w, dtype=np.float64) for w in self.weights))
		object.__setattr__(self, "biases", tuple(np.asarray(b, dtype=np.float64) for b in self.biases))

	def check(self, spec: MlpSpec) -> None:
		if len(self.weights) != spec.n_layers or len(self.biases) != spec.n_layers:
			raise ValidationError(f"expected {spec.n_layers} layers, got {len(self.weights)} weights")
		for i, (w, b) in enumerate(zip(self.weights, self.biases)):
			shape = (spec.layer_widths[i + 1], spec.layer_widths[i])
			if w.shape != shape or b.shape != (shape[0],):
				raise ValidationError(f"layer {i}: expected W{shape} and b({shape[0]},), got W{w.shape} b{b.shape}")
			if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
				raise ValidationError(f"layer {i} has non-finite parameters")


def init_params(spec: MlpSpec, seed: int) -> MlpParams:
	"""He-uniform weights and zero biases from a Philox stream keyed by ``seed``."""
	rng = np.random.Generator(np.random.Philox(seed))
	weights, biases = [], []
	for fan_in, fan_out in zip(spec.layer_widths[:-1], spec.layer_widths[1:]):
		limit = np.sqrt(6.0 / fan_in)
		weights.append(rng.uniform(-limit, limit, size=(fan_out, fan_in)))
		biases.append(np.zeros(fan_out))
	return MlpParams(tuple(weights), tuple(biases))


def as_batch(x, width: int, what: str) -> tuple[np.ndarray, bool]:
	arr = np.asarray(x, dtype=np.float64)
	single = arr.ndim == 1
	if single:
		arr = arr[None, :]
	if arr.ndim != 2 or arr.shape[1] != width:
		raise DimensionMismatchError(what, width, arr.shape[-1] if arr.ndim else 0)
	return arr, single


def _run_layers(params: MlpParams, h: np.ndarray, start: int, stop: int, n_layers: int) -> np.ndarray:
	for i in range(start, stop):
		h = h @ params.weights[i].T + params.biases[i]
		if i < n_layers - 1:
			h = np.maximum(h, 0.0)
	return h


def mlp_forward(spec: MlpSpec, params: MlpParams, x) -> np.ndarray:
	h, single = as_batch(x, spec.input_width, "input")
	out = _run_layers(params, h, 0, spec.n_layers, spec.n_layers)
	return out[0] if single else out


@dataclass(frozen=True)
class SplitModel:
	"""A trained network mu = g o f cut after layer ``split_index``."""

	spec: MlpSpec
	params: MlpParams
	split_index: int

	def __post_init__(self):
		self.params.check(self.spec)
		if not 1 <= self.split_index <= self.spec.n_layers - 1:
			raise ValidationError(
				f"split_index must lie in [1, {self.spec.n_layers - 1}] for {self.spec.n_layers} layers, "
				f"got {self.split_index}"
			)

	@property
	def input_width(self) -> int:
		return self.spec.input_width

	@property
	def feature_width(self) -> int:
		return self.spec.layer_widths[self.split_index]

	@property
	def output_width(self) -> int:
		return self.spec.output_width

	def head_layers(self) -> list[tuple[np.ndarray, np.ndarray, bool]]:
		"""(W, b, relu_after) for every layer of g."""
		n = self.spec.n_layers
		return [
			(self.params.weights[i], self.params.biases[i], i < n - 1) for i in range(self.split_index, n)
		]

	def forward(self, x) -> np.ndarray:
		return self.head_forward(self.feature_forward(x))

	def feature_forward(self, x) -> np.ndarray:
		h, single = as_batch(x, self.input_width, "input")
		v = _run_layers(self.params, h, 0, self.split_index, self.spec.n_layers)
		return v[0] if single else v

	def head_forward(self, v) -> np.ndarray:
		h, single = as_batch(v, self.feature_width, "feature")
		out = _run_layers(self.params, h, self.split_index, self.spec.n_layers, self.spec.n_layers)
		return out[0] if single else out

	def head_vjp(self, v, cotangent) -> np.ndarray:
		"""Row-wise cotangent^T d g(v) / dv; a 1-D cotangent is shared by every row."""
		h, single = as_batch(v, self.feature_width, "feature")
		_, pre = self._head_pass(h)
		g = np.broadcast_to(np.asarray(cotangent, dtype=np.float64), (h.shape[0], self.output_width))
		g = self._head_backward(g, pre)
		return g[0] if single else g

	def head_input_gradient(self, v, y, loss: LossKind) -> np.ndarray:
		"""Row-wise d loss(g(v), y) / dv by a reverse pass through the head.

		For MSE the loss is the squared l2 norm ||g(v) - y||^2; for cross
		entropy ``y`` holds integer labels.
		"""
		if loss.is_pinball:
			raise ValidationError("pinball loss has no surrogate-feature gradient")
		h, single = as_batch(v, self.feature_width, "feature")
		out, pre = self._head_pass(h)
		g = self._head_backward(loss_output_grad(loss, out, _targets(y, out, loss, single)), pre)
		return g[0] if single else g

	def _head_pass(self, h: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
		pre = []
		for w, b, relu in self.head_layers():
			z = h @ w.T + b
			pre.append(z)
			h = np.maximum(z, 0.0) if relu else z
		return h, pre

	def _head_backward(self, g: np.ndarray, pre: list[np.ndarray]) -> np.ndarray:
		for (w, _b, relu), z in zip(reversed(self.head_layers()), reversed(pre)):
			if relu:
				g = g * (z > 0)
			g = g @ w
		return g


def _targets(y, out: np.ndarray, loss: LossKind, single: bool) -> np.ndarray:
	if loss.is_cross_entropy:
		labels = np.asarray(y).reshape(-1)
		if labels.shape[0] != out.shape[0]:
			raise DimensionMismatchError("labels", out.shape[0], labels.shape[0])
		return labels
	arr = np.asarray(y, dtype=np.float64)
	if single or arr.ndim == 1:
		arr = arr.reshape(1, -1) if single else arr[:, None]
	if arr.shape != out.shape:
		raise DimensionMismatchError("target", out.shape[1], arr.shape[-1])
	return arr
