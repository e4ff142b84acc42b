# Copyright (c) 2026, Mansy and contributors
# For license information, please see license.txt

"""
Band Estimation by interval bound propagation through the prediction head.

A feature ball is enclosed in a box and pushed layer by layer through g:
affine layers map (center, radius) to (W c + b, |W| r) and ReLU clips both
ends at zero. The resulting output box contains g(v) for every v in the
input box; with an affine head it is exactly the image's bounding box.

``forward_bounds`` keeps the ball itself in play: pre-activations stay
linear in the displacement until a ReLU straddles zero, which is what
Band Estimation uses. ``inner_extremes`` works from the other side and
returns output values some point of the ball really reaches, following
the path a surrogate search takes.
"""

from dataclasses import dataclass

import numpy as np

from feature_cp.exceptions import DimensionMismatchError, ValidationError
from feature_cp.feature_cp.band.ball import FeatureBand, FeatureNorm
from feature_cp.feature_cp.nn.mlp import SplitModel

CHUNK_ROWS = 256
INNER_STEPS = 50
# Paths that bend may need more than INNER_STEPS steps to reach the boundary.
FLOW_STEP_CAP = 4


@dataclass(frozen=True)
class Box:
	"""Axis-aligned box; ``lo``/``hi`` are vectors or row-stacked batches of them.

	``exact`` marks a box equal to the bounding box of the set it encloses.
	"""

	lo: np.ndarray
	hi: np.ndarray
	exact: bool = True

	def __post_init__(self):
		lo = np.asarray(self.lo, dtype=np.float64)
		hi = np.asarray(self.hi, dtype=np.float64)
		if lo.shape != hi.shape:
			raise ValidationError(f"box bounds differ in shape: {lo.shape} vs {hi.shape}")
		if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
			raise ValidationError("box bounds must be finite")
		if np.any(lo > hi):
			raise ValidationError("box has lo > hi")
		object.__setattr__(self, "lo", lo)
		object.__setattr__(self, "hi", hi)

	@property
	def widths(self) -> np.ndarray:
		return self.hi - self.lo

	def contains(self, points, atol: float = 0.0) -> np.ndarray:
		points = np.asarray(points, dtype=np.float64)
		return np.all((points >= self.lo - atol) & (points <= self.hi + atol), axis=-1)

	def contains_box(self, other: "Box", atol: float = 0.0) -> bool:
		return bool(np.all(other.lo >= self.lo - atol) and np.all(other.hi <= self.hi + atol))


def ball_to_box(band: FeatureBand) -> Box:
	"""Smallest box enclosing the ball; exact for l_inf, a strict superset for l2."""
	exact = band.norm is FeatureNorm.LINF or band.radius == 0.0
	return Box(band.center - band.radius, band.center + band.radius, exact)


def ibp_propagate(model: SplitModel, input_box: Box) -> Box:
	if input_box.lo.shape[-1] != model.feature_width:
		raise DimensionMismatchError("input box", model.feature_width, input_box.lo.shape[-1])
	lo, hi = input_box.lo, input_box.hi
	affine_only = True
	for w, b, relu in model.head_layers():
		center = 0.5 * (lo + hi)
		radius = 0.5 * (hi - lo)
		center = center @ w.T + b
		radius = radius @ np.abs(w).T
		lo, hi = center - radius, center + radius
		if relu:
			affine_only = False
			lo, hi = np.maximum(lo, 0.0), np.maximum(hi, 0.0)
	return Box(lo, hi, input_box.exact and affine_only)


def sample_inner_box(model: SplitModel, band: FeatureBand, n: int, seed: int) -> Box:
	"""Componentwise min/max of g over ``n`` uniform ball samples: an inner approximation."""
	if n < 1:
		raise ValidationError(f"need at least one sample, got {n}")
	images = model.head_forward(band.sample(n, np.random.default_rng(seed)))
	return Box(images.min(axis=0), images.max(axis=0), exact=False)


def tightness_ratio(inner: Box, outer: Box) -> float:
	"""Mean inner width over mean outer width; 1.0 when the outer box is a point."""
	outer_width = float(np.mean(outer.widths))
	if outer_width == 0.0:
		return 1.0
	return float(np.mean(inner.widths)) / outer_width


def _radii(radius, n: int) -> np.ndarray:
	radius = np.broadcast_to(np.asarray(radius, dtype=np.float64), (n,))
	if not (np.all(np.isfinite(radius)) and np.all(radius >= 0)):
		raise ValidationError("ball radii must be finite and >= 0")
	return radius


def _centers(model: SplitModel, centers) -> np.ndarray:
	centers = np.asarray(centers, dtype=np.float64)
	if centers.ndim == 1:
		centers = centers[None, :]
	if centers.ndim != 2 or centers.shape[1] != model.feature_width:
		raise DimensionMismatchError("ball center", model.feature_width, centers.shape[-1])
	return centers


def forward_bounds(model: SplitModel, centers, radius, norm: FeatureNorm = FeatureNorm.L2) -> Box:
	"""Output box of g over the balls ||v - center|| <= radius, one per row.

	Each pre-activation is carried as c + A delta + e with delta in the unit
	ball scaled by ``radius`` and |e| <= r, so an affine stretch of the head is
	bounded through the dual norm of the rows of A instead of through a box
	around the ball. ReLUs that stay on one side pass the form through;
	ReLUs that straddle zero are relaxed to s z + [0, -s lo] with
	s = hi / (hi - lo). Every stage is intersected with plain interval bounds.

	``exact`` holds when no ReLU straddled zero for any row: g is then affine
	on every ball and the box is the bounding box of the image.
	"""
	norm = FeatureNorm(norm)
	centers = _centers(model, centers)
	radius = _radii(radius, centers.shape[0])
	los, his = [], []
	exact = True
	for start in range(0, centers.shape[0], CHUNK_ROWS):
		lo, hi, chunk_exact = _forward_chunk(
			model, centers[start : start + CHUNK_ROWS], radius[start : start + CHUNK_ROWS], norm
		)
		los.append(lo)
		his.append(hi)
		exact &= chunk_exact
	lo, hi = np.concatenate(los), np.concatenate(his)
	point = radius == 0.0
	if point.any():
		lo[point] = hi[point] = model.head_forward(centers[point])
	return Box(lo, np.maximum(hi, lo), exact)


def _forward_chunk(model: SplitModel, c: np.ndarray, radius: np.ndarray, norm: FeatureNorm):
	m, width = c.shape
	A = np.broadcast_to(np.eye(width), (m, width, width))
	r = np.zeros_like(c)
	box_lo = c - radius[:, None]
	box_hi = c + radius[:, None]
	exact = True
	for w, b, relu in model.head_layers():
		c = c @ w.T + b
		A = np.matmul(w, A)
		r = r @ np.abs(w).T
		spread = radius[:, None] * norm.dual(A) + r
		mid = 0.5 * (box_lo + box_hi) @ w.T + b
		half = 0.5 * (box_hi - box_lo) @ np.abs(w).T
		box_lo = np.maximum(c - spread, mid - half)
		box_hi = np.minimum(c + spread, mid + half)
		if not relu:
			break
		off = box_hi <= 0.0
		unstable = (box_lo < 0.0) & ~off
		if unstable.any():
			exact = False
		slope = np.where(off, 0.0, 1.0)
		shift = np.zeros_like(c)
		if unstable.any():
			s = box_hi[unstable] / (box_hi[unstable] - box_lo[unstable])
			slope[unstable] = s
			shift[unstable] = -0.5 * s * box_lo[unstable]
		c = slope * c + shift
		A = slope[:, :, None] * A
		r = slope * r + shift
		box_lo, box_hi = np.maximum(box_lo, 0.0), np.maximum(box_hi, 0.0)
	return box_lo, box_hi, exact


def inner_extremes(
	model: SplitModel, centers, radius, norm: FeatureNorm = FeatureNorm.L2, steps: int = INNER_STEPS
) -> Box:
	"""Per-output values g reaches where its steepest-ascent (or -descent) path leaves each ball.

	The path starts at the center and moves along the gradient in steps of
	norm radius / ``steps``, projected back onto the ball, until the
	displacement reaches the radius; rows whose gradient vanishes stop early.
	These are the points a surrogate search toward a far target passes
	through. Every value is attained inside the ball, so the box lies within
	the image's bounding box.
	"""
	norm = FeatureNorm(norm)
	centers = _centers(model, centers)
	radius = _radii(radius, centers.shape[0])
	if steps < 1:
		raise ValidationError(f"steps must be >= 1, got {steps}")
	base = model.head_forward(centers)
	lo, hi = base.copy(), base.copy()
	moving = radius > 0
	if not moving.any():
		return Box(lo, hi, exact=True)
	c, r = centers[moving], radius[moving]
	eye = np.eye(model.output_width)
	for j in range(model.output_width):
		for sign in (1.0, -1.0):
			end = _flow_end(model, c, r, norm, sign * eye[j], steps)
			value = model.head_forward(c + end)[:, j]
			if sign > 0:
				hi[moving, j] = np.maximum(value, base[moving, j])
			else:
				lo[moving, j] = np.minimum(value, base[moving, j])
	return Box(lo, hi, exact=False)


def _flow_end(model: SplitModel, c: np.ndarray, r: np.ndarray, norm: FeatureNorm, cotangent, steps: int) -> np.ndarray:
	delta = np.zeros_like(c)
	active = np.ones(c.shape[0], dtype=bool)
	for _ in range(FLOW_STEP_CAP * steps):
		rows = np.flatnonzero(active)
		if rows.size == 0:
			break
		grad = model.head_vjp(c[rows] + delta[rows], cotangent)
		length = norm.measure(grad)
		stalled = length == 0.0
		scale = np.divide(r[rows] / steps, length, out=np.zeros_like(length), where=~stalled)
		delta[rows] = norm.project(delta[rows] + scale[:, None] * grad, r[rows])
		active[rows] = (norm.measure(delta[rows]) < r[rows] * (1.0 - 1e-9)) & ~stalled
	return delta
