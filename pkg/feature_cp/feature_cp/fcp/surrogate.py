# Copyright (c) 2026, Mansy and contributors
# For license information, please see license.txt

"""
Surrogate-feature non-conformity score.

Starting from u = f(x), gradient descent on ||g(u) - y||^2 (or the
cross-entropy of g(u) against a label) searches for a feature vector the
head maps onto the target. The score is how far u travelled, ||u - f(x)||,
an upper bound on the distance from f(x) to the target's level set.

Every sample runs the same deterministic procedure, so the scores of a
calibration fold and of a test point are exchangeable as long as both use
the same SurrogateSearchConfig.

Calibration and detection work on censored scores: a search that stops
without reaching its target has not shown that any displacement suffices,
so its score counts as +inf.
"""

from dataclasses import asdict, dataclass, field, replace

import numpy as np

from feature_cp.exceptions import DimensionMismatchError, NonFiniteError, ValidationError
from feature_cp.feature_cp.band.ball import FeatureNorm
from feature_cp.feature_cp.conformal.records import config_digest
from feature_cp.feature_cp.nn.losses import LossKind, LossName, loss_values
from feature_cp.feature_cp.nn.mlp import SplitModel
from feature_cp.logger import logger

log = logger("fcp.surrogate")

# Step multiplier after an accepted step; a rejected one halves it.
STEP_GROWTH = 1.5


@dataclass(frozen=True)
class SurrogateSearchConfig:
	eta: float = 0.05
	max_steps: int = 100
	rel_tol: float = 1e-3
	abs_tol: float = 1e-4
	feature_norm: FeatureNorm = FeatureNorm.L2
	loss: LossName = LossName.MSE
	# Halve a sample's step size instead of taking a step that raises its residual,
	# and grow it by STEP_GROWTH after a step that does not.
	backtrack: bool = True

	def __post_init__(self):
		object.__setattr__(self, "feature_norm", FeatureNorm(self.feature_norm))
		object.__setattr__(self, "loss", LossName(self.loss))
		if not self.eta > 0:
			raise ValidationError(f"eta must be positive, got {self.eta}")
		if int(self.max_steps) != self.max_steps or self.max_steps < 1:
			raise ValidationError(f"max_steps must be a positive integer, got {self.max_steps}")
		if not (0 < self.rel_tol < 1 and self.abs_tol > 0):
			raise ValidationError("rel_tol must lie in (0, 1) and abs_tol must be positive")
		if self.loss is LossName.PINBALL:
			raise ValidationError("the surrogate search runs on mse or cross_entropy")

	@property
	def loss_kind(self) -> LossKind:
		return LossKind(self.loss)

	@property
	def classification(self) -> bool:
		return self.loss is LossName.CROSS_ENTROPY

	def with_steps(self, max_steps: int) -> "SurrogateSearchConfig":
		return replace(self, max_steps=int(max_steps))

	def to_dict(self) -> dict:
		data = asdict(self)
		data["feature_norm"] = self.feature_norm.value
		data["loss"] = self.loss.value
		return data

	@classmethod
	def from_dict(cls, data: dict) -> "SurrogateSearchConfig":
		return cls(**data)

	@property
	def digest(self) -> str:
		return config_digest(self.to_dict())


@dataclass(frozen=True)
class SurrogateResult:
	scores: np.ndarray
	steps_used: np.ndarray
	converged: np.ndarray
	checkpoint_scores: dict[int, np.ndarray] = field(default_factory=dict)
	checkpoint_converged: dict[int, np.ndarray] = field(default_factory=dict)

	@property
	def censored(self) -> np.ndarray:
		return censor(self.scores, self.converged)

	def censored_at(self, m: int) -> np.ndarray:
		"""Censored scores of a run stopped after ``m`` steps."""
		return censor(self.checkpoint_scores[m], self.checkpoint_converged[m])


def censor(scores, converged) -> np.ndarray:
	"""Scores with every unconverged search replaced by +inf."""
	return np.where(np.asarray(converged, dtype=bool), np.asarray(scores, dtype=np.float64), np.inf)


def tolerance_slack(Y, cfg: SurrogateSearchConfig) -> np.ndarray:
	"""Row-wise l2 distance a converged search may still leave between g(u) and y.

	A detection-accepted y lies within this distance of g(u) for some u in
	the feature ball, so at most this far outside the estimated band.
	"""
	if cfg.classification:
		raise ValidationError("tolerance slack applies to the regression search")
	Y = np.asarray(Y, dtype=np.float64)
	Y = Y.reshape(Y.shape[0], -1) if Y.ndim > 1 else Y.reshape(-1, 1)
	return np.sqrt(cfg.rel_tol * np.maximum(np.sum(Y * Y, axis=1), cfg.abs_tol))


def search_targets(model: SplitModel, Y, n: int, cfg: SurrogateSearchConfig) -> np.ndarray:
	"""Row-stacked regression targets, or integer labels for the classification search."""
	if cfg.classification:
		labels = np.asarray(Y).reshape(-1)
		if labels.shape[0] != n:
			raise DimensionMismatchError("labels", n, labels.shape[0])
		as_int = labels.astype(np.int64)
		if not np.array_equal(as_int, labels) or np.any(as_int < 0) or np.any(as_int >= model.output_width):
			raise ValidationError(f"labels must be integers in [0, {model.output_width})")
		return as_int
	targets = np.asarray(Y, dtype=np.float64).reshape(n, -1)
	if targets.shape[1] != model.output_width:
		raise DimensionMismatchError("target", model.output_width, targets.shape[1])
	return targets


def _within_tolerance(out: np.ndarray, objective: np.ndarray, targets: np.ndarray, cfg) -> np.ndarray:
	if cfg.classification:
		return np.argmax(out, axis=1) == targets
	scale = np.maximum(np.sum(targets * targets, axis=1), cfg.abs_tol)
	return objective / scale < cfg.rel_tol


def surrogate_scores(
	model: SplitModel, X, Y, cfg: SurrogateSearchConfig, checkpoints=()
) -> SurrogateResult:
	"""Run the search for every row of X at once.

	``checkpoints`` lists step counts M <= cfg.max_steps; the score a run with
	``max_steps=M`` would return is recorded for each, so several M can be
	compared from a single descent.
	"""
	X = np.asarray(X, dtype=np.float64)
	if X.ndim == 1:
		X = X[None, :]
	v0 = model.feature_forward(X)
	n = v0.shape[0]
	targets = search_targets(model, Y, n, cfg)
	loss = cfg.loss_kind

	marks = sorted({int(m) for m in checkpoints})
	if marks and (marks[0] < 0 or marks[-1] > cfg.max_steps):
		raise ValidationError(f"checkpoints must lie in [0, {cfg.max_steps}], got {marks}")

	u = v0.copy()
	step = np.full(n, float(cfg.eta))
	active = np.ones(n, dtype=bool)
	converged = np.zeros(n, dtype=bool)
	steps_used = np.zeros(n, dtype=np.int64)
	snapshots: dict[int, np.ndarray] = {}
	snapshot_converged: dict[int, np.ndarray] = {}

	for t in range(cfg.max_steps + 1):
		out = model.head_forward(u)
		objective = loss_values(loss, out, targets)
		done = active & _within_tolerance(out, objective, targets, cfg)
		converged |= done
		active &= ~done
		if t in marks:
			snapshots[t] = cfg.feature_norm.measure(u - v0)
			snapshot_converged[t] = converged.copy()
		if t == cfg.max_steps or not active.any():
			break

		rows = np.flatnonzero(active)
		grad = model.head_input_gradient(u[rows], targets[rows], loss)
		finite = np.all(np.isfinite(grad), axis=1)
		if not finite.all():
			sample = int(rows[~finite][0])
			raise NonFiniteError(f"surrogate gradient is non-finite for sample {sample} at step {t}", sample=sample)
		proposal = u[rows] - step[rows, None] * grad
		if cfg.backtrack:
			worse = loss_values(loss, model.head_forward(proposal), targets[rows]) > objective[rows]
			step[rows[worse]] *= 0.5
			step[rows[~worse]] *= STEP_GROWTH
			proposal[worse] = u[rows[worse]]
		u[rows] = proposal
		steps_used[rows] += 1

	scores = cfg.feature_norm.measure(u - v0)
	for m in marks:
		snapshots.setdefault(m, scores)
		snapshot_converged.setdefault(m, converged.copy())
	if not converged.all():
		log.debug("%d of %d searches stopped at %d steps without converging", int((~converged).sum()), n, cfg.max_steps)
	return SurrogateResult(scores, steps_used, converged, snapshots, snapshot_converged)


def surrogate_score(model: SplitModel, x, y, cfg: SurrogateSearchConfig) -> tuple[float, int, bool]:
	result = surrogate_scores(model, np.asarray(x, dtype=np.float64).reshape(1, -1), y, cfg)
	return float(result.scores[0]), int(result.steps_used[0]), bool(result.converged[0])
