# Copyright (c) 2026, Mansy and contributors
# For license information, please see license.txt


class FeatureCPError(Exception):
	"""Base class for every error raised by feature_cp."""


class ValidationError(FeatureCPError, ValueError):
	pass


class DimensionMismatchError(ValidationError):
	def __init__(self, what: str, expected: int, got: int):
		super().__init__(f"{what}: expected dimension {expected}, got {got}")
		self.expected = expected
		self.got = got


class NonFiniteError(FeatureCPError, ArithmeticError):
	"""A loss or gradient stopped being finite.

	``epoch`` is set by the trainer, ``sample`` by the surrogate search.
	"""

	def __init__(self, message: str, epoch: int | None = None, sample: int | None = None):
		super().__init__(message)
		self.epoch = epoch
		self.sample = sample


class DataError(FeatureCPError):
	def __init__(self, message: str, row: int | None = None, column: str | None = None):
		if row is not None or column is not None:
			message = f"{message} (row {row}, column {column!r})"
		super().__init__(message)
		self.row = row
		self.column = column


class ConfigDigestMismatch(FeatureCPError):
	"""Detection was asked to score with a procedure other than the calibrated one."""

	def __init__(self, expected: str, got: str):
		super().__init__(f"score config digest mismatch: calibrated with {expected[:12]}, got {got[:12]}")
		self.expected = expected
		self.got = got


class StageError(FeatureCPError):
	def __init__(self, stage: str, seed: int | None, cause: BaseException):
		where = stage if seed is None else f"{stage} (seed {seed})"
		super().__init__(f"{where}: {cause}")
		self.stage = stage
		self.seed = seed
		self.cause = cause
