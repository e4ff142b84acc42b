# Copyright (c) 2026, Mansy and contributors
# For license information, please see license.txt

"""
Experiment configuration.

A run is described by one JSON document mirroring ExperimentConfig field for
field; nested sections (dataset, model, train, search) mirror their own
dataclasses. Command-line flags are applied on top through ``load_config``.
"""

import json
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from feature_cp import hooks
from feature_cp.exceptions import ValidationError
from feature_cp.feature_cp.data.splits import DEFAULT_RATIOS
from feature_cp.feature_cp.fcp.calibrate import DEFAULT_CANDIDATE_STEPS
from feature_cp.feature_cp.fcp.surrogate import SurrogateSearchConfig
from feature_cp.feature_cp.nn.mlp import MlpSpec
from feature_cp.feature_cp.nn.train import TrainConfig

CSV_DATASET = "csv"


def _known(cls, data: dict, section: str) -> dict:
	if not isinstance(data, dict):
		raise ValidationError(f"{section} must be a JSON object, got {type(data).__name__}")
	unknown = set(data) - {f.name for f in fields(cls)}
	if unknown:
		raise ValidationError(f"unknown {section} keys: {', '.join(sorted(unknown))}")
	return data


@dataclass(frozen=True)
class DatasetConfig:
	kind: str = "synthetic_multidim"
	n: int = 10000
	data_seed: int = 0
	path: str | None = None
	targets: tuple[str, ...] = ()
	zero_fraction: float = 0.901

	def __post_init__(self):
		object.__setattr__(self, "targets", tuple(self.targets))
		if self.kind != CSV_DATASET and self.kind not in hooks.dataset_hooks:
			known = ", ".join(sorted([*hooks.dataset_hooks, CSV_DATASET]))
			raise ValidationError(f"unknown dataset {self.kind!r} (known: {known})")
		if self.kind == CSV_DATASET and not (self.path and self.targets):
			raise ValidationError("a csv dataset needs a path and at least one target column")
		if self.n < 3:
			raise ValidationError(f"n must be >= 3, got {self.n}")

	@classmethod
	def from_dict(cls, data: dict) -> "DatasetConfig":
		return cls(**_known(cls, data, "dataset"))

	def to_dict(self) -> dict:
		return {
			"kind": self.kind,
			"n": self.n,
			"data_seed": self.data_seed,
			"path": self.path,
			"targets": list(self.targets),
			"zero_fraction": self.zero_fraction,
		}


@dataclass(frozen=True)
class ModelConfig:
	"""Hidden widths of the MLP and the layer after which the feature space sits."""

	hidden: tuple[int, ...] = (64, 64, 64)
	split_index: int = 2

	def __post_init__(self):
		object.__setattr__(self, "hidden", tuple(int(w) for w in self.hidden))
		if any(w < 1 for w in self.hidden):
			raise ValidationError(f"hidden widths must be positive, got {list(self.hidden)}")
		if not 1 <= self.split_index <= len(self.hidden):
			raise ValidationError(f"split_index must lie in [1, {len(self.hidden)}], got {self.split_index}")

	def spec(self, input_width: int, output_width: int) -> MlpSpec:
		return MlpSpec((input_width, *self.hidden, output_width))

	def with_split(self, split_index: int) -> "ModelConfig":
		return replace(self, split_index=int(split_index))

	@classmethod
	def from_dict(cls, data: dict) -> "ModelConfig":
		return cls(**_known(cls, data, "model"))

	def to_dict(self) -> dict:
		return {"hidden": list(self.hidden), "split_index": self.split_index}


@dataclass(frozen=True)
class ExperimentConfig:
	name: str = "default"
	method: str = "feature_cp"
	alpha: float = 0.1
	seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
	dataset: DatasetConfig = field(default_factory=DatasetConfig)
	model: ModelConfig = field(default_factory=ModelConfig)
	train: TrainConfig = field(default_factory=TrainConfig)
	search: SurrogateSearchConfig = field(default_factory=SurrogateSearchConfig)
	candidate_steps: tuple[int, ...] = DEFAULT_CANDIDATE_STEPS
	split_ratios: tuple[float, ...] = DEFAULT_RATIOS
	untrained_control: bool = False
	standardize: bool = True
	cubic_level: float | None = None
	out: str = "runs"

	def __post_init__(self):
		object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
		object.__setattr__(self, "candidate_steps", tuple(int(m) for m in self.candidate_steps))
		object.__setattr__(self, "split_ratios", tuple(float(r) for r in self.split_ratios))
		if self.method not in hooks.method_hooks:
			raise ValidationError(f"unknown method {self.method!r} (known: {', '.join(sorted(hooks.method_hooks))})")
		if not 0.0 < self.alpha < 1.0:
			raise ValidationError(f"alpha must lie in (0, 1), got {self.alpha}")
		if not self.seeds:
			raise ValidationError("at least one seed is required")
		if any(s < 0 for s in self.seeds):
			raise ValidationError(f"seeds must be unsigned, got {list(self.seeds)}")
		if len(set(self.seeds)) != len(self.seeds):
			raise ValidationError(f"seeds must be distinct, got {list(self.seeds)}")
		if self.cubic_level is not None and not 0.0 < self.cubic_level <= 1.0:
			raise ValidationError(f"cubic_level must lie in (0, 1], got {self.cubic_level}")
		if not self.name or "/" in self.name:
			raise ValidationError(f"run name must be a non-empty path segment, got {self.name!r}")

	@property
	def run_dir(self) -> Path:
		return Path(self.out) / self.name

	@classmethod
	def from_dict(cls, data: dict) -> "ExperimentConfig":
		data = dict(_known(cls, data, "experiment"))
		sections = {
			"dataset": DatasetConfig,
			"model": ModelConfig,
			"train": TrainConfig,
			"search": SurrogateSearchConfig,
		}
		for key, section in sections.items():
			if key in data and not isinstance(data[key], section):
				data[key] = section.from_dict(_known(section, data[key], key))
		return cls(**data)

	def to_dict(self) -> dict:
		return {
			"name": self.name,
			"method": self.method,
			"alpha": self.alpha,
			"seeds": list(self.seeds),
			"dataset": self.dataset.to_dict(),
			"model": self.model.to_dict(),
			"train": self.train.to_dict(),
			"search": self.search.to_dict(),
			"candidate_steps": list(self.candidate_steps),
			"split_ratios": list(self.split_ratios),
			"untrained_control": self.untrained_control,
			"standardize": self.standardize,
			"cubic_level": self.cubic_level,
			"out": self.out,
		}


def apply_overrides(config: ExperimentConfig, **overrides) -> ExperimentConfig:
	"""Return ``config`` with every non-None override applied.

	``dataset`` may be given as a bare dataset kind.
	"""
	data = config.to_dict()
	for key, value in overrides.items():
		if value is None:
			continue
		if key == "dataset" and isinstance(value, str):
			data["dataset"] = {**data["dataset"], "kind": value}
		elif key == "split_index":
			data["model"] = {**data["model"], "split_index": value}
		elif key in data:
			data[key] = list(value) if isinstance(value, tuple) else value
		else:
			raise ValidationError(f"unknown override {key!r}")
	return ExperimentConfig.from_dict(data)


def load_config(path: str | Path | None = None, **overrides) -> ExperimentConfig:
	"""Read a JSON experiment document (or start from defaults) and apply flag overrides."""
	if path is None:
		config = ExperimentConfig()
	else:
		path = Path(path)
		if not path.is_file():
			raise ValidationError(f"config file not found: {path}")
		try:
			document = json.loads(path.read_text(encoding="utf-8"))
		except json.JSONDecodeError as e:
			raise ValidationError(f"{path} is not valid JSON: {e}")
		config = ExperimentConfig.from_dict(document)
	return apply_overrides(config, **overrides)
