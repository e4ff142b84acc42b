# Copyright (c) 2026, Mansy and contributors
# For license information, please see license.txt

"""
End-to-end experiment runner.

For every seed: split, standardize, fit, calibrate, evaluate and run the
diagnostics, then write ``<out>/<name>/<seed>/result.json`` and one
``summary.csv`` for the run. Output files contain no timestamps, so a run is a
pure function of its ExperimentConfig.
"""

import json
from contextlib import contextmanager
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import pandas as pd

from feature_cp import hooks
from feature_cp.config import CSV_DATASET, ExperimentConfig
from feature_cp.exceptions import FeatureCPError, StageError, ValidationError
from feature_cp.feature_cp.data import Dataset, SplitIndices, load_csv, split, standardize, write_csv
from feature_cp.feature_cp.fcp import MSelectionReport
from feature_cp.feature_cp.metrics import CubicReport, EvalReport, aggregate
from feature_cp.feature_cp.nn import SplitModel
from feature_cp.feature_cp.workers.methods import ConformalMethod
from feature_cp.logger import log_error, logger
from feature_cp.utils import resolve_hook

log = logger("workers.experiment")

AGGREGATE_KEYS = (
	"coverage",
	"band_coverage",
	"avg_length",
	"weighted_length",
	"group_coverage",
	"feature_spread",
	"output_spread",
)


@contextmanager
def stage(name: str, seed: int | None = None):
	"""Tag any failure inside the block with the stage name and seed."""
	try:
		yield
	except StageError:
		raise
	except (FeatureCPError, ValueError, ArithmeticError, OSError) as e:
		log_error(str(e), title=f"{name} failed" if seed is None else f"{name} failed for seed {seed}")
		raise StageError(name, seed, e) from e


@dataclass
class SeedResult:
	seed: int
	alpha: float
	evaluation: EvalReport
	calibration: dict
	split_sizes: dict
	cubic: CubicReport | None = None
	selection: MSelectionReport | None = None
	tightness_ratio: float | None = None

	@property
	def coverage_gap(self) -> float:
		return self.evaluation.coverage - (1.0 - self.alpha)

	def row(self, method: str, dataset: str) -> dict:
		values = {
			"method": method,
			"dataset": dataset,
			"seed": self.seed,
			"alpha": self.alpha,
			"coverage": self.evaluation.coverage,
			"band_coverage": self.evaluation.band_coverage,
			"avg_length": self.evaluation.avg_length,
			"weighted_length": self.evaluation.weighted_length,
			"group_coverage": self.evaluation.group_coverage,
			"feature_spread": self.cubic.feature_spread if self.cubic else None,
			"output_spread": self.cubic.output_spread if self.cubic else None,
			"chosen_M": self.selection.chosen_M if self.selection else None,
			"tightness_ratio": self.tightness_ratio,
		}
		return {column: values[column] for column in hooks.summary_columns}

	def to_dict(self) -> dict:
		return {
			"seed": self.seed,
			"alpha": self.alpha,
			"coverage_gap": self.coverage_gap,
			"split_sizes": self.split_sizes,
			"evaluation": self.evaluation.to_dict(),
			"cubic": self.cubic.to_dict() if self.cubic else None,
			"m_selection": self.selection.to_dict() if self.selection else None,
			"tightness_ratio": self.tightness_ratio,
			"calibration": self.calibration,
		}


@dataclass
class RunResult:
	config: ExperimentConfig
	seeds: list[SeedResult] = field(default_factory=list)

	@property
	def rows(self) -> list[dict]:
		return [s.row(self.config.method, self.config.dataset.kind) for s in self.seeds]

	@property
	def aggregate(self) -> dict[str, dict[str, float]]:
		return aggregate(self.rows, AGGREGATE_KEYS)

	def to_dict(self) -> dict:
		return {
			"config": self.config.to_dict(),
			"aggregate": self.aggregate,
			"seeds": [s.to_dict() for s in self.seeds],
		}


def load_dataset(config: ExperimentConfig) -> tuple[Dataset, SplitModel | None]:
	"""The configured dataset plus, for the zero-quantile task, its oracle model."""
	dc = config.dataset
	if dc.kind == CSV_DATASET:
		return load_csv(dc.path, list(dc.targets)), None
	generator = resolve_hook("dataset_hooks", dc.kind)
	if dc.kind == "zero_quantile":
		return generator(dc.data_seed, dc.n, dc.zero_fraction)
	return generator(dc.data_seed, dc.n), None


def method_for(config: ExperimentConfig) -> ConformalMethod:
	return resolve_hook("method_hooks", config.method)(config)


def prepare(
	config: ExperimentConfig, method: ConformalMethod, ds: Dataset, seed: int, oracle: SplitModel | None = None
) -> tuple[Dataset, SplitIndices]:
	"""Split for ``seed`` and standardize on the train fold; the oracle task stays in raw units."""
	indices = split(ds.n, config.split_ratios, seed)
	if not config.standardize or oracle is not None:
		return ds, indices
	work, _ = standardize(ds, indices.train, standardize_y=method.standardize_targets)
	return work, indices


def run_seed(
	config: ExperimentConfig, ds: Dataset, seed: int, alphas, oracle: SplitModel | None = None
) -> list[SeedResult]:
	"""Fit once for ``seed`` and calibrate/evaluate at every level in ``alphas``."""
	method = method_for(config)
	with stage("split", seed):
		work, indices = prepare(config, method, ds, seed, oracle)
	with stage("train", seed):
		method.fit(work, indices.train, seed, oracle)

	sizes = {"train": len(indices.train), "cal": len(indices.cal), "test": len(indices.test)}
	results = []
	for alpha in alphas:
		with stage("calibrate", seed):
			method.calibrate(work, indices.cal, alpha)
		with stage("evaluate", seed):
			evaluation = method.evaluate(work, indices.test, raw_Y=ds.Y[indices.test], seed=seed)
		with stage("diagnostics", seed):
			cubic = method.diagnostics(work, indices.cal, alpha)
			tightness = method.tightness(work.X[indices.test], seed)
		result = SeedResult(
			seed=seed,
			alpha=alpha,
			evaluation=evaluation,
			calibration=method.calibration_document(),
			split_sizes=sizes,
			cubic=cubic,
			selection=method.selection,
			tightness_ratio=tightness,
		)
		log.info(
			"%s on %s seed %d alpha %.3f: coverage %.4f, length %.4f",
			config.method,
			config.dataset.kind,
			seed,
			alpha,
			evaluation.coverage,
			evaluation.avg_length,
		)
		results.append(result)
	return results


def _check_alphas(alphas) -> list[float]:
	alphas = [float(a) for a in alphas]
	if not alphas:
		raise ValidationError("at least one alpha is required")
	bad = [a for a in alphas if not 0.0 < a < 1.0]
	if bad:
		raise ValidationError(f"alpha must lie in (0, 1), got {bad}")
	return alphas


def _run(config: ExperimentConfig, alphas) -> list[RunResult]:
	with stage("data"):
		ds, oracle = load_dataset(config)
	runs = [RunResult(replace(config, alpha=alpha)) for alpha in alphas]
	for seed in config.seeds:
		for run, result in zip(runs, run_seed(config, ds, seed, alphas, oracle)):
			run.seeds.append(result)
	return runs


def _dump(document: dict, path: Path) -> Path:
	path.parent.mkdir(parents=True, exist_ok=True)
	path.write_text(json.dumps(document, indent=1, sort_keys=True, allow_nan=False, default=_jsonable) + "\n")
	return path


def _jsonable(value):
	if isinstance(value, np.generic):
		return value.item()
	raise TypeError(f"{type(value).__name__} is not JSON serializable")


def _clean(value):
	"""NaN and infinities are not JSON; write them as null and "inf"."""
	if isinstance(value, dict):
		return {k: _clean(v) for k, v in value.items()}
	if isinstance(value, list | tuple):
		return [_clean(v) for v in value]
	if isinstance(value, float) and not np.isfinite(value):
		return None if np.isnan(value) else ("inf" if value > 0 else "-inf")
	return value


def write_run(result: RunResult, run_dir: str | Path) -> Path:
	"""Write per-seed result.json files and the run's summary.csv; returns the csv path."""
	run_dir = Path(run_dir)
	with stage("write"):
		for seed_result in result.seeds:
			document = {"config": result.config.to_dict(), **seed_result.to_dict()}
			_dump(_clean(document), run_dir / str(seed_result.seed) / "result.json")
		_dump(_clean(result.aggregate), run_dir / "aggregate.json")
		return write_summary(result.rows, run_dir / "summary.csv")


def write_summary(rows: list[dict], path: str | Path) -> Path:
	path = Path(path)
	path.parent.mkdir(parents=True, exist_ok=True)
	extra = [key for key in (rows[0] if rows else {}) if key not in hooks.summary_columns]
	pd.DataFrame(rows, columns=[*hooks.summary_columns, *extra]).to_csv(path, index=False)
	return path


def run_experiment(config: ExperimentConfig) -> RunResult:
	(result,) = _run(config, [config.alpha])
	write_run(result, config.run_dir)
	return result


def sweep_alpha(config: ExperimentConfig, alphas) -> list[RunResult]:
	"""One trained model per seed, recalibrated at every level in ``alphas``."""
	alphas = _check_alphas(alphas)
	results = _run(config, alphas)
	for result in results:
		write_run(result, config.run_dir / f"alpha-{result.config.alpha:g}")
	write_summary([row for result in results for row in result.rows], config.run_dir / "summary.csv")
	return results


def sweep_split_index(config: ExperimentConfig, indices) -> list[RunResult]:
	"""One full run per feature split point."""
	with stage("config"):
		configs = [replace(config, model=config.model.with_split(k)) for k in indices]
	if not configs:
		raise ValidationError("at least one split index is required")
	results = []
	for cfg in configs:
		(result,) = _run(cfg, [cfg.alpha])
		write_run(result, config.run_dir / f"split-{cfg.model.split_index}")
		results.append(result)
	rows = [{**row, "split_index": r.config.model.split_index} for r in results for row in r.rows]
	write_summary(rows, config.run_dir / "summary.csv")
	return results


# Single stages
# ------------------
# Each stage re-derives the dataset and split from the config and persists
# its output under <out>/<name>/<seed>/ for the next stage to pick up.


def seed_dir(config: ExperimentConfig, seed: int) -> Path:
	return config.run_dir / str(seed)


def gen_data(config: ExperimentConfig, path: str | Path) -> Path:
	with stage("data"):
		ds, _ = load_dataset(config)
		return write_csv(ds, path)


def _staged(
	config: ExperimentConfig, seed: int
) -> tuple[ConformalMethod, Dataset, Dataset, SplitIndices, SplitModel | None]:
	with stage("data", seed):
		ds, oracle = load_dataset(config)
	method = method_for(config)
	with stage("split", seed):
		work, indices = prepare(config, method, ds, seed, oracle)
	return method, ds, work, indices, oracle


def _read_json(path: Path) -> dict:
	if not path.is_file():
		raise ValidationError(f"{path} does not exist; run the previous stage first")
	return json.loads(path.read_text())


def train_stage(config: ExperimentConfig, seed: int) -> list[Path]:
	method, _, work, indices, oracle = _staged(config, seed)
	with stage("train", seed):
		method.fit(work, indices.train, seed, oracle)
		return method.save_models(seed_dir(config, seed))


def calibrate_stage(config: ExperimentConfig, seed: int) -> Path:
	method, _, work, indices, _ = _staged(config, seed)
	with stage("calibrate", seed):
		method.load_models(seed_dir(config, seed))
		method.calibrate(work, indices.cal, config.alpha)
		return _dump(_clean(method.calibration_document()), seed_dir(config, seed) / "calibration.json")


def _calibrated(config: ExperimentConfig, seed: int, name: str):
	method, ds, work, indices, _ = _staged(config, seed)
	with stage(name, seed):
		method.load_models(seed_dir(config, seed))
		method.load_calibration(_read_json(seed_dir(config, seed) / "calibration.json"))
	return method, ds, work, indices


def evaluate_stage(config: ExperimentConfig, seed: int) -> EvalReport:
	method, ds, work, indices = _calibrated(config, seed, "evaluate")
	with stage("evaluate", seed):
		report = method.evaluate(work, indices.test, raw_Y=ds.Y[indices.test], seed=seed)
		_dump(_clean(report.to_dict()), seed_dir(config, seed) / "evaluation.json")
	return report


def diagnostics_stage(config: ExperimentConfig, seed: int) -> dict:
	method, _, work, indices = _calibrated(config, seed, "diagnostics")
	with stage("diagnostics", seed):
		cubic = method.diagnostics(work, indices.cal, config.alpha)
		document = {
			"cubic": cubic.to_dict() if cubic else None,
			"tightness_ratio": method.tightness(work.X[indices.test], seed),
		}
		_dump(_clean(document), seed_dir(config, seed) / "diagnostics.json")
	return document
