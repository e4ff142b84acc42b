# Copyright (c) 2026, Mansy and contributors
# For license information, please see license.txt

from contextlib import contextmanager
from functools import wraps

import click

from feature_cp import hooks
from feature_cp.config import CSV_DATASET, ExperimentConfig, load_config
from feature_cp.exceptions import FeatureCPError, StageError
from feature_cp.feature_cp.workers import experiment


def _numbers(kind):
	def parse(ctx, param, value):
		if value is None:
			return None
		try:
			return tuple(kind(v) for v in value.split(",") if v.strip())
		except ValueError:
			raise click.BadParameter(f"expected a comma-separated list, got {value!r}")

	return parse


@contextmanager
def reported(default_stage: str = "config"):
	"""Print ``[<stage>] <message>`` to stderr and exit 1 on any feature_cp error."""
	try:
		yield
	except StageError as e:
		where = "" if e.seed is None else f"seed {e.seed}: "
		click.echo(f"[{e.stage}] {where}{e.cause}", err=True)
		raise click.exceptions.Exit(1)
	except FeatureCPError as e:
		click.echo(f"[{default_stage}] {e}", err=True)
		raise click.exceptions.Exit(1)


def experiment_options(command):
	options = [
		click.option("--config", "config_path", type=click.Path(dir_okay=False), help="JSON experiment document."),
		click.option("--name", help="Run name; outputs go to <out>/<name>."),
		click.option("--alpha", type=float),
		click.option("--seeds", callback=_numbers(int), help="Comma-separated seeds, e.g. 0,1,2."),
		click.option("--method", type=click.Choice(sorted(hooks.method_hooks))),
		click.option("--dataset", type=click.Choice(sorted([*hooks.dataset_hooks, CSV_DATASET]))),
		click.option("--out", type=click.Path(file_okay=False)),
		click.option("--untrained-control", is_flag=True, default=None, help="Skip training; keep the seeded init."),
	]

	@wraps(command)
	def wrapper(config_path, **kwargs):
		overrides = {key: kwargs.pop(key) for key in ("name", "alpha", "seeds", "method", "dataset", "out", "untrained_control")}
		overrides["cubic_level"] = kwargs.pop("level", None)
		with reported("config"):
			config = load_config(config_path, **overrides)
		with reported():
			return command(config, **kwargs)

	for option in reversed(options):
		wrapper = option(wrapper)
	return wrapper


def _echo_report(config: ExperimentConfig, result) -> None:
	for key, stats in result.aggregate.items():
		click.echo(f"{config.method} alpha={result.config.alpha:g} {key}: {stats['mean']:.4f} ± {stats['std']:.4f}")


@click.command("gen-data")
@click.argument("path", type=click.Path(dir_okay=False))
@experiment_options
def gen_data(config: ExperimentConfig, path):
	"""Write the configured dataset to PATH as CSV."""
	click.echo(experiment.gen_data(config, path))


@click.command("train")
@experiment_options
def train(config: ExperimentConfig):
	"""Fit the base model(s) for every seed."""
	for seed in config.seeds:
		for path in experiment.train_stage(config, seed):
			click.echo(path)


@click.command("calibrate")
@experiment_options
def calibrate(config: ExperimentConfig):
	for seed in config.seeds:
		click.echo(experiment.calibrate_stage(config, seed))


@click.command("evaluate")
@experiment_options
def evaluate(config: ExperimentConfig):
	for seed in config.seeds:
		report = experiment.evaluate_stage(config, seed)
		click.echo(f"seed {seed}: coverage {report.coverage:.4f} length {report.avg_length:.4f}")


@click.command("diagnostics")
@click.option("--level", type=float, help="Quantile level for the spread diagnostics (default 1 - alpha).")
@experiment_options
def diagnostics(config: ExperimentConfig):
	for seed in config.seeds:
		document = experiment.diagnostics_stage(config, seed)
		cubic = document["cubic"]
		if cubic:
			click.echo(f"seed {seed}: feature spread {cubic['feature_spread']:.4f} output spread {cubic['output_spread']:.4f}")
		else:
			click.echo(f"seed {seed}: no spread diagnostics for {config.method}")


@click.command("experiment")
@experiment_options
def run(config: ExperimentConfig):
	"""Run every stage for every seed and write result.json files plus summary.csv."""
	_echo_report(config, experiment.run_experiment(config))


@click.command("sweep-alpha")
@click.option("--alphas", callback=_numbers(float), default="0.05,0.1,0.2", show_default=True)
@experiment_options
def sweep_alpha(config: ExperimentConfig, alphas):
	for result in experiment.sweep_alpha(config, alphas):
		_echo_report(config, result)


@click.command("sweep-split")
@click.option("--indices", callback=_numbers(int), required=True, help="Comma-separated split points.")
@experiment_options
def sweep_split(config: ExperimentConfig, indices):
	for result in experiment.sweep_split_index(config, indices):
		click.echo(f"split {result.config.model.split_index}:")
		_echo_report(config, result)


commands = [gen_data, train, calibrate, evaluate, diagnostics, run, sweep_alpha, sweep_split]


@click.group()
def cli():
	"""Feature-space conformal prediction experiments."""


for command in commands:
	cli.add_command(command)
