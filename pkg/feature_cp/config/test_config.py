# Copyright (c) 2026, Mansy and Contributors
# See license.txt

import json
import tempfile
import unittest
from pathlib import Path

from feature_cp.config import DatasetConfig, ExperimentConfig, ModelConfig, apply_overrides, load_config
from feature_cp.exceptions import ValidationError
from feature_cp.feature_cp.band import FeatureNorm


class TestExperimentConfig(unittest.TestCase):
	def test_defaults(self):
		config = ExperimentConfig()
		self.assertEqual(config.alpha, 0.1)
		self.assertEqual(config.seeds, (0, 1, 2, 3, 4))
		self.assertEqual(config.split_ratios, (2.0, 2.0, 1.0))
		self.assertEqual(config.model.hidden, (64, 64, 64))
		self.assertEqual(config.model.split_index, 2)
		self.assertEqual(config.search.feature_norm, FeatureNorm.L2)
		self.assertEqual(config.candidate_steps, (10, 30, 100, 300, 1000))
		self.assertFalse(config.untrained_control)

	def test_dict_round_trip(self):
		config = ExperimentConfig(
			name="ablation",
			method="cqr",
			seeds=(3, 7),
			dataset=DatasetConfig(kind="synthetic_1d_hetero", n=500),
			model=ModelConfig(hidden=(8, 8), split_index=1),
		)
		document = json.loads(json.dumps(config.to_dict()))
		self.assertEqual(ExperimentConfig.from_dict(document), config)

	def test_rejects_bad_values(self):
		with self.assertRaises(ValidationError):
			ExperimentConfig(alpha=1.0)
		with self.assertRaises(ValidationError):
			ExperimentConfig(seeds=())
		with self.assertRaises(ValidationError):
			ExperimentConfig(method="bayes")
		with self.assertRaises(ValidationError):
			ModelConfig(hidden=(8, 8), split_index=3)
		with self.assertRaises(ValidationError):
			DatasetConfig(kind="csv")

	def test_unknown_keys_are_named(self):
		with self.assertRaises(ValidationError) as ctx:
			ExperimentConfig.from_dict({"alpah": 0.2})
		self.assertIn("alpah", str(ctx.exception))
		with self.assertRaises(ValidationError):
			ExperimentConfig.from_dict({"search": {"steps": 3}})

	def test_spec_wraps_hidden_widths(self):
		self.assertEqual(ModelConfig().spec(100, 10).layer_widths, (100, 64, 64, 64, 10))


class TestLoadConfig(unittest.TestCase):
	def write(self, document) -> Path:
		tmp = tempfile.TemporaryDirectory()
		self.addCleanup(tmp.cleanup)
		path = Path(tmp.name) / "experiment.json"
		path.write_text(json.dumps(document), encoding="utf-8")
		return path

	def test_flags_win_over_file(self):
		path = self.write({"alpha": 0.2, "method": "vanilla_cp", "search": {"eta": 0.1}})
		config = load_config(path, alpha=0.05, seeds=[1], dataset="synthetic_1d_hetero", method=None)
		self.assertEqual(config.alpha, 0.05)
		self.assertEqual(config.seeds, (1,))
		self.assertEqual(config.method, "vanilla_cp")
		self.assertEqual(config.dataset.kind, "synthetic_1d_hetero")
		self.assertEqual(config.search.eta, 0.1)

	def test_defaults_without_file(self):
		self.assertEqual(load_config(), ExperimentConfig())

	def test_missing_and_malformed_files(self):
		with self.assertRaises(ValidationError):
			load_config("/nonexistent/experiment.json")
		tmp = tempfile.TemporaryDirectory()
		self.addCleanup(tmp.cleanup)
		path = Path(tmp.name) / "broken.json"
		path.write_text("{alpha: ", encoding="utf-8")
		with self.assertRaises(ValidationError):
			load_config(path)

	def test_split_override(self):
		self.assertEqual(apply_overrides(ExperimentConfig(), split_index=1).model.split_index, 1)
		with self.assertRaises(ValidationError):
			apply_overrides(ExperimentConfig(), colour="red")
