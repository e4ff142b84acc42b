# Copyright (c) 2026, Mansy and contributors
# For license information, please see license.txt

from pathlib import Path

import numpy as np

from feature_cp.exceptions import ValidationError
from feature_cp.feature_cp.nn.mlp import MlpParams, MlpSpec, SplitModel

FORMAT_VERSION = 1


def save_model(model: SplitModel, path: str | Path) -> Path:
	"""Write ``model`` as an uncompressed .npz; arrays are stored row-major and bit-exact."""
	path = Path(path)
	path.parent.mkdir(parents=True, exist_ok=True)
	arrays = {
		"format_version": np.array(FORMAT_VERSION, dtype=np.int64),
		"layer_widths": np.array(model.spec.layer_widths, dtype=np.int64),
		"hidden_activation": np.array(model.spec.hidden_activation.value),
		"output_activation": np.array(model.spec.output_activation.value),
		"split_index": np.array(model.split_index, dtype=np.int64),
	}
	for i, (w, b) in enumerate(zip(model.params.weights, model.params.biases)):
		arrays[f"W{i}"] = np.ascontiguousarray(w)
		arrays[f"b{i}"] = np.ascontiguousarray(b)
	with path.open("wb") as fh:
		np.savez(fh, **arrays)
	return path


def load_model(path: str | Path) -> SplitModel:
	with np.load(Path(path), allow_pickle=False) as data:
		version = int(data["format_version"])
		if version != FORMAT_VERSION:
			raise ValidationError(f"unsupported model format version {version}")
		spec = MlpSpec(
			tuple(int(w) for w in data["layer_widths"]),
			str(data["hidden_activation"]),
			str(data["output_activation"]),
		)
		params = MlpParams(
			tuple(data[f"W{i}"].copy() for i in range(spec.n_layers)),
			tuple(data[f"b{i}"].copy() for i in range(spec.n_layers)),
		)
		return SplitModel(spec, params, int(data["split_index"]))
