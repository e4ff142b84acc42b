# Copyright (c) 2026, Mansy and contributors
# For license information, please see license.txt

from feature_cp.feature_cp.data.datasets import (
	Dataset,
	gen_synthetic_1d_hetero,
	gen_synthetic_classification,
	gen_synthetic_multidim,
	gen_zero_quantile,
	load_csv,
	write_csv,
)
from feature_cp.feature_cp.data.splits import SplitIndices, StandardizerState, split, standardize
