# Copyright (c) 2026, Mansy and contributors
# For license information, please see license.txt

from feature_cp.feature_cp.metrics.cubic import (
	CubicReport,
	cubic_diagnostics,
	feature_spread,
	output_spread,
	own_radius_widths,
)
from feature_cp.feature_cp.metrics.evaluate import (
	EvalReport,
	aggregate,
	avg_length,
	band_lengths,
	coverage,
	evaluate_bands,
	evaluate_label_sets,
	group_coverage,
	weighted_length,
	weighted_lengths,
)
