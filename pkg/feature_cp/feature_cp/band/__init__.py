# Copyright (c) 2026, Mansy and contributors
# For license information, please see license.txt

from feature_cp.feature_cp.band.ball import FeatureBand, FeatureNorm
from feature_cp.feature_cp.band.ibp import (
	Box,
	ball_to_box,
	forward_bounds,
	ibp_propagate,
	inner_extremes,
	sample_inner_box,
	tightness_ratio,
)
