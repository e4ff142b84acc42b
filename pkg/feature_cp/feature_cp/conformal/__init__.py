# Copyright (c) 2026, Mansy and contributors
# For license information, please see license.txt

from feature_cp.feature_cp.conformal.cqr import cqr_band, cqr_bands, cqr_calibrate, cqr_scores
from feature_cp.feature_cp.conformal.quantile import conformal_quantile, conformal_rank, empirical_quantile
from feature_cp.feature_cp.conformal.records import (
	MEMBERSHIP_ATOL,
	CalibrationRecord,
	OutputBand,
	ScoreKind,
	UnboundedBand,
	bands_from_arrays,
	clamp_crossed,
	config_digest,
)
from feature_cp.feature_cp.conformal.split_cp import (
	output_linf_scores,
	vanilla_cp_band,
	vanilla_cp_bands,
	vanilla_cp_calibrate,
)
