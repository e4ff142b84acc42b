# Copyright (c) 2026, Mansy and contributors
# For license information, please see license.txt

from feature_cp.feature_cp.fcp.calibrate import (
	DEFAULT_CANDIDATE_STEPS,
	MSelectionReport,
	fcp_calibrate,
	fcp_calibrate_classifier,
	fcp_detect,
	fcp_detect_batch,
	fcp_estimate,
	fcp_estimate_bands,
	fcp_feature_band,
	record_search_config,
	select_steps,
)
from feature_cp.feature_cp.fcp.classify import fcp_classify_set, fcp_classify_sets
from feature_cp.feature_cp.fcp.fcqr import (
	combine_endpoints,
	fcqr_band,
	fcqr_bands,
	fcqr_calibrate,
	fcqr_detect,
	fcqr_detect_batch,
	fcqr_indicators,
	fcqr_score_config,
	fcqr_scores,
	fcqr_search_config,
)
from feature_cp.feature_cp.fcp.surrogate import (
	SurrogateResult,
	SurrogateSearchConfig,
	censor,
	surrogate_score,
	surrogate_scores,
	tolerance_slack,
)
