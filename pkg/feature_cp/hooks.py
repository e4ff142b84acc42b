# Copyright (c) 2026, Mansy and contributors
# For license information, please see license.txt

app_name = "feature_cp"
app_title = "Feature CP"
app_publisher = "Mansy"
app_description = "Feature-space conformal prediction"
app_email = "ahmedmansy265@gmail.com"
app_license = "mit"

# Methods
# ------------------
# Each conformal method is a class exposing fit / calibrate / evaluate,
# resolved by name from the experiment config.

method_hooks = {
	"vanilla_cp": "feature_cp.feature_cp.workers.methods.VanillaCP",
	"feature_cp": "feature_cp.feature_cp.workers.methods.FeatureCP",
	"cqr": "feature_cp.feature_cp.workers.methods.CQR",
	"feature_cqr": "feature_cp.feature_cp.workers.methods.FeatureCQR",
	"feature_cp_classify": "feature_cp.feature_cp.workers.methods.FeatureCPClassify",
}

# Datasets
# ------------------
# Generators take (seed, n) and return a Dataset, or (Dataset, oracle model)
# for zero_quantile. csv is handled by the runner (needs path + targets).

dataset_hooks = {
	"synthetic_multidim": "feature_cp.feature_cp.data.datasets.gen_synthetic_multidim",
	"synthetic_1d_hetero": "feature_cp.feature_cp.data.datasets.gen_synthetic_1d_hetero",
	"synthetic_classification": "feature_cp.feature_cp.data.datasets.gen_synthetic_classification",
	"zero_quantile": "feature_cp.feature_cp.data.datasets.gen_zero_quantile",
}

# Output
# ------------------

summary_columns = [
	"method",
	"dataset",
	"seed",
	"alpha",
	"coverage",
	"band_coverage",
	"avg_length",
	"weighted_length",
	"group_coverage",
	"feature_spread",
	"output_spread",
	"chosen_M",
	"tightness_ratio",
]
