# Copyright (c) 2026, Mansy and contributors
# For license information, please see license.txt

from feature_cp.feature_cp.nn.losses import LossKind, LossName
from feature_cp.feature_cp.nn.mlp import Activation, MlpParams, MlpSpec, SplitModel, init_params, mlp_forward
from feature_cp.feature_cp.nn.serialize import load_model, save_model
from feature_cp.feature_cp.nn.train import TrainConfig, initial_params, train, train_params
