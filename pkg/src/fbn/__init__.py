"""Functional brain network identification from wide-field calcium imaging
matrices: seed-based correlation, spatial FastICA, and an LSTM autoencoder
with OLS regression, plus the synthetic-data oracle and evaluation battery.
"""

from .core import (
    AtlasFrame,
    BrainMask,
    DataMatrix,
    FcMatrix,
    LatentEmbedding,
    SpatialMap,
    fisher_z,
    fisher_z_inv,
    group_average_fc,
    pearson,
    zscore,
    zscore_map,
)
from .decompose import (
    NetworkAssignment,
    fnc_matrix,
    lstm_aer_pipeline,
    ols_regress,
    ols_solve,
    template_match,
)
from .ica import FastIca, IcaResult, WhitenModel, fastica, ica_timecourses, whiten
from .lstm import (
    LstmAeModel,
    LstmAutoencoder,
    LstmLayerParams,
    OptimizerState,
    TrainReport,
    adam_step,
    backward,
    encode,
    forward,
    init_model,
    lstm_cell,
    mse_loss,
    train,
)
from .sbc import SeedSpec, TemplateSet, build_templates, fc_matrix, seed_map, seed_trace
from .synth import GroundTruth, SynthSpec, generate, ground_truth_match
from .validation import DegenerateInputError

__version__ = "0.1.0"

__all__ = [
    "AtlasFrame", "BrainMask", "DataMatrix", "FcMatrix", "LatentEmbedding",
    "SpatialMap", "fisher_z", "fisher_z_inv", "group_average_fc", "pearson",
    "zscore", "zscore_map",
    "NetworkAssignment", "fnc_matrix", "lstm_aer_pipeline", "ols_regress",
    "ols_solve", "template_match",
    "FastIca", "IcaResult", "WhitenModel", "fastica", "ica_timecourses", "whiten",
    "LstmAeModel", "LstmAutoencoder", "LstmLayerParams", "OptimizerState",
    "TrainReport", "adam_step", "backward", "encode", "forward", "init_model",
    "lstm_cell", "mse_loss", "train",
    "SeedSpec", "TemplateSet", "build_templates", "fc_matrix", "seed_map",
    "seed_trace",
    "GroundTruth", "SynthSpec", "generate", "ground_truth_match",
    "DegenerateInputError",
]
