"""fusionbench: a multimodal fusion classification toolkit.

Trains and evaluates an MLP head over concatenated text/image embeddings
with a from-scratch numerical core (backprop, Adam, dropout), curve-based
accuracy metrics, PR/AP analysis, and a three-way modality ablation
harness.  Pretrained encoders stay behind the FUSB feature-file boundary.
"""

from .adam import (AdamState, adam_step, init_adam_state, load_adam_state,
                   save_adam_state)
from .ablation import AblationOutcome, render_markdown, run_ablation
from .feature_store import (Dataset, DatasetSplit, DimensionMismatchError,
                            DuplicateIdError, FeatureFileError, FeatureRecord,
                            FUSED_DIM, IMAGE_DIM, MalformedHeaderError,
                            MODALITIES, StratificationError, TEXT_DIM,
                            TruncatedRecordError, feature_matrix,
                            modality_dim, read_feature_file, select_modality,
                            stratified_split, write_feature_file)
from .metrics import (MetricsReport, baseline_accuracy, max_accuracy,
                      pr_curve_and_ap, smoothed_max_accuracy, write_pr_csv)
from .mlp import (ForwardTrace, Gradients, MlpParams, backward, forward,
                  init_params, load_checkpoint, mse_loss, save_checkpoint)
from .rng import SplitMix64, derive_seed
from .synthetic import SyntheticSpec, generate
from .trainer import (CurveLog, DivergenceError, TrainConfig, TrainResult,
                      evaluate, train)

__version__ = "0.1.0"

__all__ = [
    "AblationOutcome", "AdamState", "CurveLog", "Dataset", "DatasetSplit",
    "DimensionMismatchError", "DivergenceError", "DuplicateIdError",
    "FeatureFileError", "FeatureRecord", "ForwardTrace", "FUSED_DIM",
    "Gradients", "IMAGE_DIM", "MalformedHeaderError", "MetricsReport",
    "MlpParams", "MODALITIES", "SplitMix64", "StratificationError",
    "SyntheticSpec", "TEXT_DIM", "TrainConfig", "TrainResult",
    "TruncatedRecordError", "adam_step", "backward", "baseline_accuracy",
    "derive_seed", "evaluate", "feature_matrix", "forward", "generate",
    "init_adam_state", "init_params", "load_adam_state", "load_checkpoint",
    "max_accuracy", "modality_dim", "mse_loss", "pr_curve_and_ap",
    "read_feature_file", "render_markdown", "run_ablation", "save_adam_state",
    "save_checkpoint", "select_modality", "smoothed_max_accuracy",
    "stratified_split", "train", "write_feature_file", "write_pr_csv",
]
