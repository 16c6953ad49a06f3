"""Length-gated hierarchical classification for multichannel time-series
trials.

A shared convolutional trunk feeds a length gate and two word branches;
the gate's confidence in the true length group scales each branch's
loss, so branch training follows the gate's routing quality. Includes a
flat single-classifier baseline on the same trunk, synthetic data
generation, cross-validated training, and file formats for datasets and
checkpoints.
"""

__version__ = "0.1.0"

from .data import (EEGTrial, HyperLabel, SynthSpec, TrialSet, VOCABULARY,
                   WordLabel, hyper_label, load_dataset, save_dataset,
                   synthesize_dataset)
from .errors import (ConfigurationError, DimensionError, FormatError,
                     UsageError)
from .evaluate import ConfusionMatrix, emit_report, summarize_folds
from .model import (HierarchicalModel, ModelConfig, build_model,
                    compute_shapes, load_checkpoint, predict, predict_flat,
                    save_checkpoint)
from .training import (TrainConfig, compute_loss, crop_trial, derive_seed,
                       evaluate_trials, kfold_split, loss_only,
                       run_cross_validation, train_epoch)

__all__ = [
    "__version__",
    "ConfigurationError", "DimensionError", "FormatError", "UsageError",
    "EEGTrial", "HyperLabel", "SynthSpec", "TrialSet", "VOCABULARY",
    "WordLabel", "hyper_label", "load_dataset", "save_dataset",
    "synthesize_dataset",
    "ConfusionMatrix", "emit_report", "summarize_folds",
    "HierarchicalModel", "ModelConfig", "build_model", "compute_shapes",
    "load_checkpoint", "predict", "predict_flat", "save_checkpoint",
    "TrainConfig", "compute_loss", "crop_trial", "derive_seed",
    "evaluate_trials", "kfold_split", "loss_only", "run_cross_validation",
    "train_epoch",
]
