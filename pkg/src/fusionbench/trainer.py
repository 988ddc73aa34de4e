"""Mini-batch training loop with per-batch and per-epoch curve logging.

One run is strictly sequential and bitwise reproducible under
(dataset, split, config): weight init, dropout, and the per-epoch shuffle
each draw from their own stream derived from the config seed.  Validation
is evaluated after every epoch in eval mode and never feeds back into
training; model selection happens downstream on the recorded curves.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from . import adam as adam_mod
from . import mlp
from .feature_store import (Dataset, DatasetSplit, MODALITIES, feature_matrix,
                            modality_dim)
from .rng import SplitMix64, derive_seed

# Stream tags for derive_seed: init / dropout / per-epoch shuffle.
_INIT_STREAM = 0x494E
_DROPOUT_STREAM = 0x4452
_SHUFFLE_STREAM = 0x5348


class DivergenceError(RuntimeError):
    """Training produced a non-finite loss, gradient, or parameter."""


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters for one training run."""

    modality: str = "multimodal"
    batch_size: int = 25
    epochs: int = 100
    lr: float = adam_mod.DEFAULT_LR
    beta1: float = adam_mod.DEFAULT_BETA1
    beta2: float = adam_mod.DEFAULT_BETA2
    epsilon: float = adam_mod.DEFAULT_EPSILON
    weight_decay: float = adam_mod.DEFAULT_WEIGHT_DECAY
    dropout_keep: float = mlp.DEFAULT_KEEP
    seed: int = 0
    threshold: float = 0.5

    def __post_init__(self):
        if self.modality not in MODALITIES:
            raise ValueError(
                f"modality must be one of {MODALITIES}, got {self.modality!r}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if not 0.0 < self.dropout_keep <= 1.0:
            raise ValueError(
                f"dropout_keep must be in (0, 1], got {self.dropout_keep}")

    def to_json_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_json_dict(cls, obj: dict) -> "TrainConfig":
        if not isinstance(obj, dict):
            raise ValueError("train config must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = set(obj) - known
        if unknown:
            raise ValueError(f"unknown train config keys: {sorted(unknown)}")
        return cls(**obj)


@dataclass
class CurveLog:
    """The three training curves: per-batch train loss, per-epoch
    validation loss and validation binary accuracy."""

    train_loss: list[tuple[int, float]] = field(default_factory=list)
    val_loss: list[tuple[int, float]] = field(default_factory=list)
    val_accuracy: list[tuple[int, float]] = field(default_factory=list)

    def validate(self) -> None:
        for name in ("train_loss", "val_loss", "val_accuracy"):
            series = getattr(self, name)
            steps = [s for s, _ in series]
            if steps != sorted(set(steps)):
                raise ValueError(f"{name} steps must be strictly increasing")
        if any(loss < 0 for _, loss in self.train_loss):
            raise ValueError("train losses must be >= 0")
        if any(loss < 0 for _, loss in self.val_loss):
            raise ValueError("validation losses must be >= 0")
        if any(not 0.0 <= acc <= 1.0 for _, acc in self.val_accuracy):
            raise ValueError("accuracies must be in [0, 1]")

    def to_json_dict(self) -> dict:
        return {
            "train_loss": [[i, v] for i, v in self.train_loss],
            "val_loss": [[i, v] for i, v in self.val_loss],
            "val_accuracy": [[i, v] for i, v in self.val_accuracy],
        }

    @classmethod
    def from_json_dict(cls, obj: dict) -> "CurveLog":
        return cls(
            train_loss=[(int(i), float(v)) for i, v in obj["train_loss"]],
            val_loss=[(int(i), float(v)) for i, v in obj["val_loss"]],
            val_accuracy=[(int(i), float(v)) for i, v in obj["val_accuracy"]],
        )

    def save_json(self, path) -> None:
        text = json.dumps(self.to_json_dict(), indent=2, sort_keys=True)
        Path(path).write_text(text + "\n", encoding="utf-8")

    def write_csv(self, out_dir) -> None:
        """One CSV per curve: train_loss.csv, val_loss.csv, val_accuracy.csv."""
        out_dir = Path(out_dir)
        specs = [
            ("train_loss.csv", "batch,loss", self.train_loss),
            ("val_loss.csv", "epoch,loss", self.val_loss),
            ("val_accuracy.csv", "epoch,accuracy", self.val_accuracy),
        ]
        for filename, header, series in specs:
            lines = [header] + [f"{step},{value!r}" for step, value in series]
            (out_dir / filename).write_text("\n".join(lines) + "\n",
                                            encoding="utf-8")


@dataclass
class TrainResult:
    """Final params plus curves, with the best-validation-accuracy epoch
    tracked for checkpointing (earliest epoch wins ties)."""

    params: mlp.MlpParams
    curves: CurveLog
    best_params: mlp.MlpParams
    best_epoch: int
    best_accuracy: float
    final_adam_state: adam_mod.AdamState


def _accuracy(scores: np.ndarray, labels: np.ndarray, threshold: float) -> float:
    # Tie convention: a score exactly at threshold predicts the positive class.
    predicted = scores >= threshold
    return float(np.mean(predicted == (labels == 1.0)))


def evaluate(params: mlp.MlpParams, ds: Dataset, ids, modality: str,
             threshold: float = 0.5) -> tuple[float, float, np.ndarray]:
    """Eval-mode pass over the given ids.

    Returns (mse loss, binary accuracy at threshold, raw scores in id
    order).  Scores are unthresholded for downstream PR analysis.
    """
    x, y = feature_matrix(ds, ids, modality)
    scores, _ = mlp.forward(params, x, "eval")
    return mlp.mse_loss(scores, y), _accuracy(scores, y, threshold), scores


def train(ds: Dataset, split: DatasetSplit, cfg: TrainConfig) -> TrainResult:
    """Run the full training loop; bitwise reproducible under (ds, split, cfg).

    Per epoch: shuffle train ids with an epoch-derived seed, consume
    batches of cfg.batch_size (final short batch included, mean loss over
    its actual size), and record validation loss/accuracy in eval mode.
    A single-class train set is permitted (it trains toward the constant
    predictor); empty split sides are not.
    """
    split.validate_against(ds)
    if not split.train_ids:
        raise ValueError("split has an empty train side")
    if not split.val_ids:
        raise ValueError("split has an empty validation side")

    x_train, y_train = feature_matrix(ds, split.train_ids, cfg.modality)
    x_val, y_val = feature_matrix(ds, split.val_ids, cfg.modality)
    n_train = x_train.shape[0]

    params = mlp.init_params(modality_dim(cfg.modality),
                             derive_seed(cfg.seed, _INIT_STREAM))
    state = adam_mod.init_adam_state(
        params, lr=cfg.lr, beta1=cfg.beta1, beta2=cfg.beta2,
        epsilon=cfg.epsilon, weight_decay=cfg.weight_decay)
    dropout_rng = SplitMix64(derive_seed(cfg.seed, _DROPOUT_STREAM))

    curves = CurveLog()
    best_params = params
    best_epoch = 0
    best_accuracy = -1.0
    batch_index = 0

    for epoch in range(1, cfg.epochs + 1):
        order = list(range(n_train))
        SplitMix64(derive_seed(cfg.seed, _SHUFFLE_STREAM, epoch)).shuffle(order)
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            for start in range(0, n_train, cfg.batch_size):
                rows = order[start:start + cfg.batch_size]
                x_batch = x_train[rows]
                y_batch = y_train[rows]
                scores, trace = mlp.forward(
                    params, x_batch, "train", dropout_rng, keep=cfg.dropout_keep)
                loss = mlp.mse_loss(scores, y_batch)
                if not np.isfinite(loss):
                    raise DivergenceError(
                        f"non-finite training loss at epoch {epoch}, "
                        f"batch {batch_index}")
                curves.train_loss.append((batch_index, loss))
                batch_index += 1
                grads = mlp.backward(params, trace, y_batch)
                if not all(np.isfinite(t).all() for t in grads.tensors().values()):
                    raise DivergenceError(
                        f"non-finite gradient at epoch {epoch}, "
                        f"batch {batch_index - 1}")
                try:
                    params, state = adam_mod.adam_step(params, grads, state)
                except ValueError as exc:
                    raise DivergenceError(
                        f"update produced invalid parameters at epoch {epoch}, "
                        f"batch {batch_index - 1}: {exc}") from None

            val_scores, _ = mlp.forward(params, x_val, "eval")
            val_loss = mlp.mse_loss(val_scores, y_val)
        if not np.isfinite(val_loss):
            raise DivergenceError(f"non-finite validation loss at epoch {epoch}")
        val_acc = _accuracy(val_scores, y_val, cfg.threshold)
        curves.val_loss.append((epoch, val_loss))
        curves.val_accuracy.append((epoch, val_acc))
        if val_acc > best_accuracy:
            best_accuracy = val_acc
            best_epoch = epoch
            best_params = params

    return TrainResult(params=params, curves=curves, best_params=best_params,
                       best_epoch=best_epoch, best_accuracy=best_accuracy,
                       final_adam_state=state)
