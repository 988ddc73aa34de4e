"""From-scratch dense MLP: forward pass, MSE loss, exact backpropagation.

Architecture: input -> hidden(h1, ReLU) -> inverted dropout (keep 0.8)
-> hidden(h2, ReLU) -> linear single output, no final activation.  Scores
are unbounded reals regressed toward {0, 1} targets.

All math is float64.  Gradients are hand-derived; ``backward`` reuses the
exact dropout mask captured in the ForwardTrace, and the ReLU subgradient
at 0 is taken to be 0.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .rng import SplitMix64

DEFAULT_HIDDEN = (100, 100)
DEFAULT_KEEP = 0.8

_TENSOR_FIELDS = ("w1", "b1", "w2", "b2", "w3", "b3")

CHECKPOINT_FORMAT = "fusion-mlp"
CHECKPOINT_VERSION = 1


def _frozen_f64(value, shape: tuple[int, ...], what: str) -> np.ndarray:
    arr = np.asarray(value, dtype=np.float64)
    if arr.shape != shape:
        raise ValueError(f"{what} must have shape {shape}, got {arr.shape}")
    if not np.isfinite(arr).all():
        raise ValueError(f"{what} contains non-finite entries")
    if arr.flags.writeable:
        arr = arr.copy()
        arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class MlpParams:
    """Immutable weights/biases; optimizer steps build new instances."""

    w1: np.ndarray  # [input_dim, h1]
    b1: np.ndarray  # [h1]
    w2: np.ndarray  # [h1, h2]
    b2: np.ndarray  # [h2]
    w3: np.ndarray  # [h2, 1]
    b3: float

    def __post_init__(self):
        w1 = np.asarray(self.w1, dtype=np.float64)
        if w1.ndim != 2:
            raise ValueError(f"w1 must be a matrix, got shape {w1.shape}")
        d, h1 = w1.shape
        w2 = np.asarray(self.w2, dtype=np.float64)
        if w2.ndim != 2 or w2.shape[0] != h1:
            raise ValueError(f"w2 shape {w2.shape} inconsistent with w1 {w1.shape}")
        h2 = w2.shape[1]
        object.__setattr__(self, "w1", _frozen_f64(w1, (d, h1), "w1"))
        object.__setattr__(self, "b1", _frozen_f64(self.b1, (h1,), "b1"))
        object.__setattr__(self, "w2", _frozen_f64(w2, (h1, h2), "w2"))
        object.__setattr__(self, "b2", _frozen_f64(self.b2, (h2,), "b2"))
        object.__setattr__(self, "w3", _frozen_f64(self.w3, (h2, 1), "w3"))
        b3 = float(self.b3)
        if not np.isfinite(b3):
            raise ValueError("b3 is non-finite")
        object.__setattr__(self, "b3", b3)

    @property
    def input_dim(self) -> int:
        return self.w1.shape[0]

    @property
    def hidden_sizes(self) -> tuple[int, int]:
        return self.w1.shape[1], self.w2.shape[1]


@dataclass
class Gradients:
    """Per-parameter tensors with the same shapes as MlpParams.

    Also reused as the container for Adam moment accumulators.
    """

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    w3: np.ndarray
    b3: float

    def tensors(self):
        return {name: getattr(self, name) for name in _TENSOR_FIELDS}


@dataclass
class ForwardTrace:
    """Everything backward needs: inputs, pre/post activations, the exact
    dropout mask that was applied, and the params identity."""

    params: MlpParams
    x: np.ndarray        # [B, input_dim]
    z1: np.ndarray       # [B, h1] pre-activation
    h1: np.ndarray       # [B, h1] post-ReLU
    mask: np.ndarray     # [B, h1] binary; all-ones in eval mode
    keep: float
    mode: str
    dropped: np.ndarray  # [B, h1] h1 * mask / keep (train) or h1 (eval)
    z2: np.ndarray       # [B, h2]
    h2: np.ndarray       # [B, h2]
    scores: np.ndarray   # [B]


def init_params(input_dim: int, seed: int,
                hidden: tuple[int, int] = DEFAULT_HIDDEN) -> MlpParams:
    """Uniform +-sqrt(6/fan_in) weights, zero biases, seed-deterministic.

    ``hidden`` defaults to (100, 100); smaller widths keep gradient-check
    fixtures fast without touching the architecture itself.
    """
    if input_dim <= 0:
        raise ValueError(f"input_dim must be positive, got {input_dim}")
    h1, h2 = hidden
    if h1 <= 0 or h2 <= 0:
        raise ValueError(f"hidden sizes must be positive, got {hidden}")
    rng = SplitMix64(seed)

    def layer(fan_in: int, fan_out: int) -> np.ndarray:
        bound = np.sqrt(6.0 / fan_in)
        return rng.uniform(-bound, bound, fan_in * fan_out).reshape(fan_in, fan_out)

    return MlpParams(
        w1=layer(input_dim, h1),
        b1=np.zeros(h1),
        w2=layer(h1, h2),
        b2=np.zeros(h2),
        w3=layer(h2, 1),
        b3=0.0,
    )


def forward(params: MlpParams, x, mode: str, rng: SplitMix64 | None = None,
            *, keep: float = DEFAULT_KEEP, mask: np.ndarray | None = None):
    """Batch forward pass; returns (scores [B], ForwardTrace).

    In train mode the dropout mask is drawn from ``rng`` (or taken from
    ``mask`` verbatim, which is what gradient checks use to freeze it) and
    activations are scaled by 1/keep.  Eval mode is deterministic and
    applies no dropout.
    """
    if mode not in ("train", "eval"):
        raise ValueError(f"mode must be 'train' or 'eval', got {mode!r}")
    if not 0.0 < keep <= 1.0:
        raise ValueError(f"keep probability must be in (0, 1], got {keep}")
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError(f"input must be a [batch, features] matrix, got shape {x.shape}")
    if x.shape[1] != params.input_dim:
        raise ValueError(
            f"input width {x.shape[1]} does not match input_dim {params.input_dim}")
    if not np.isfinite(x).all():
        raise ValueError("non-finite input rejected")

    batch = x.shape[0]
    h1_width = params.hidden_sizes[0]
    z1 = x @ params.w1 + params.b1
    h1 = np.maximum(z1, 0.0)

    if mode == "eval":
        if mask is not None:
            raise ValueError("explicit dropout mask is only valid in train mode")
        mask = np.ones((batch, h1_width), dtype=np.float64)
        dropped = h1
    else:
        if mask is None:
            if rng is None:
                raise ValueError("train mode requires an rng (or an explicit mask)")
            mask = rng.bernoulli(batch * h1_width, keep).reshape(batch, h1_width)
        else:
            mask = np.asarray(mask, dtype=np.float64)
            if mask.shape != (batch, h1_width):
                raise ValueError(
                    f"mask must have shape {(batch, h1_width)}, got {mask.shape}")
            if not np.isin(mask, (0.0, 1.0)).all():
                raise ValueError("mask entries must be 0 or 1")
        dropped = h1 * mask / keep

    z2 = dropped @ params.w2 + params.b2
    h2 = np.maximum(z2, 0.0)
    scores = h2 @ params.w3[:, 0] + params.b3
    trace = ForwardTrace(params=params, x=x, z1=z1, h1=h1, mask=mask,
                         keep=keep, mode=mode, dropped=dropped, z2=z2,
                         h2=h2, scores=scores)
    return scores, trace


def mse_loss(scores, labels) -> float:
    """Mean of squared residuals over the batch."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise ValueError(
            f"scores and labels must be equal-length vectors, "
            f"got {scores.shape} and {labels.shape}")
    if scores.shape[0] == 0:
        raise ValueError("empty batch has no loss")
    residual = scores - labels
    return float(np.mean(residual * residual))


def backward(params: MlpParams, trace: ForwardTrace, labels) -> Gradients:
    """Analytic gradients of mse_loss w.r.t. every parameter.

    Reuses the forward pass's dropout mask and scaling; the derivative of
    ReLU is taken as (z > 0), i.e. 0 exactly at the kink.
    """
    if trace.params is not params:
        raise ValueError("trace was produced by a different params instance")
    labels = np.asarray(labels, dtype=np.float64)
    batch = trace.x.shape[0]
    if labels.shape != (batch,):
        raise ValueError(
            f"labels must have shape ({batch},), got {labels.shape}")

    # dL/ds for L = mean((s - y)^2)
    dscores = 2.0 * (trace.scores - labels) / batch

    gw3 = trace.h2.T @ dscores[:, None]
    gb3 = float(dscores.sum())

    dh2 = np.outer(dscores, params.w3[:, 0])
    dz2 = dh2 * (trace.z2 > 0.0)
    gw2 = trace.dropped.T @ dz2
    gb2 = dz2.sum(axis=0)

    scale = 1.0 / trace.keep if trace.mode == "train" else 1.0
    ddropped = dz2 @ params.w2.T
    dh1 = ddropped * trace.mask * scale
    dz1 = dh1 * (trace.z1 > 0.0)
    gw1 = trace.x.T @ dz1
    gb1 = dz1.sum(axis=0)

    return Gradients(w1=gw1, b1=gb1, w2=gw2, b2=gb2, w3=gw3, b3=gb3)


def save_checkpoint(path, params: MlpParams, meta: dict | None = None) -> None:
    """JSON metadata line followed by the raw little-endian float64 blob
    (order w1, b1, w2, b2, w3, b3)."""
    h1, h2 = params.hidden_sizes
    header = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "input_dim": params.input_dim,
        "hidden": [h1, h2],
    }
    if meta:
        overlap = set(meta) & set(header)
        if overlap:
            raise ValueError(f"meta keys collide with header keys: {sorted(overlap)}")
        header.update(meta)
    blob = b"".join(
        np.ascontiguousarray(t, dtype="<f8").tobytes() if isinstance(t, np.ndarray)
        else np.float64(t).astype("<f8").tobytes()
        for t in (params.w1, params.b1, params.w2, params.b2, params.w3, params.b3)
    )
    data = json.dumps(header, sort_keys=True).encode("utf-8") + b"\n" + blob
    Path(path).write_bytes(data)


def load_checkpoint(path) -> tuple[MlpParams, dict]:
    """Inverse of save_checkpoint; returns (params, metadata dict)."""
    data = Path(path).read_bytes()
    newline = data.find(b"\n")
    if newline < 0:
        raise ValueError("checkpoint has no metadata line")
    try:
        header = json.loads(data[:newline].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ValueError(f"checkpoint metadata is not valid JSON: {exc}") from None
    if header.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"not a model checkpoint: format {header.get('format')!r}")
    if header.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {header.get('version')!r}")
    d = int(header["input_dim"])
    h1, h2 = (int(v) for v in header["hidden"])
    shapes = [(d, h1), (h1,), (h1, h2), (h2,), (h2, 1), ()]
    blob = data[newline + 1:]
    expected = 8 * sum(int(np.prod(s)) for s in shapes)
    if len(blob) != expected:
        raise ValueError(
            f"checkpoint blob has {len(blob)} bytes, expected {expected}")
    tensors = []
    off = 0
    for shape in shapes:
        count = int(np.prod(shape))
        arr = np.frombuffer(blob, dtype="<f8", count=count, offset=off)
        off += 8 * count
        tensors.append(arr.reshape(shape) if shape else float(arr[0]))
    params = MlpParams(w1=tensors[0], b1=tensors[1], w2=tensors[2],
                       b2=tensors[3], w3=tensors[4], b3=tensors[5])
    meta = {k: v for k, v in header.items()
            if k not in ("format", "version", "input_dim", "hidden")}
    return params, meta
