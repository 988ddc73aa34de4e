"""Adam optimizer, original bias-corrected formulation.

Update per tensor:
    m <- beta1*m + (1-beta1)*g
    v <- beta2*v + (1-beta2)*g^2
    m_hat = m / (1 - beta1^t);  v_hat = v / (1 - beta2^t)
    theta <- theta - lr * m_hat / (sqrt(v_hat) + epsilon)

Epsilon sits outside the square root.  weight_decay adds wd*theta to the
gradient before the moment updates; the default is 0, i.e. no decay.
Steps are functional: they return new params and new state.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .mlp import Gradients, MlpParams

DEFAULT_LR = 0.1
DEFAULT_BETA1 = 0.9
DEFAULT_BETA2 = 0.999
DEFAULT_EPSILON = 1e-8
DEFAULT_WEIGHT_DECAY = 0.0

STATE_FORMAT = "fusion-adam"
STATE_VERSION = 1

_TENSOR_FIELDS = ("w1", "b1", "w2", "b2", "w3", "b3")


@dataclass(frozen=True)
class AdamState:
    """Moment accumulators plus hyperparameters; t counts completed steps."""

    m: Gradients
    v: Gradients
    t: int
    lr: float = DEFAULT_LR
    beta1: float = DEFAULT_BETA1
    beta2: float = DEFAULT_BETA2
    epsilon: float = DEFAULT_EPSILON
    weight_decay: float = DEFAULT_WEIGHT_DECAY

    def __post_init__(self):
        if self.t < 0:
            raise ValueError(f"step counter must be >= 0, got {self.t}")
        if self.lr <= 0:
            raise ValueError(f"lr must be positive, got {self.lr}")
        if not 0.0 <= self.beta1 < 1.0 or not 0.0 <= self.beta2 < 1.0:
            raise ValueError(
                f"betas must be in [0, 1), got ({self.beta1}, {self.beta2})")
        if self.epsilon <= 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if self.weight_decay < 0:
            raise ValueError(f"weight_decay must be >= 0, got {self.weight_decay}")


def init_adam_state(params: MlpParams, *, lr: float = DEFAULT_LR,
                    beta1: float = DEFAULT_BETA1, beta2: float = DEFAULT_BETA2,
                    epsilon: float = DEFAULT_EPSILON,
                    weight_decay: float = DEFAULT_WEIGHT_DECAY) -> AdamState:
    """Fresh state with zero moments shaped like ``params``."""

    def zeros() -> Gradients:
        return Gradients(
            w1=np.zeros_like(params.w1), b1=np.zeros_like(params.b1),
            w2=np.zeros_like(params.w2), b2=np.zeros_like(params.b2),
            w3=np.zeros_like(params.w3), b3=0.0)

    return AdamState(m=zeros(), v=zeros(), t=0, lr=lr, beta1=beta1,
                     beta2=beta2, epsilon=epsilon, weight_decay=weight_decay)


def adam_step(params: MlpParams, grads: Gradients,
              state: AdamState) -> tuple[MlpParams, AdamState]:
    """One bias-corrected Adam update; returns (new params, new state)."""
    t = state.t + 1
    bias1 = 1.0 - state.beta1 ** t
    bias2 = 1.0 - state.beta2 ** t

    new_params: dict = {}
    new_m: dict = {}
    new_v: dict = {}
    for name in _TENSOR_FIELDS:
        theta = getattr(params, name)
        g = getattr(grads, name)
        if isinstance(theta, np.ndarray):
            g = np.asarray(g, dtype=np.float64)
            if g.shape != theta.shape:
                raise ValueError(
                    f"gradient {name} has shape {g.shape}, "
                    f"expected {theta.shape}")
        else:
            g = float(g)
        if state.weight_decay != 0.0:
            g = g + state.weight_decay * theta
        m = state.beta1 * getattr(state.m, name) + (1.0 - state.beta1) * g
        v = state.beta2 * getattr(state.v, name) + (1.0 - state.beta2) * (g * g)
        m_hat = m / bias1
        v_hat = v / bias2
        update = state.lr * m_hat / (np.sqrt(v_hat) + state.epsilon)
        new_params[name] = theta - update
        new_m[name] = m
        new_v[name] = v

    return (
        MlpParams(**new_params),
        replace(state, m=Gradients(**new_m), v=Gradients(**new_v), t=t),
    )


def save_adam_state(path, state: AdamState) -> None:
    """JSON line (hyperparameters, t) + float64 LE blob of m then v,
    each in parameter order w1, b1, w2, b2, w3, b3."""
    header = {
        "format": STATE_FORMAT,
        "version": STATE_VERSION,
        "t": state.t,
        "lr": state.lr,
        "beta1": state.beta1,
        "beta2": state.beta2,
        "epsilon": state.epsilon,
        "weight_decay": state.weight_decay,
        "shapes": {name: list(np.shape(getattr(state.m, name)))
                   for name in _TENSOR_FIELDS},
    }
    blob = b""
    for moments in (state.m, state.v):
        for name in _TENSOR_FIELDS:
            tensor = getattr(moments, name)
            blob += np.ascontiguousarray(tensor, dtype="<f8").tobytes()
    data = json.dumps(header, sort_keys=True).encode("utf-8") + b"\n" + blob
    Path(path).write_bytes(data)


def load_adam_state(path) -> AdamState:
    data = Path(path).read_bytes()
    newline = data.find(b"\n")
    if newline < 0:
        raise ValueError("optimizer state has no metadata line")
    header = json.loads(data[:newline].decode("utf-8"))
    if header.get("format") != STATE_FORMAT:
        raise ValueError(f"not an optimizer state: format {header.get('format')!r}")
    if header.get("version") != STATE_VERSION:
        raise ValueError(f"unsupported state version {header.get('version')!r}")
    shapes = [tuple(header["shapes"][name]) for name in _TENSOR_FIELDS]
    blob = data[newline + 1:]
    per_moment = 8 * sum(int(np.prod(s)) for s in shapes)
    if len(blob) != 2 * per_moment:
        raise ValueError(
            f"state blob has {len(blob)} bytes, expected {2 * per_moment}")
    moments = []
    off = 0
    for _ in range(2):
        tensors = {}
        for name, shape in zip(_TENSOR_FIELDS, shapes):
            count = int(np.prod(shape))
            arr = np.frombuffer(blob, dtype="<f8", count=count, offset=off)
            off += 8 * count
            tensors[name] = arr.reshape(shape) if shape else float(arr[0])
        moments.append(Gradients(**tensors))
    return AdamState(
        m=moments[0], v=moments[1], t=int(header["t"]), lr=float(header["lr"]),
        beta1=float(header["beta1"]), beta2=float(header["beta2"]),
        epsilon=float(header["epsilon"]),
        weight_decay=float(header["weight_decay"]))
