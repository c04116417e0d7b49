"""Adaptive-moment optimization with a delayed cosine learning-rate schedule
and imbalance-correcting class weights."""

from dataclasses import dataclass

import numpy as np


@dataclass
class AdamConfig:
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.0  # coupled L2: lambda * W added to the gradient

    def __post_init__(self):
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError("betas must lie in [0, 1)")
        if self.eps <= 0:
            raise ValueError("eps must be positive")
        if self.weight_decay < 0:
            raise ValueError("weight decay must be non-negative")


@dataclass
class AdamState:
    m: dict
    v: dict
    t: int = 0

    @classmethod
    def fresh(cls, params: dict) -> "AdamState":
        zeros = lambda: {
            name: {k: np.zeros_like(v) for k, v in tensors.items()} for name, tensors in params.items()
        }
        return cls(m=zeros(), v=zeros(), t=0)


@dataclass
class LrSchedule:
    alpha0: float
    tau_start: int
    tau_max: int

    def __post_init__(self):
        if self.alpha0 <= 0:
            raise ValueError("initial rate must be positive")
        if self.tau_start < 0 or self.tau_max < 1:
            raise ValueError("need tau_start >= 0 and tau_max >= 1")


def lr_at(schedule: LrSchedule, tau) -> float:
    """Constant alpha0 through tau_start, then half-cosine decay over
    tau_max epochs, clamped at zero beyond the end of the cosine."""
    if tau < 0:
        raise ValueError("epoch index must be non-negative")
    if tau <= schedule.tau_start:
        return schedule.alpha0
    d = tau - schedule.tau_start
    if d > schedule.tau_max:
        return 0.0
    return float(0.5 * schedule.alpha0 * (1.0 + np.cos(d * np.pi / schedule.tau_max)))


def class_weights(counts, risk_class: int | None = None, risk_multiplier: float = 1.0) -> np.ndarray:
    """w_c = N_max / N_c, optionally multiplied for one high-risk class."""
    counts = np.asarray(counts, dtype=np.float64)
    if np.any(counts < 1):
        raise ValueError(f"every class needs at least one sample, got {counts}")
    w = counts.max() / counts
    if risk_class is not None:
        w[risk_class] *= risk_multiplier
    return w


def adam_step(params: dict, grads: dict, state: AdamState, cfg: AdamConfig, lr: float, spec=None) -> None:
    """One in-place update of every trainable parameter.

    Weight decay joins the gradient before the moment updates; bias
    correction divides by (1 - beta^t); the update denominator is
    sqrt(v_hat) + eps.  Frozen layers are left untouched, and a per-layer
    learning-rate multiplier scales the scheduled rate.
    """
    layer_meta = {}
    if spec is not None:
        layer_meta = {l.name: l for l in spec.param_layers()}
    state.t += 1
    t = state.t
    b1, b2 = cfg.beta1, cfg.beta2
    for name, tensors in params.items():
        meta = layer_meta.get(name)
        if meta is not None and not meta.trainable:
            continue
        mult = meta.lr_mult if meta is not None else 1.0
        step_lr = lr * mult
        for key, p in tensors.items():
            g = grads[name][key]
            if not np.all(np.isfinite(g)):
                raise FloatingPointError(f"non-finite gradient in {name}.{key}")
            if cfg.weight_decay:
                g = g + cfg.weight_decay * p
            m = state.m[name][key]
            v = state.v[name][key]
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * (g * g)
            m_hat = m / (1 - b1**t)
            v_hat = v / (1 - b2**t)
            p -= step_lr * m_hat / (np.sqrt(v_hat) + cfg.eps)
