"""Small trainable CNN with exact analytic gradients.

Layers: conv / relu / maxpool / flatten / dense / dropout.  Every parameter
layer carries a trainable flag and a learning-rate multiplier so transfer
style freezing and slow fine-tuning can be expressed without separate code
paths.  Forward passes cache what backward needs; both run at whatever float
dtype the parameters use (float32 for training, float64 for gradient tests).
"""

import hashlib
import json
from dataclasses import dataclass

import numpy as np

N_CLASSES = 3


@dataclass
class Conv:
    in_ch: int
    out_ch: int
    kernel: int = 3
    stride: int = 1
    pad: int = 1
    trainable: bool = True
    lr_mult: float = 1.0
    name: str = ""

    kind = "conv"


@dataclass
class Dense:
    in_dim: int
    out_dim: int
    trainable: bool = True
    lr_mult: float = 1.0
    name: str = ""

    kind = "dense"


@dataclass
class Relu:
    name: str = ""
    kind = "relu"


@dataclass
class MaxPool:
    kernel: int = 2
    stride: int = 2
    name: str = ""
    kind = "maxpool"


@dataclass
class Flatten:
    name: str = ""
    kind = "flatten"


@dataclass
class Dropout:
    p: float = 0.5
    name: str = ""
    kind = "dropout"


PARAM_KINDS = ("conv", "dense")


@dataclass
class NetworkSpec:
    layers: list
    input_shape: tuple = (5, 224, 224)

    def __post_init__(self):
        counts: dict[str, int] = {}
        for layer in self.layers:
            if not layer.name:
                counts[layer.kind] = counts.get(layer.kind, 0) + 1
                layer.name = f"{layer.kind}{counts[layer.kind]}"

    def param_layers(self):
        return [l for l in self.layers if l.kind in PARAM_KINDS]

    def describe(self) -> list[dict]:
        out = []
        for l in self.layers:
            entry = {"kind": l.kind, "name": l.name}
            if l.kind == "conv":
                entry.update(in_ch=l.in_ch, out_ch=l.out_ch, kernel=l.kernel, stride=l.stride, pad=l.pad)
            elif l.kind == "dense":
                entry.update(in_dim=l.in_dim, out_dim=l.out_dim)
            elif l.kind == "maxpool":
                entry.update(kernel=l.kernel, stride=l.stride)
            elif l.kind == "dropout":
                entry.update(p=l.p)
            out.append(entry)
        return out

    def spec_hash(self) -> bytes:
        payload = json.dumps({"input": list(self.input_shape), "layers": self.describe()}, sort_keys=True)
        return hashlib.sha256(payload.encode()).digest()


def smallnet_spec(finetune_mult: float = 0.001) -> NetworkSpec:
    """Default desk-scale classifier.

    The first conv layer and the dense classifier train at full rate; the
    middle conv layers train at `finetune_mult` of the scheduled rate,
    mirroring slow fine-tuning of transplanted intermediate layers.
    """
    return NetworkSpec(
        layers=[
            Conv(5, 16, 3, 1, 1, lr_mult=1.0),
            Relu(),
            MaxPool(2, 2),
            Conv(16, 32, 3, 1, 1, lr_mult=finetune_mult),
            Relu(),
            MaxPool(2, 2),
            Conv(32, 64, 3, 1, 1, lr_mult=finetune_mult),
            Relu(),
            MaxPool(2, 2),
            Flatten(),
            Dense(64 * 28 * 28, 128, lr_mult=1.0),
            Relu(),
            Dropout(0.5),
            Dense(128, N_CLASSES, lr_mult=1.0),
        ]
    )


# ---------------------------------------------------------------------------
# parameter init


HEAD_INIT_STD = 0.01


def init_params(spec: NetworkSpec, seed: int = 0, donor: dict | None = None, dtype=np.float32) -> dict:
    """He-style init: W ~ N(0, sqrt(2 / fan_in)), b = 0; the final layer
    (the classifier head) uses a small fixed std so initial scores sit near
    zero and the starting loss lands at ln(n_classes).

    With a donor, parameters of matching name and shape are copied verbatim.
    The first conv layer may take a donor with fewer input channels: those
    channels are copied and the extra ones keep their fresh init.
    """
    rng = np.random.default_rng(seed)
    params: dict[str, dict[str, np.ndarray]] = {}
    param_layers = spec.param_layers()
    first_param = True
    for layer in param_layers:
        if layer.kind == "conv":
            fan_in = layer.in_ch * layer.kernel * layer.kernel
            w_shape = (layer.out_ch, layer.in_ch, layer.kernel, layer.kernel)
            b_shape = (layer.out_ch,)
        else:
            fan_in = layer.in_dim
            w_shape = (layer.in_dim, layer.out_dim)
            b_shape = (layer.out_dim,)
        std = HEAD_INIT_STD if layer is param_layers[-1] else np.sqrt(2.0 / fan_in)
        w = rng.normal(0.0, std, size=w_shape).astype(dtype)
        b = np.zeros(b_shape, dtype=dtype)

        if donor is not None and layer.name in donor:
            dw = np.asarray(donor[layer.name]["W"], dtype=dtype)
            db = np.asarray(donor[layer.name]["b"], dtype=dtype)
            if dw.shape == w.shape:
                w = dw.copy()
            elif (
                first_param
                and layer.kind == "conv"
                and dw.ndim == 4
                and dw.shape[0] == w.shape[0]
                and dw.shape[2:] == w.shape[2:]
                and dw.shape[1] < w.shape[1]
            ):
                w[:, : dw.shape[1]] = dw
            else:
                raise ValueError(f"donor shape {dw.shape} conflicts with {layer.name} {w.shape}")
            if db.shape == b.shape:
                b = db.copy()
        params[layer.name] = {"W": w, "b": b}
        first_param = False
    return params


# ---------------------------------------------------------------------------
# layer forward/backward primitives


def _im2col(x, kh, kw, stride, pad):
    if pad:
        x = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    B, C, Hp, Wp = x.shape
    oh = (Hp - kh) // stride + 1
    ow = (Wp - kw) // stride + 1
    s0, s1, s2, s3 = x.strides
    win = np.lib.stride_tricks.as_strided(
        x,
        shape=(B, C, kh, kw, oh, ow),
        strides=(s0, s1, s2, s3, s2 * stride, s3 * stride),
        writeable=False,
    )
    return win.reshape(B, C * kh * kw, oh * ow), oh, ow


def _col2im(dcols, x_shape, kh, kw, stride, pad):
    B, C, H, W = x_shape
    Hp, Wp = H + 2 * pad, W + 2 * pad
    oh = (Hp - kh) // stride + 1
    ow = (Wp - kw) // stride + 1
    dx = np.zeros((B, C, Hp, Wp), dtype=dcols.dtype)
    d6 = dcols.reshape(B, C, kh, kw, oh, ow)
    for i in range(kh):
        for j in range(kw):
            dx[:, :, i : i + (oh - 1) * stride + 1 : stride, j : j + (ow - 1) * stride + 1 : stride] += d6[:, :, i, j]
    return dx[:, :, pad : pad + H, pad : pad + W] if pad else dx


def _conv_forward(x, w, b, stride, pad):
    F = w.shape[0]
    cols, oh, ow = _im2col(x, w.shape[2], w.shape[3], stride, pad)
    out = np.matmul(w.reshape(F, -1)[None], cols)  # batched GEMM over B
    out += b[None, :, None]
    return out.reshape(x.shape[0], F, oh, ow), (x.shape, oh, ow)


def _conv_backward(dout, x, w, stride, pad):
    B, F, oh, ow = dout.shape
    dflat = dout.reshape(B, F, oh * ow)
    cols, _, _ = _im2col(x, w.shape[2], w.shape[3], stride, pad)
    dw = np.matmul(dflat, cols.transpose(0, 2, 1)).sum(axis=0).reshape(w.shape)
    db = dout.sum(axis=(0, 2, 3))
    dcols = np.matmul(w.reshape(F, -1).T[None], dflat)
    dx = _col2im(dcols, x.shape, w.shape[2], w.shape[3], stride, pad)
    return dx, dw, db


def _maxpool_forward(x, k, s):
    B, C, H, W = x.shape
    oh = (H - k) // s + 1
    ow = (W - k) // s + 1
    stack = np.empty((k * k, B, C, oh, ow), dtype=x.dtype)
    for i in range(k):
        for j in range(k):
            stack[i * k + j] = x[:, :, i : i + (oh - 1) * s + 1 : s, j : j + (ow - 1) * s + 1 : s]
    idx = np.argmax(stack, axis=0)  # first maximum wins; deterministic
    out = np.take_along_axis(stack, idx[None], axis=0)[0]
    return out, (x.shape, k, s, idx)


def _maxpool_backward(dout, cache):
    x_shape, k, s, idx = cache
    dx = np.zeros(x_shape, dtype=dout.dtype)
    oh, ow = idx.shape[2:]
    for i in range(k):
        for j in range(k):
            view = dx[:, :, i : i + (oh - 1) * s + 1 : s, j : j + (ow - 1) * s + 1 : s]
            view += np.where(idx == i * k + j, dout, 0)
    return dx


# ---------------------------------------------------------------------------
# network passes


def forward(spec: NetworkSpec, params: dict, x: np.ndarray, mode: str = "eval", rng=None):
    """Run the network; returns (scores, caches) with raw pre-softmax scores.

    Dropout is active only in train mode and uses inverted scaling, so eval
    needs no rescaling and is fully deterministic.
    """
    if mode not in ("train", "eval"):
        raise ValueError(f"mode must be 'train' or 'eval', got {mode!r}")
    x = np.asarray(x)
    if x.ndim == 3:
        x = x[None]
    if tuple(x.shape[1:]) != tuple(spec.input_shape):
        raise ValueError(f"batch shape {x.shape[1:]} does not match spec input {spec.input_shape}")
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)

    caches = []
    for layer in spec.layers:
        if layer.kind == "conv":
            p = params[layer.name]
            caches.append(x)
            x, _ = _conv_forward(x, p["W"], p["b"], layer.stride, layer.pad)
        elif layer.kind == "dense":
            p = params[layer.name]
            caches.append(x)
            x = x @ p["W"] + p["b"]
        elif layer.kind == "relu":
            mask = x > 0
            caches.append(mask)
            x = x * mask
        elif layer.kind == "maxpool":
            x, cache = _maxpool_forward(x, layer.kernel, layer.stride)
            caches.append(cache)
        elif layer.kind == "flatten":
            caches.append(x.shape)
            x = x.reshape(x.shape[0], -1)
        elif layer.kind == "dropout":
            if mode == "train":
                mask = (rng.random(x.shape) >= layer.p) / (1.0 - layer.p)
                caches.append(mask)
                x = x * mask
            else:
                caches.append(None)
        else:
            raise ValueError(f"unknown layer kind {layer.kind!r}")
    return x, caches


def backward(spec: NetworkSpec, params: dict, caches: list, dscores: np.ndarray):
    """Exact gradients of the scalar loss whose score-gradient is `dscores`.

    Frozen layers report zero parameter gradients but still propagate the
    upstream error.  Returns (grads, dx).
    """
    grads: dict[str, dict[str, np.ndarray]] = {}
    dx = dscores
    for layer, cache in zip(reversed(spec.layers), reversed(caches)):
        if layer.kind == "conv":
            p = params[layer.name]
            dx, dw, db = _conv_backward(dx, cache, p["W"], layer.stride, layer.pad)
            if layer.trainable:
                grads[layer.name] = {"W": dw, "b": db}
            else:
                grads[layer.name] = {"W": np.zeros_like(p["W"]), "b": np.zeros_like(p["b"])}
        elif layer.kind == "dense":
            x = cache
            p = params[layer.name]
            if layer.trainable:
                grads[layer.name] = {"W": x.T @ dx, "b": dx.sum(axis=0)}
            else:
                grads[layer.name] = {"W": np.zeros_like(p["W"]), "b": np.zeros_like(p["b"])}
            dx = dx @ p["W"].T
        elif layer.kind == "relu":
            dx = dx * cache
        elif layer.kind == "maxpool":
            dx = _maxpool_backward(dx, cache)
        elif layer.kind == "flatten":
            dx = dx.reshape(cache)
        elif layer.kind == "dropout":
            if cache is not None:
                dx = dx * cache
    return grads, dx


# ---------------------------------------------------------------------------
# loss and diagnostics


def softmax(scores: np.ndarray) -> np.ndarray:
    shifted = scores - scores.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def per_sample_loss(scores: np.ndarray, labels: np.ndarray, weights) -> np.ndarray:
    """Weighted cross entropy per sample: w_c * (-y_c + log sum_j exp(y_j)),
    stabilized by subtracting the max score."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    weights = np.asarray(weights, dtype=np.float64)
    if labels.min(initial=0) < 0 or labels.max(initial=0) >= scores.shape[1]:
        raise ValueError("label out of range")
    shifted = scores - scores.max(axis=1, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=1))
    rows = np.arange(scores.shape[0])
    return weights[labels] * (lse - shifted[rows, labels])


def weighted_cross_entropy(scores: np.ndarray, labels: np.ndarray, weights) -> float:
    """Batch loss: sum of per-sample losses divided by the sum of the
    samples' class weights (a weighted mean of the unweighted terms)."""
    weights = np.asarray(weights, dtype=np.float64)
    losses = per_sample_loss(scores, labels, weights)
    return float(losses.sum() / weights[np.asarray(labels)].sum())


def loss_and_grad(scores: np.ndarray, labels: np.ndarray, weights):
    """Loss plus its exact gradient with respect to the raw scores."""
    labels = np.asarray(labels)
    weights = np.asarray(weights, dtype=np.float64)
    loss = weighted_cross_entropy(scores, labels, weights)
    probs = softmax(np.asarray(scores, dtype=np.float64))
    onehot = np.zeros_like(probs)
    onehot[np.arange(len(labels)), labels] = 1.0
    w = weights[labels][:, None]
    dscores = w * (probs - onehot) / weights[labels].sum()
    return loss, dscores.astype(np.asarray(scores).dtype)


def salience_map(spec: NetworkSpec, params: dict, stack: np.ndarray, class_idx: int) -> np.ndarray:
    """Gradient of one class score with respect to the input, reduced by the
    max of absolute values across channels and scaled to [0, 1]."""
    stack = np.asarray(stack)
    if stack.ndim != 3:
        raise ValueError(f"expected one (C, H, W) stack, got shape {stack.shape}")
    scores, caches = forward(spec, params, stack[None], mode="eval")
    dscores = np.zeros_like(scores)
    dscores[0, class_idx] = 1.0
    _, dx = backward(spec, params, caches, dscores)
    sal = np.abs(dx[0]).max(axis=0)
    peak = sal.max()
    if peak > 0:
        sal = sal / peak
    return sal
