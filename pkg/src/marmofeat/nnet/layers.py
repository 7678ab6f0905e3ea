"""Layers with hand-written backward passes.

Every layer exposes ``forward(x) -> (out, cache)`` and
``backward(dout, cache) -> (dx, grads)``; ``grads`` maps parameter names to
arrays shaped like the parameters. Linear layers work on (batch, features);
convolution and pooling work on one (channels, time) map at a time.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


class Layer:
    name = "layer"
    has_params = False

    def params(self) -> dict[str, np.ndarray]:
        return {}

    def forward(self, x):
        raise NotImplementedError

    def backward(self, dout, cache):
        raise NotImplementedError


class Linear(Layer):
    name = "linear"
    has_params = True

    def __init__(self, n_in: int, n_out: int, dtype=np.float64):
        if n_in <= 0 or n_out <= 0:
            raise ValueError(f"zero-sized linear layer {n_in}x{n_out}")
        self.weight = np.zeros((n_in, n_out), dtype=dtype)
        self.bias = np.zeros(n_out, dtype=dtype)

    @property
    def fan_in(self) -> int:
        return self.weight.shape[0]

    def params(self):
        return {"weight": self.weight, "bias": self.bias}

    def forward(self, x):
        return x @ self.weight + self.bias, x

    def backward(self, dout, cache):
        x = cache
        return dout @ self.weight.T, {"weight": x.T @ dout, "bias": dout.sum(axis=0)}


class ReLU(Layer):
    name = "relu"

    def forward(self, x):
        mask = x > 0
        return x * mask, mask

    def backward(self, dout, cache):
        return dout * cache, {}


class Conv1d(Layer):
    """Strided 1-D convolution (cross-correlation) with symmetric zero padding."""

    name = "conv1d"
    has_params = True

    def __init__(self, in_channels: int, out_channels: int, kernel: int, stride: int = 1,
                 pad: int = 0, dtype=np.float64, input_grad: bool = True):
        if min(in_channels, out_channels, kernel, stride) <= 0 or pad < 0:
            raise ValueError("zero-sized convolution")
        self.kernel = kernel
        self.stride = stride
        self.pad = pad
        self.input_grad = input_grad
        self.weight = np.zeros((out_channels, in_channels, kernel), dtype=dtype)
        self.bias = np.zeros(out_channels, dtype=dtype)

    @property
    def fan_in(self) -> int:
        return self.weight.shape[1] * self.kernel

    def params(self):
        return {"weight": self.weight, "bias": self.bias}

    def output_length(self, n: int) -> int:
        return (n + 2 * self.pad - self.kernel) // self.stride + 1

    def min_input_length(self, n_out: int = 1) -> int:
        return max(1, (n_out - 1) * self.stride + self.kernel - 2 * self.pad)

    def forward(self, x):
        c, n = x.shape
        if self.pad:
            x = np.pad(x, ((0, 0), (self.pad, self.pad)))
        n_out = self.output_length(n)
        if n_out < 1:
            raise ValueError(f"input of length {n} too short for kernel {self.kernel}")
        win = sliding_window_view(x, self.kernel, axis=1)[:, ::self.stride][:, :n_out]
        cols = win.transpose(0, 2, 1).reshape(c * self.kernel, n_out)
        w2 = self.weight.reshape(self.weight.shape[0], -1)
        out = w2 @ cols + self.bias[:, None]
        return out, (cols, x.shape)

    def backward(self, dout, cache):
        cols, padded_shape = cache
        f = self.weight.shape[0]
        w2 = self.weight.reshape(f, -1)
        grads = {"weight": (dout @ cols.T).reshape(self.weight.shape), "bias": dout.sum(axis=1)}
        if not self.input_grad:
            return None, grads
        c, n_padded = padded_shape
        n_out = dout.shape[1]
        dcols = (w2.T @ dout).reshape(c, self.kernel, n_out)
        dx = np.zeros(padded_shape, dtype=dout.dtype)
        span = self.stride * (n_out - 1) + 1
        for j in range(self.kernel):
            dx[:, j:j + span:self.stride] += dcols[:, j, :]
        if self.pad:
            dx = dx[:, self.pad:n_padded - self.pad]
        return dx, grads


class AdaptiveAvgPool(Layer):
    """Global average over time: (C, L) -> (1, C)."""

    name = "adaptive_avg_pool"

    def forward(self, x):
        if x.ndim != 2 or x.shape[1] < 1:
            raise ValueError(f"cannot pool a feature map of shape {x.shape}")
        return x.mean(axis=1)[None, :], x.shape[1]

    def backward(self, dout, cache):
        length = cache
        return np.repeat(dout.reshape(-1, 1) / length, length, axis=1), {}


def adaptive_avg_pool(feature_map) -> np.ndarray:
    fm = np.asarray(feature_map)
    if fm.ndim != 2 or fm.shape[1] < 1:
        raise ValueError(f"cannot pool a feature map of shape {fm.shape}")
    return fm.mean(axis=1)


def log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def cross_entropy(logits, label) -> tuple[float, np.ndarray]:
    """Loss and dLoss/dlogits for one example."""
    logits = np.asarray(logits)
    n_classes = logits.shape[-1]
    if not 0 <= int(label) < n_classes:
        raise ValueError(f"label {label} outside [0, {n_classes})")
    lsm = log_softmax(logits)
    grad = np.exp(lsm)
    grad[int(label)] -= 1.0
    return float(-lsm[int(label)]), grad


def batch_cross_entropy(logits: np.ndarray, labels: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean loss over the batch and its gradient w.r.t. the (B, C) logits."""
    labels = np.asarray(labels, dtype=np.int64)
    n, n_classes = logits.shape
    if labels.min(initial=0) < 0 or labels.max(initial=0) >= n_classes:
        raise ValueError(f"labels outside [0, {n_classes})")
    lsm = log_softmax(logits)
    rows = np.arange(n)
    grad = np.exp(lsm)
    grad[rows, labels] -= 1.0
    return float(-lsm[rows, labels].mean()), grad / n
