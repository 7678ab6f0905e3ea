"""Central finite differences for the layer and model gradient tests."""

import numpy as np

from marmofeat.nnet.layers import AdaptiveAvgPool, Conv1d, Linear, ReLU, cross_entropy

STEP = 1e-5


def rel_error(a, b) -> float:
    a, b = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    denom = max(np.abs(a).max(), np.abs(b).max(), 1e-8)
    return float(np.abs(a - b).max() / denom)


def numeric_grad(f, x: np.ndarray, step: float = STEP) -> np.ndarray:
    """d f(x) / dx for scalar f, perturbing x in place one entry at a time."""
    g = np.zeros_like(x, dtype=np.float64)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        old = x[i]
        x[i] = old + step
        up = f()
        x[i] = old - step
        down = f()
        x[i] = old
        g[i] = (up - down) / (2 * step)
    return g


def check_layer(layer, x: np.ndarray, rng) -> float:
    """Worst relative error over the input and every parameter of ``layer``.

    The scalar objective is <forward(x), R> for a fixed random R, so
    dObjective/dout = R.
    """
    out, cache = layer.forward(x)
    r = rng.normal(size=out.shape)
    dx, grads = layer.backward(r, cache)

    def objective():
        return float(np.sum(layer.forward(x)[0] * r))

    errs = []
    if dx is not None:
        errs.append(rel_error(dx, numeric_grad(objective, x)))
    for name, p in layer.params().items():
        errs.append(rel_error(grads[name], numeric_grad(objective, p)))
    return max(errs)


def check_cross_entropy(logits: np.ndarray, label: int) -> float:
    _, grad = cross_entropy(logits, label)
    return rel_error(grad, numeric_grad(lambda: cross_entropy(logits, label)[0], logits))


def random_linear(rng):
    n_in, n_out = rng.integers(2, 9, size=2)
    layer = Linear(int(n_in), int(n_out))
    layer.weight[...] = rng.normal(size=layer.weight.shape)
    layer.bias[...] = rng.normal(size=layer.bias.shape)
    return layer, rng.normal(size=(int(rng.integers(1, 5)), int(n_in)))


def random_relu_input(rng):
    x = rng.normal(size=(3, 7))
    # keep entries away from the kink where the derivative is undefined
    x[np.abs(x) < 1e-3] = 0.5
    return ReLU(), x


# (kernel, stride, pad) of the four convolution stages, first stage at 1 ms / 0.05 ms, 44.1 kHz
CONV_CONFIGS = {
    "conv1": (44, 2, 0),
    "conv2": (10, 5, 0),
    "conv3": (4, 2, 2),
    "conv4": (3, 1, 1),
}


def random_conv(rng, kernel: int, stride: int, pad: int):
    c_in, c_out = int(rng.integers(1, 4)), int(rng.integers(1, 4))
    layer = Conv1d(c_in, c_out, kernel, stride, pad)
    layer.weight[...] = rng.normal(size=layer.weight.shape)
    layer.bias[...] = rng.normal(size=layer.bias.shape)
    n = layer.min_input_length(1) + int(rng.integers(0, 3 * stride + 3))
    return layer, rng.normal(size=(c_in, n))


def random_pool_input(rng):
    return AdaptiveAvgPool(), rng.normal(size=(int(rng.integers(1, 5)), int(rng.integers(1, 9))))
