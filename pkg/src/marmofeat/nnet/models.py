"""The three classifier architectures and their shared container."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from ..errors import NonFiniteActivationError
from .layers import AdaptiveAvgPool, Conv1d, Linear, ReLU, batch_cross_entropy


@dataclass(frozen=True)
class MLPSpec:
    input_dim: int
    n_classes: int
    hidden: tuple[int, ...] = (128, 64, 32)
    activation: str = "relu"
    kind: str = field(default="mlp", init=False)


@dataclass(frozen=True)
class LinearProbeSpec:
    input_dim: int
    n_classes: int
    kind: str = field(default="probe", init=False)


@dataclass(frozen=True)
class CNNSpec:
    """Raw-waveform network.

    ``conv_layers`` lists (kernel, stride, filters, pad) for the layers after
    the first; the first layer's geometry comes from milliseconds and the
    sample rate.
    """

    n_classes: int
    sample_rate: int
    first_kernel_ms: float = 1.0
    first_stride_ms: float = 0.05
    first_filters: int = 128
    conv_layers: tuple[tuple[int, int, int, int], ...] = ((10, 5, 256, 0), (4, 2, 512, 2), (3, 1, 512, 1))
    fc_hidden: tuple[int, ...] = (512, 256)
    kind: str = field(default="cnn", init=False)

    @classmethod
    def for_sample_rate(cls, sample_rate: int, n_classes: int, **kw) -> "CNNSpec":
        """First-layer width/shift by rate: 1/0.05 ms above 16 kHz, 10/0.5 ms at or below."""
        if sample_rate > 16000:
            return cls(n_classes, sample_rate, 1.0, 0.05, **kw)
        return cls(n_classes, sample_rate, 10.0, 0.5, **kw)

    @property
    def first_kernel(self) -> int:
        return max(1, int(round(self.first_kernel_ms * self.sample_rate / 1000)))

    @property
    def first_stride(self) -> int:
        return max(1, int(round(self.first_stride_ms * self.sample_rate / 1000)))


Spec = MLPSpec | LinearProbeSpec | CNNSpec


def spec_to_dict(spec) -> dict:
    d = asdict(spec)
    for key, value in d.items():
        if isinstance(value, tuple):
            d[key] = [list(v) if isinstance(v, tuple) else v for v in value]
    return d


def spec_from_dict(d: dict):
    d = dict(d)
    kind = d.pop("kind")
    if kind == "mlp":
        d["hidden"] = tuple(d["hidden"])
        return MLPSpec(**d)
    if kind == "probe":
        return LinearProbeSpec(**d)
    if kind == "cnn":
        d["conv_layers"] = tuple(tuple(c) for c in d["conv_layers"])
        d["fc_hidden"] = tuple(d["fc_hidden"])
        return CNNSpec(**d)
    raise ValueError(f"unknown model kind {kind!r}")


def build_layers(spec, dtype=np.float64) -> list:
    if isinstance(spec, LinearProbeSpec):
        return [Linear(spec.input_dim, spec.n_classes, dtype)]
    if isinstance(spec, MLPSpec):
        layers, width = [], spec.input_dim
        for h in spec.hidden:
            layers += [Linear(width, h, dtype), ReLU()]
            width = h
        return layers + [Linear(width, spec.n_classes, dtype)]
    if isinstance(spec, CNNSpec):
        layers = [Conv1d(1, spec.first_filters, spec.first_kernel, spec.first_stride,
                         dtype=dtype, input_grad=False), ReLU()]
        channels = spec.first_filters
        for kernel, stride, filters, pad in spec.conv_layers:
            layers += [Conv1d(channels, filters, kernel, stride, pad, dtype=dtype), ReLU()]
            channels = filters
        layers.append(AdaptiveAvgPool())
        width = channels
        for h in spec.fc_hidden:
            layers += [Linear(width, h, dtype), ReLU()]
            width = h
        return layers + [Linear(width, spec.n_classes, dtype)]
    raise TypeError(f"not a model spec: {spec!r}")


class Model:
    """Parameters, optional input standardisation and training history.

    Vector models (MLP, probe) take (batch, dim) arrays; the CNN takes one
    1-D waveform at a time and zero-pads it symmetrically up to its minimum
    length.
    """

    def __init__(self, spec, dtype=np.float64):
        self.spec = spec
        self.dtype = np.dtype(dtype)
        self.layers = build_layers(spec, self.dtype)
        self.input_mean: np.ndarray | None = None
        self.input_scale: np.ndarray | None = None
        self.history: list[dict] = []
        self.best_epoch: int | None = None

    @property
    def is_sequence_model(self) -> bool:
        return isinstance(self.spec, CNNSpec)

    @property
    def n_classes(self) -> int:
        return self.spec.n_classes

    def named_params(self) -> dict[str, np.ndarray]:
        out = {}
        for i, layer in enumerate(self.layers):
            for name, p in layer.params().items():
                out[f"layer{i}.{name}"] = p
        return out

    def copy_params(self) -> dict[str, np.ndarray]:
        return {k: v.copy() for k, v in self.named_params().items()}

    def load_params(self, values: dict[str, np.ndarray]) -> None:
        params = self.named_params()
        if set(values) != set(params):
            raise ValueError("parameter names do not match the architecture")
        for name, p in params.items():
            if values[name].shape != p.shape:
                raise ValueError(f"{name}: shape {values[name].shape} != {p.shape}")
            p[...] = values[name]

    def set_standardizer(self, mean: np.ndarray, scale: np.ndarray) -> None:
        self.input_mean = np.asarray(mean, dtype=np.float64)
        self.input_scale = np.asarray(scale, dtype=np.float64)

    @property
    def min_waveform_length(self) -> int:
        need = 1
        for layer in reversed(self.layers):
            if isinstance(layer, Conv1d):
                need = layer.min_input_length(need)
        return need

    def _prepare_vectors(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim == 1:
            x = x[None, :]
        if x.shape[1] != self.spec.input_dim:
            raise ValueError(f"input dim {x.shape[1]} != model input dim {self.spec.input_dim}")
        if self.input_mean is not None:
            x = (x - self.input_mean) / self.input_scale
        return x.astype(self.dtype, copy=False)

    def _prepare_waveform(self, w) -> np.ndarray:
        w = np.asarray(getattr(w, "samples", w), dtype=self.dtype)
        if w.ndim != 1 or w.size == 0:
            raise ValueError("waveform input must be a non-empty 1-D array")
        need = self.min_waveform_length
        if w.size < need:
            extra = need - w.size
            w = np.pad(w, (extra // 2, extra - extra // 2))
        return w[None, :]

    def _run(self, x, keep_caches: bool):
        caches = []
        for i, layer in enumerate(self.layers):
            x, cache = layer.forward(x)
            if not np.all(np.isfinite(x)):
                raise NonFiniteActivationError(i, layer.name)
            if keep_caches:
                caches.append(cache)
        return x, caches

    def logits(self, x) -> np.ndarray:
        """Logits for one input (1-D) or a batch of vectors (2-D)."""
        if self.is_sequence_model:
            out, _ = self._run(self._prepare_waveform(x), False)
            return out[0]
        squeeze = np.asarray(x).ndim == 1
        out, _ = self._run(self._prepare_vectors(x), False)
        return out[0] if squeeze else out

    def _backward(self, dout, caches) -> dict[str, np.ndarray]:
        grads = {}
        for i in range(len(self.layers) - 1, -1, -1):
            dout, g = self.layers[i].backward(dout, caches[i])
            for name, value in g.items():
                grads[f"layer{i}.{name}"] = value
        return grads

    def loss_and_gradients(self, inputs, labels) -> tuple[float, dict[str, np.ndarray]]:
        """Mean cross-entropy over the batch and its parameter gradients."""
        labels = np.asarray(labels, dtype=np.int64)
        if len(labels) == 0:
            raise ValueError("empty batch")
        if not self.is_sequence_model:
            x = self._prepare_vectors(inputs)
            if x.shape[0] != labels.size:
                raise ValueError("inputs and labels differ in length")
            out, caches = self._run(x, True)
            loss, dlogits = batch_cross_entropy(out, labels)
            return loss, self._backward(dlogits.astype(self.dtype), caches)

        if len(inputs) != labels.size:
            raise ValueError("inputs and labels differ in length")
        total = None
        loss_sum = 0.0
        # Fixed summation order keeps accumulation bit-reproducible.
        for w, label in zip(inputs, labels):
            out, caches = self._run(self._prepare_waveform(w), True)
            loss, dlogits = batch_cross_entropy(out, label[None])
            grads = self._backward(dlogits.astype(self.dtype), caches)
            loss_sum += loss
            if total is None:
                total = grads
            else:
                for k in total:
                    total[k] += grads[k]
        n = labels.size
        return loss_sum / n, {k: v / n for k, v in total.items()}


TrainedModel = Model


def init_model(spec, seed: int, dtype=np.float64) -> Model:
    """Fresh model: He-uniform weights (std sqrt(2/fan_in)), zero biases."""
    model = Model(spec, dtype)
    rng = np.random.default_rng(seed)
    for layer in model.layers:
        if layer.has_params:
            limit = np.sqrt(6.0 / layer.fan_in)
            layer.weight[...] = rng.uniform(-limit, limit, size=layer.weight.shape)
            layer.bias[...] = 0.0
    return model


def forward(model: Model, x) -> np.ndarray:
    return model.logits(x)


def compute_gradients(model: Model, inputs, labels) -> dict[str, np.ndarray]:
    return model.loss_and_gradients(inputs, labels)[1]


def predict_batch(model: Model, inputs) -> np.ndarray:
    """Arg-max class per input; ties resolve to the lowest index."""
    if model.is_sequence_model:
        return np.array([int(np.argmax(model.logits(w))) for w in inputs], dtype=np.int64)
    logits = model.logits(np.atleast_2d(np.asarray(inputs, dtype=np.float64)))
    return np.argmax(logits, axis=1).astype(np.int64)
