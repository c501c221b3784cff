"""Sequential CNN container and the default three-conv classifier stack."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import NumericalError, ShapeError
from .layers import Conv2D, Dense, Flatten, Layer, LeakyReLU, MaxPool2D, softmax, softmax_cross_entropy

__all__ = ["LayerRow", "Sequential", "build_cnn", "predict"]

# activations kept alive per micro-batch during backprop, in elements
_MICROBATCH_BUDGET = 48_000_000


@dataclass(frozen=True)
class LayerRow:
    name: str
    output_shape: tuple[int, ...]
    params: int


class Sequential:
    def __init__(self, layers: list[Layer], input_shape: tuple[int, ...], dtype=np.float32):
        if len(input_shape) == 2:
            input_shape = (*input_shape, 1)
        self.layers = layers
        self.input_shape = tuple(int(d) for d in input_shape)
        self.dtype = np.dtype(dtype)
        self._name_layers()

    def _name_layers(self) -> None:
        counts: dict[str, int] = {}
        labels = {"conv": "Conv", "lrelu": "Leaky ReLU", "pool": "Max_Pool", "dense": "Dense", "flatten": "Flatten"}
        for layer in self.layers:
            counts[layer.kind] = counts.get(layer.kind, 0) + 1
            base = labels[layer.kind]
            layer.name = base if layer.kind == "flatten" else f"{base}{counts[layer.kind]}"

    # -- shape bookkeeping -------------------------------------------------

    def summary(self) -> list[LayerRow]:
        """Output shape and trainable parameter count per layer (no allocation)."""
        shape = self.input_shape
        rows = [LayerRow("Input", shape, 0)]
        for layer in self.layers:
            n = layer.param_count(shape)
            shape = layer.output_shape(shape)
            rows.append(LayerRow(layer.name, shape, n))
        return rows

    def count_params(self) -> int:
        return sum(r.params for r in self.summary())

    @property
    def num_classes(self) -> int:
        return self.summary()[-1].output_shape[0]

    def build(self, seed: int) -> "Sequential":
        rng = np.random.Generator(np.random.PCG64(seed))
        shape = self.input_shape
        for layer in self.layers:
            layer.build(shape, rng, self.dtype)
            shape = layer.output_shape(shape)
        return self

    def parameters(self):
        """(layer index, name, array) for every trainable tensor, in a fixed order."""
        for i, layer in enumerate(self.layers):
            for k in sorted(layer.params):
                yield i, k, layer.params[k]

    def param_dict(self) -> dict[str, np.ndarray]:
        return {f"{i}.{k}": v for i, k, v in self.parameters()}

    def grad_dict(self) -> dict[str, np.ndarray]:
        return {f"{i}.{k}": self.layers[i].grads[k] for i, k, _ in self.parameters()}

    def zero_grads(self) -> None:
        for layer in self.layers:
            layer.zero_grads()

    # -- computation -------------------------------------------------------

    def _prepare(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x)
        if x.ndim == 3 and x.shape[1:] == self.input_shape[:2]:
            x = x[..., None]
        if x.shape[1:] != self.input_shape:
            raise ShapeError(f"model expects inputs of shape {self.input_shape}, got {x.shape[1:]}")
        return x.astype(self.dtype, copy=False)

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        h = self._prepare(x)
        for layer in self.layers:
            h = layer.forward(h, train=train)
        if not np.all(np.isfinite(h)):
            raise NumericalError("non-finite logits in forward pass")
        return h

    def backward(self, dlogits: np.ndarray) -> None:
        g = dlogits
        for layer in reversed(self.layers):
            g = layer.backward(g)

    def _micro_batch(self) -> int:
        shape = self.input_shape
        cached = 0
        im2col = 0
        for layer in self.layers:
            if isinstance(layer, Conv2D):
                im2col = max(im2col, 9 * int(np.prod(shape)))
            shape = layer.output_shape(shape)
            cached += int(np.prod(shape))
        return max(1, _MICROBATCH_BUDGET // (cached + 2 * im2col))

    def accumulate_gradients(self, x: np.ndarray, y: np.ndarray) -> tuple[float, int]:
        """Add batch-mean loss gradients into the layer grads.

        Large inputs are split into micro-batches whose gradients are weighted
        and summed, so memory stays bounded without changing the batch
        semantics.  Returns (mean loss, number correct).
        """
        x = np.asarray(x)
        y = np.asarray(y)
        n = len(y)
        step = self._micro_batch()
        total = 0.0
        correct = 0
        for s in range(0, n, step):
            xs, ys = x[s : s + step], y[s : s + step]
            logits = self.forward(xs, train=True)
            loss, dlogits = softmax_cross_entropy(logits, ys)
            frac = len(ys) / n
            self.backward((dlogits * frac).astype(self.dtype, copy=False))
            total += loss * frac
            correct += int(np.sum(logits.argmax(axis=1) == ys))
        for layer in self.layers:
            layer._cache = None
        return total, correct

    def predict_proba(self, x: np.ndarray, batch_size: int = 256) -> np.ndarray:
        x = np.asarray(x)
        step = min(batch_size, self._micro_batch())
        out = [softmax(self.forward(x[s : s + step])) for s in range(0, len(x), step)]
        return np.concatenate(out, axis=0) if out else np.zeros((0, self.num_classes))

    def evaluate(self, x: np.ndarray, y: np.ndarray, batch_size: int = 256) -> tuple[float, float]:
        """(mean cross-entropy, accuracy) without touching gradients."""
        p = self.predict_proba(x, batch_size)
        y = np.asarray(y)
        if len(y) == 0:
            return float("nan"), float("nan")
        picked = np.maximum(p[np.arange(len(y)), y], np.finfo(np.float64).tiny)
        return float(-np.mean(np.log(picked))), float(np.mean(p.argmax(axis=1) == y))


def build_cnn(
    input_shape: tuple[int, ...],
    num_classes: int,
    seed: int = 0,
    filters: tuple[int, ...] = (64, 128, 64),
    dense_units: int = 256,
    alpha: float = 0.1,
    dtype=np.float32,
    allocate: bool = True,
) -> Sequential:
    """Conv-LeakyReLU-MaxPool blocks, Flatten, Dense-LeakyReLU, Dense.

    He-uniform weights and zero biases drawn from ``seed``.  With
    ``allocate=False`` only the shape ledger is available.
    """
    layers: list[Layer] = []
    for f in filters:
        layers += [Conv2D(f), LeakyReLU(alpha), MaxPool2D()]
    layers += [Flatten(), Dense(dense_units), LeakyReLU(alpha), Dense(num_classes)]
    model = Sequential(layers, input_shape, dtype)
    return model.build(seed) if allocate else model


def predict(model: Sequential, m) -> np.ndarray:
    """Class probabilities for one feature matrix (FeatureMatrix or array)."""
    values = getattr(m, "values", m)
    return model.predict_proba(np.asarray(values)[None])[0]
