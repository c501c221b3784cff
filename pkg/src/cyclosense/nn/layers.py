"""Layer kernels and layer objects for the convolutional classifier.

Arrays are channels-last.  Kernels accept a single example (H, W, C) or a
batch (B, H, W, C); layer objects always work on batches.
"""

from __future__ import annotations

import math

import numpy as np

from ..errors import ShapeError

__all__ = [
    "conv2d_forward",
    "conv2d_backward",
    "leaky_relu",
    "leaky_relu_backward",
    "maxpool2x2",
    "maxpool2x2_backward",
    "dense_forward",
    "dense_backward",
    "softmax",
    "softmax_cross_entropy",
    "Layer",
    "Conv2D",
    "LeakyReLU",
    "MaxPool2D",
    "Flatten",
    "Dense",
]


def _as_batch(x: np.ndarray) -> tuple[np.ndarray, bool]:
    if x.ndim == 3:
        return x[None], True
    if x.ndim == 4:
        return x, False
    raise ShapeError(f"expected (H, W, C) or (B, H, W, C), got shape {x.shape}")


def _live_taps(k: int, n: int) -> list[int]:
    # kernel offsets whose receptive field is not entirely zero padding
    c = k // 2
    return [p for p in range(k) if abs(p - c) < n]


def _im2col(x: np.ndarray, kh: int, kw: int):
    b, h, w, c = x.shape
    ph, pw = kh // 2, kw // 2
    xp = np.pad(x, ((0, 0), (ph, ph), (pw, pw), (0, 0)))
    rows, cols = _live_taps(kh, h), _live_taps(kw, w)
    patches = np.empty((b, h, w, len(rows), len(cols), c), dtype=x.dtype)
    for i, p in enumerate(rows):
        for j, q in enumerate(cols):
            patches[:, :, :, i, j, :] = xp[:, p : p + h, q : q + w, :]
    return patches.reshape(b * h * w, -1), rows, cols


def _check_conv(x: np.ndarray, w: np.ndarray, b: np.ndarray | None = None) -> None:
    if w.ndim != 4 or w.shape[0] % 2 == 0 or w.shape[1] % 2 == 0:
        raise ShapeError(f"kernel must be (kh, kw, Cin, Cout) with odd kh, kw; got {w.shape}")
    if x.shape[-1] != w.shape[2]:
        raise ShapeError(f"input has {x.shape[-1]} channels but kernel expects {w.shape[2]}")
    if b is not None and b.shape != (w.shape[3],):
        raise ShapeError(f"bias shape {b.shape} does not match {w.shape[3]} output channels")


def conv2d_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Stride-1 'same' convolution (cross-correlation) with zero padding.

    out[i, j, c] = sum_{p, l, k} w[p, l, k, c] * xpad[i + p, j + l, k] + b[c]
    """
    xb, single = _as_batch(x)
    _check_conv(xb, w, b)
    bsz, h, wd, _ = xb.shape
    cout = w.shape[3]
    cols, rows, taps = _im2col(xb, w.shape[0], w.shape[1])
    wmat = w[rows][:, taps].reshape(-1, cout)
    out = (cols @ wmat + b).reshape(bsz, h, wd, cout)
    return out[0] if single else out


def conv2d_backward(dout: np.ndarray, x: np.ndarray, w: np.ndarray):
    """Gradients (dx, dw, db) of ``conv2d_forward`` given the upstream grad."""
    xb, single = _as_batch(x)
    db_, _ = _as_batch(dout)
    _check_conv(xb, w)
    kh, kw, cin, cout = w.shape
    bsz, h, wd, _ = xb.shape
    if db_.shape != (bsz, h, wd, cout):
        raise ShapeError(f"upstream gradient shape {dout.shape} does not match the forward output")
    cols, rows, taps = _im2col(xb, kh, kw)
    g = db_.reshape(-1, cout)
    dw = np.zeros_like(w)
    dw[np.ix_(rows, taps)] = (cols.T @ g).reshape(len(rows), len(taps), cin, cout)
    dbias = g.sum(axis=0)
    wmat = w[rows][:, taps].reshape(-1, cout)
    dcols = (g @ wmat.T).reshape(bsz, h, wd, len(rows), len(taps), cin)
    ph, pw = kh // 2, kw // 2
    dxp = np.zeros((bsz, h + 2 * ph, wd + 2 * pw, cin), dtype=dcols.dtype)
    for i, p in enumerate(rows):
        for j, q in enumerate(taps):
            dxp[:, p : p + h, q : q + wd, :] += dcols[:, :, :, i, j, :]
    dx = dxp[:, ph : ph + h, pw : pw + wd, :]
    return (dx[0] if single else dx), dw, dbias


def leaky_relu(x: np.ndarray, alpha: float = 0.1) -> np.ndarray:
    if 0.0 <= alpha <= 1.0:
        return np.maximum(x, x * np.asarray(alpha, dtype=x.dtype))
    return np.where(x >= 0, x, alpha * x)


def leaky_relu_backward(dout: np.ndarray, x: np.ndarray, alpha: float = 0.1) -> np.ndarray:
    # slope 1 at exactly zero
    g = np.array(dout, copy=True)
    g[x < 0] *= alpha
    return g


def _quadrants(a: np.ndarray):
    return a[:, 0::2, 0::2], a[:, 0::2, 1::2], a[:, 1::2, 0::2], a[:, 1::2, 1::2]


def maxpool2x2(x: np.ndarray):
    """2x2 / stride-2 max pooling in ceil mode.

    Odd edges get a shrunken window.  Returns the pooled array and the index
    (0..3, row-major inside the window) of each maximum; ties resolve to the
    first index.
    """
    xb, single = _as_batch(x)
    b, h, w, c = xb.shape
    h2, w2 = -(-h // 2), -(-w // 2)
    if (h2 * 2, w2 * 2) != (h, w):
        padded = np.full((b, h2 * 2, w2 * 2, c), -np.inf, dtype=xb.dtype)
        padded[:, :h, :w] = xb
    else:
        padded = xb
    q0, q1, q2, q3 = _quadrants(padded)
    out = np.maximum(np.maximum(q0, q1), np.maximum(q2, q3))
    idx = np.full(out.shape, 3, dtype=np.uint8)
    idx[q2 == out] = 2
    idx[q1 == out] = 1
    idx[q0 == out] = 0
    if single:
        return out[0], idx[0]
    return out, idx


def maxpool2x2_backward(dout: np.ndarray, argmax: np.ndarray, input_shape: tuple[int, ...]) -> np.ndarray:
    single = len(input_shape) == 3
    db_ = dout[None] if single else dout
    am = argmax[None] if single else argmax
    shape = (1, *input_shape) if single else tuple(input_shape)
    b, h, w, c = shape
    h2, w2 = db_.shape[1], db_.shape[2]
    full = np.zeros((b, h2 * 2, w2 * 2, c), dtype=db_.dtype)
    for k, q in enumerate(_quadrants(full)):
        np.copyto(q, db_, where=am == k)
    dx = full[:, :h, :w]
    return dx[0] if single else dx


def dense_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    if x.shape[-1] != w.shape[0] or b.shape != (w.shape[1],):
        raise ShapeError(f"dense shapes disagree: x {x.shape}, w {w.shape}, b {b.shape}")
    return x @ w + b


def dense_backward(dout: np.ndarray, x: np.ndarray, w: np.ndarray):
    x2 = np.atleast_2d(x)
    g = np.atleast_2d(dout)
    if g.shape != (x2.shape[0], w.shape[1]):
        raise ShapeError(f"upstream gradient shape {dout.shape} does not match the forward output")
    dx = g @ w.T
    return (dx.reshape(x.shape)), x2.T @ g, g.sum(axis=0)


def softmax(logits: np.ndarray) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_cross_entropy(logits: np.ndarray, labels):
    """Mean categorical cross-entropy and its gradient w.r.t. the logits.

    A 1-D ``logits`` with an integer label gives loss = -log p[label] and
    dlogits = p - onehot(label).  For a batch the loss is the batch mean and
    the gradient is scaled by 1 / batch accordingly.
    """
    single = np.ndim(logits) == 1
    z = np.atleast_2d(logits)
    y = np.atleast_1d(np.asarray(labels, dtype=np.int64))
    if y.shape != (z.shape[0],):
        raise ShapeError("one label per row of logits is required")
    p = softmax(z)
    n = z.shape[0]
    picked = p[np.arange(n), y]
    loss = float(-np.mean(np.log(np.maximum(picked, np.finfo(np.float64).tiny))))
    grad = p.copy()
    grad[np.arange(n), y] -= 1.0
    grad /= n
    grad = grad.astype(np.result_type(logits, np.float32), copy=False)
    return loss, (grad[0] if single else grad)


# ---------------------------------------------------------------------------
# layer objects


class Layer:
    name: str = ""
    kind: str = ""

    def __init__(self):
        self.params: dict[str, np.ndarray] = {}
        self.grads: dict[str, np.ndarray] = {}
        self._cache = None

    def output_shape(self, in_shape: tuple[int, ...]) -> tuple[int, ...]:
        return in_shape

    def param_count(self, in_shape: tuple[int, ...]) -> int:
        return 0

    def build(self, in_shape: tuple[int, ...], rng: np.random.Generator, dtype) -> None:
        pass

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        raise NotImplementedError

    def backward(self, dout: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def zero_grads(self) -> None:
        for k, v in self.params.items():
            self.grads[k] = np.zeros_like(v)


def _he_uniform(rng, shape, fan_in, dtype):
    lim = math.sqrt(6.0 / fan_in)
    return rng.uniform(-lim, lim, size=shape).astype(dtype)


class Conv2D(Layer):
    kind = "conv"

    def __init__(self, out_channels: int, kernel: int = 3):
        super().__init__()
        self.out_channels = out_channels
        self.kernel = kernel

    def output_shape(self, in_shape):
        h, w, _ = in_shape
        return (h, w, self.out_channels)

    def param_count(self, in_shape):
        return self.kernel * self.kernel * in_shape[2] * self.out_channels + self.out_channels

    def build(self, in_shape, rng, dtype):
        cin = in_shape[2]
        k = self.kernel
        self.params["w"] = _he_uniform(rng, (k, k, cin, self.out_channels), k * k * cin, dtype)
        self.params["b"] = np.zeros(self.out_channels, dtype=dtype)
        self.zero_grads()

    def forward(self, x, train=False):
        if train:
            self._cache = x
        return conv2d_forward(x, self.params["w"], self.params["b"])

    def backward(self, dout):
        dx, dw, db = conv2d_backward(dout, self._cache, self.params["w"])
        self.grads["w"] += dw
        self.grads["b"] += db
        return dx


class LeakyReLU(Layer):
    kind = "lrelu"

    def __init__(self, alpha: float = 0.1):
        super().__init__()
        self.alpha = alpha

    def forward(self, x, train=False):
        if train:
            self._cache = x
        return leaky_relu(x, self.alpha)

    def backward(self, dout):
        return leaky_relu_backward(dout, self._cache, self.alpha)


class MaxPool2D(Layer):
    kind = "pool"

    def output_shape(self, in_shape):
        h, w, c = in_shape
        return (-(-h // 2), -(-w // 2), c)

    def forward(self, x, train=False):
        out, idx = maxpool2x2(x)
        if train:
            self._cache = (idx, x.shape)
        return out

    def backward(self, dout):
        idx, shape = self._cache
        return maxpool2x2_backward(dout, idx, shape)


class Flatten(Layer):
    kind = "flatten"

    def output_shape(self, in_shape):
        return (int(np.prod(in_shape)),)

    def forward(self, x, train=False):
        if train:
            self._cache = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, dout):
        return dout.reshape(self._cache)


class Dense(Layer):
    kind = "dense"

    def __init__(self, out_dim: int):
        super().__init__()
        self.out_dim = out_dim

    def output_shape(self, in_shape):
        return (self.out_dim,)

    def param_count(self, in_shape):
        return in_shape[0] * self.out_dim + self.out_dim

    def build(self, in_shape, rng, dtype):
        self.params["w"] = _he_uniform(rng, (in_shape[0], self.out_dim), in_shape[0], dtype)
        self.params["b"] = np.zeros(self.out_dim, dtype=dtype)
        self.zero_grads()

    def forward(self, x, train=False):
        if train:
            self._cache = x
        return dense_forward(x, self.params["w"], self.params["b"])

    def backward(self, dout):
        dx, dw, db = dense_backward(dout, self._cache, self.params["w"])
        self.grads["w"] += dw
        self.grads["b"] += db
        return dx
