"""Binary model checkpoints.

Layout (little-endian)::

    b"CSNN"  uint32 version  uint32 n_layers  uint32 H W C  uint8 has_adam
    per layer: uint8 kind  float32 alpha  uint8 n_params
               per param: uint8 ndim  uint32 dims[ndim]
    float32 weights, layer by layer, params in name order, row-major
    if has_adam: uint64 step, then float32 first and second moments in the
    same order as the weights

A JSON sidecar ``<path>.json`` carries the human-readable hyperparameters.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from ..errors import FormatError
from .layers import Conv2D, Dense, Flatten, LeakyReLU, MaxPool2D
from .model import Sequential
from .optim import Adam

__all__ = ["save_checkpoint", "load_checkpoint", "MAGIC", "VERSION"]

MAGIC = b"CSNN"
VERSION = 1
_KINDS = {"conv": 1, "lrelu": 2, "pool": 3, "flatten": 4, "dense": 5}


def save_checkpoint(path, model: Sequential, optimizer: Adam | None = None, hyperparams: dict | None = None) -> None:
    path = Path(path)
    names = [f"{i}.{k}" for i, k, _ in model.parameters()]
    out = bytearray()
    out += MAGIC
    out += struct.pack("<II", VERSION, len(model.layers))
    out += struct.pack("<III", *model.input_shape)
    out += struct.pack("<B", 1 if optimizer is not None else 0)
    for layer in model.layers:
        alpha = getattr(layer, "alpha", 0.0)
        out += struct.pack("<BfB", _KINDS[layer.kind], alpha, len(layer.params))
        for k in sorted(layer.params):
            shape = layer.params[k].shape
            out += struct.pack("<B", len(shape)) + struct.pack(f"<{len(shape)}I", *shape)
    for _, _, p in model.parameters():
        out += np.ascontiguousarray(p, dtype="<f4").tobytes()
    if optimizer is not None:
        out += struct.pack("<Q", optimizer.t)
        for n, (_, _, p) in zip(names, model.parameters()):
            m, v = optimizer.state.get(n, (np.zeros_like(p), np.zeros_like(p)))
            out += np.ascontiguousarray(m, dtype="<f4").tobytes()
            out += np.ascontiguousarray(v, dtype="<f4").tobytes()
    path.write_bytes(bytes(out))

    side = {"input_shape": list(model.input_shape), "num_classes": model.num_classes}
    if optimizer is not None:
        side["adam"] = {"lr": optimizer.lr, "beta1": optimizer.beta1, "beta2": optimizer.beta2, "eps": optimizer.eps}
    if hyperparams:
        side["hyperparameters"] = hyperparams
    Path(str(path) + ".json").write_text(json.dumps(side, indent=2, sort_keys=True) + "\n")


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, fmt: str):
        size = struct.calcsize(fmt)
        if self.pos + size > len(self.data):
            raise FormatError("checkpoint truncated", offset=self.pos)
        vals = struct.unpack_from(fmt, self.data, self.pos)
        self.pos += size
        return vals

    def array(self, shape) -> np.ndarray:
        n = int(np.prod(shape))
        end = self.pos + 4 * n
        if end > len(self.data):
            raise FormatError("checkpoint payload truncated", offset=self.pos)
        a = np.frombuffer(self.data, dtype="<f4", count=n, offset=self.pos).reshape(shape).astype(np.float32)
        self.pos = end
        return a


def load_checkpoint(path) -> tuple[Sequential, Adam | None, dict]:
    """Rebuild (model, optimizer or None, sidecar dict) from disk."""
    path = Path(path)
    data = path.read_bytes()
    if data[:4] != MAGIC:
        raise FormatError(f"{path} is not a CSNN checkpoint", offset=0)
    rd = _Reader(data)
    rd.pos = 4
    version, n_layers = rd.take("<II")
    if version != VERSION:
        raise FormatError(f"unsupported checkpoint version {version}", offset=4)
    input_shape = rd.take("<III")
    (has_adam,) = rd.take("<B")

    layers = []
    shapes = []
    for _ in range(n_layers):
        kind, alpha, n_params = rd.take("<BfB")
        pshapes = {}
        for k in ("b", "w")[:n_params]:
            (ndim,) = rd.take("<B")
            pshapes[k] = rd.take(f"<{ndim}I")
        if kind == _KINDS["conv"]:
            w = pshapes["w"]
            layers.append(Conv2D(w[3], w[0]))
        elif kind == _KINDS["dense"]:
            layers.append(Dense(pshapes["w"][1]))
        elif kind == _KINDS["lrelu"]:
            layers.append(LeakyReLU(float(np.float32(alpha))))
        elif kind == _KINDS["pool"]:
            layers.append(MaxPool2D())
        elif kind == _KINDS["flatten"]:
            layers.append(Flatten())
        else:
            raise FormatError(f"unknown layer kind {kind}", offset=rd.pos)
        shapes.append(pshapes)

    model = Sequential(layers, tuple(input_shape), np.float32)
    for layer, pshapes in zip(layers, shapes):
        for k in sorted(pshapes):
            layer.params[k] = rd.array(pshapes[k])
        layer.zero_grads()

    opt = None
    sidecar_path = Path(str(path) + ".json")
    side = json.loads(sidecar_path.read_text()) if sidecar_path.exists() else {}
    if has_adam:
        hp = side.get("adam", {})
        opt = Adam(hp.get("lr", 1e-5), hp.get("beta1", 0.9), hp.get("beta2", 0.999), hp.get("eps", 1e-8))
        (opt.t,) = rd.take("<Q")
        for i, k, p in model.parameters():
            m = rd.array(p.shape)
            v = rd.array(p.shape)
            opt.state[f"{i}.{k}"] = (m, v)
    if rd.pos != len(data):
        raise FormatError("trailing bytes after checkpoint payload", offset=rd.pos)
    return model, opt, side
