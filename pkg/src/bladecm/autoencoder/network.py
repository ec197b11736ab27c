"""A sequential stack of layers with shape checking, reverse-mode gradients and Adam."""
from __future__ import annotations

from typing import Sequence

import numpy as np

from ..errors import ShapeMismatch
from .layers import Layer, LayerSpec, build_layer


class Network:
    """Layers built from specs for a fixed per-sample input shape."""

    def __init__(self, specs: Sequence[LayerSpec], input_shape):
        self.specs = tuple(specs)
        self.input_shape = tuple(input_shape)
        self.layers: list[Layer] = []
        shape = self.input_shape
        for spec in self.specs:
            layer = build_layer(spec, shape)
            self.layers.append(layer)
            shape = layer.out_shape
        self.output_shape = shape

    def init_params(self, rng) -> list[dict]:
        return [layer.init_params(rng) for layer in self.layers]

    def forward(self, params, x):
        caches = []
        for layer, p in zip(self.layers, params):
            x, cache = layer.forward(p, x)
            caches.append(cache)
        return x, caches

    def predict(self, params, x):
        for layer, p in zip(self.layers, params):
            if layer.spec.kind == "LSTM":
                x, _ = layer.forward(p, x, keep=False)
            else:
                x, _ = layer.forward(p, x)
        return x

    def backward(self, params, dy, caches):
        grads = [None] * len(self.layers)
        for i in range(len(self.layers) - 1, -1, -1):
            dy, grads[i] = self.layers[i].backward(params[i], dy, caches[i])
        return dy, grads


def param_count(params) -> int:
    return sum(v.size for p in params for v in p.values())


def flatten_params(params) -> np.ndarray:
    return np.concatenate([p[k].ravel() for p in params for k in sorted(p)]) if params else np.zeros(0)


def unflatten_like(vec, params) -> list[dict]:
    out, pos = [], 0
    for p in params:
        q = {}
        for k in sorted(p):
            n = p[k].size
            q[k] = vec[pos:pos + n].reshape(p[k].shape)
            pos += n
        out.append(q)
    return out


class Adam:
    def __init__(self, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = [{k: np.zeros_like(v) for k, v in p.items()} for p in params]
        self.v = [{k: np.zeros_like(v) for k, v in p.items()} for p in params]
        self.t = 0

    def step(self, params, grads):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        corr1 = 1.0 - b1 ** self.t
        corr2 = 1.0 - b2 ** self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            for k in p:
                m[k] *= b1
                m[k] += (1.0 - b1) * g[k]
                v[k] *= b2
                v[k] += (1.0 - b2) * g[k] * g[k]
                p[k] -= self.lr * (m[k] / corr1) / (np.sqrt(v[k] / corr2) + self.eps)


def check_output_shape(net: Network, expected):
    if net.output_shape != tuple(expected):
        raise ShapeMismatch(f"stack maps {net.input_shape} to {net.output_shape}, expected {tuple(expected)}")
