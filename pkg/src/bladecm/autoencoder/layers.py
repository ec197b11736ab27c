"""Layers with explicit forward and reverse-mode passes.

Tensors are batch-first: sequence layers take ``(batch, time, features)``.
Every ``forward`` returns the output and a cache consumed by ``backward``,
which returns the input gradient and a dict of parameter gradients keyed
like the layer's parameters.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..errors import ShapeMismatch

ACTIVATIONS = ("tanh", "linear")


@dataclass(frozen=True)
class LayerSpec:
    kind: str
    units: int = 0
    kernel: int = 1
    stride: int = 1
    shape: tuple = ()
    activation: Optional[str] = "tanh"

    def __post_init__(self):
        if self.kind not in LAYER_TYPES:
            raise ValueError(f"unknown layer kind {self.kind!r}")
        if self.kind in ("Dense", "Conv1D", "LSTM") and self.units < 1:
            raise ValueError(f"{self.kind} needs a positive width")
        if self.kind == "Conv1D" and (self.kernel < 1 or self.stride < 1):
            raise ValueError("Conv1D kernel and stride must be positive")
        if self.kind == "Reshape":
            shape = tuple(int(s) for s in self.shape)
            if len(shape) != 2 or min(shape) < 1:
                raise ValueError("Reshape needs (time_steps, channels)")
            object.__setattr__(self, "shape", shape)
        if self.kind in ("Dense", "Conv1D"):
            if self.activation not in ACTIVATIONS:
                raise ValueError(f"activation must be one of {ACTIVATIONS}")
        else:
            object.__setattr__(self, "activation", None)


def Dense(units, activation="tanh"):
    return LayerSpec("Dense", units=units, activation=activation)


def Conv1D(filters, kernel, stride=1, activation="tanh"):
    return LayerSpec("Conv1D", units=filters, kernel=kernel, stride=stride, activation=activation)


def LSTM(hidden):
    return LayerSpec("LSTM", units=hidden)


def Flatten():
    return LayerSpec("Flatten")


def Reshape(time_steps, channels):
    return LayerSpec("Reshape", shape=(time_steps, channels))


def _glorot(rng, shape, fan_in, fan_out):
    s = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-s, s, size=shape)


def _act(y, activation):
    return np.tanh(y) if activation == "tanh" else y


def _act_grad(dy, y, activation):
    return dy * (1.0 - y * y) if activation == "tanh" else dy


class Layer:
    spec: LayerSpec
    in_shape: tuple
    out_shape: tuple
    param_names: tuple = ()

    def init_params(self, rng) -> dict:
        return {}

    def _check(self, x):
        if x.shape[1:] != self.in_shape:
            raise ShapeMismatch(f"{self.spec.kind} expects {self.in_shape}, got {x.shape[1:]}")


class DenseLayer(Layer):
    """Affine map on the last axis; on sequences it is applied at every step."""

    param_names = ("W", "b")

    def __init__(self, spec, in_shape):
        self.spec, self.in_shape = spec, tuple(in_shape)
        self.out_shape = self.in_shape[:-1] + (spec.units,)

    def init_params(self, rng):
        f = self.in_shape[-1]
        return {"W": _glorot(rng, (f, self.spec.units), f, self.spec.units),
                "b": np.zeros(self.spec.units)}

    def forward(self, p, x):
        self._check(x)
        y = _act(x @ p["W"] + p["b"], self.spec.activation)
        return y, (x, y)

    def backward(self, p, dy, cache):
        x, y = cache
        da = _act_grad(dy, y, self.spec.activation)
        f = x.shape[-1]
        a2 = da.reshape(-1, self.spec.units)
        grads = {"W": x.reshape(-1, f).T @ a2, "b": a2.sum(axis=0)}
        return da @ p["W"].T, grads


class Conv1DLayer(Layer):
    """Valid (unpadded) 1-D convolution over time."""

    param_names = ("W", "b")

    def __init__(self, spec, in_shape):
        self.spec, self.in_shape = spec, tuple(in_shape)
        if len(self.in_shape) != 2:
            raise ShapeMismatch("Conv1D needs a (time, channels) input")
        t, c = self.in_shape
        if t < spec.kernel:
            raise ShapeMismatch(f"Conv1D kernel {spec.kernel} longer than {t} steps")
        self.out_len = (t - spec.kernel) // spec.stride + 1
        self.out_shape = (self.out_len, spec.units)

    def init_params(self, rng):
        k, c, f = self.spec.kernel, self.in_shape[1], self.spec.units
        return {"W": _glorot(rng, (k, c, f), k * c, k * f), "b": np.zeros(f)}

    def _patches(self, x):
        k, s = self.spec.kernel, self.spec.stride
        v = np.lib.stride_tricks.sliding_window_view(x, k, axis=1)[:, : s * (self.out_len - 1) + 1: s]
        # (B, T', C, K) -> (B, T', K, C)
        return v.transpose(0, 1, 3, 2)

    def forward(self, p, x):
        self._check(x)
        k, c, f = p["W"].shape
        patches = self._patches(x).reshape(-1, k * c)
        y = patches @ p["W"].reshape(k * c, f) + p["b"]
        y = _act(y.reshape(x.shape[0], self.out_len, f), self.spec.activation)
        return y, (x.shape, patches, y)

    def backward(self, p, dy, cache):
        xshape, patches, y = cache
        k, c, f = p["W"].shape
        s = self.spec.stride
        da = _act_grad(dy, y, self.spec.activation).reshape(-1, f)
        grads = {"W": (patches.T @ da).reshape(k, c, f), "b": da.sum(axis=0)}
        dp = (da @ p["W"].reshape(k * c, f).T).reshape(xshape[0], self.out_len, k, c)
        dx = np.zeros(xshape)
        stop = s * (self.out_len - 1) + 1
        for i in range(k):
            dx[:, i:i + stop:s, :] += dp[:, :, i, :]
        return dx, grads


def _gate_coefficients(H):
    scale = np.r_[np.full(3 * H, 0.5), np.ones(H)]
    return scale, np.r_[np.full(3 * H, 0.5), np.zeros(H)]


def _gates(a, H):
    """In place: sigmoid on the first 3H pre-activations, tanh on the rest.

    The sigmoid is written as (1 + tanh(a/2)) / 2, so a single tanh pass
    over whole rows covers all four gates.
    """
    scale, shift = _gate_coefficients(H)
    a *= scale
    np.tanh(a, out=a)
    a *= scale
    a += shift
    return a


def lstm_step(params, x_t, h_prev, c_prev):
    """One LSTM step with gates ordered (input, forget, output, candidate)."""
    W, U, b = params["W"], params["U"], params["b"]
    H = U.shape[0]
    if x_t.shape[-1] != W.shape[0] or h_prev.shape[-1] != H or c_prev.shape[-1] != H:
        raise ShapeMismatch("LSTM step operands have inconsistent shapes")
    a = _gates(x_t @ W + h_prev @ U + b, H)
    i, f, o, g = a[..., :H], a[..., H:2 * H], a[..., 2 * H:3 * H], a[..., 3 * H:]
    c = f * c_prev + i * g
    h = o * np.tanh(c)
    return h, c


class LSTMLayer(Layer):
    """Sequence-to-sequence LSTM with zero initial state, full backprop through time."""

    param_names = ("W", "U", "b")

    def __init__(self, spec, in_shape):
        self.spec, self.in_shape = spec, tuple(in_shape)
        if len(self.in_shape) != 2:
            raise ShapeMismatch("LSTM needs a (time, features) input")
        self.out_shape = (self.in_shape[0], spec.units)

    def init_params(self, rng):
        f, H = self.in_shape[1], self.spec.units
        return {"W": _glorot(rng, (f, 4 * H), f, 4 * H),
                "U": _glorot(rng, (H, 4 * H), H, 4 * H),
                "b": np.zeros(4 * H)}

    def forward(self, p, x, keep=True):
        self._check(x)
        B, T, _ = x.shape
        H = self.spec.units
        # time-major input projection keeps every step's slice contiguous
        xw = (np.swapaxes(x, 0, 1).reshape(T * B, -1) @ p["W"] + p["b"]).reshape(T, B, 4 * H)
        U = p["U"]
        h = np.zeros((B, H))
        c = np.zeros((B, H))
        hs = np.empty((B, T, H))
        if keep:
            gates = np.empty((B, T, 4 * H))
            cs = np.empty((B, T, H))
        for t in range(T):
            a = _gates(xw[t] + h @ U, H)
            c = a[:, H:2 * H] * c + a[:, :H] * a[:, 3 * H:]
            h = a[:, 2 * H:3 * H] * np.tanh(c)
            hs[:, t] = h
            if keep:
                gates[:, t] = a
                cs[:, t] = c
        if not keep:
            return hs, None
        return hs, (x, gates, cs, hs)

    def backward(self, p, dy, cache):
        x, gates, cs, hs = cache
        B, T, _ = x.shape
        H = self.spec.units
        U = p["U"]
        da = np.empty((B, T, 4 * H))
        dU = np.zeros_like(U)
        dh_next = np.zeros((B, H))
        dc_next = np.zeros((B, H))
        zeros = np.zeros((B, H))
        for t in range(T - 1, -1, -1):
            i, f, o = gates[:, t, :H], gates[:, t, H:2 * H], gates[:, t, 2 * H:3 * H]
            g = gates[:, t, 3 * H:]
            c_prev = cs[:, t - 1] if t > 0 else zeros
            h_prev = hs[:, t - 1] if t > 0 else zeros
            tc = np.tanh(cs[:, t])
            dh = dy[:, t] + dh_next
            dc = dc_next + dh * o * (1.0 - tc * tc)
            a = da[:, t]
            a[:, :H] = dc * g * i * (1.0 - i)
            a[:, H:2 * H] = dc * c_prev * f * (1.0 - f)
            a[:, 2 * H:3 * H] = dh * tc * o * (1.0 - o)
            a[:, 3 * H:] = dc * i * (1.0 - g * g)
            dU += h_prev.T @ a
            dh_next = a @ U.T
            dc_next = dc * f
        f_in = x.shape[-1]
        a2 = da.reshape(-1, 4 * H)
        grads = {"W": x.reshape(-1, f_in).T @ a2, "U": dU, "b": a2.sum(axis=0)}
        return da @ p["W"].T, grads


class FlattenLayer(Layer):
    def __init__(self, spec, in_shape):
        self.spec, self.in_shape = spec, tuple(in_shape)
        self.out_shape = (int(np.prod(self.in_shape)),)

    def forward(self, p, x):
        self._check(x)
        return x.reshape(x.shape[0], -1), x.shape

    def backward(self, p, dy, cache):
        return dy.reshape(cache), {}


class ReshapeLayer(Layer):
    def __init__(self, spec, in_shape):
        self.spec, self.in_shape = spec, tuple(in_shape)
        if int(np.prod(self.in_shape)) != int(np.prod(spec.shape)):
            raise ShapeMismatch(f"cannot reshape {self.in_shape} into {spec.shape}")
        self.out_shape = spec.shape

    def forward(self, p, x):
        self._check(x)
        return x.reshape((x.shape[0],) + self.out_shape), x.shape

    def backward(self, p, dy, cache):
        return dy.reshape(cache), {}


LAYER_TYPES = {
    "Dense": DenseLayer,
    "Conv1D": Conv1DLayer,
    "LSTM": LSTMLayer,
    "Flatten": FlattenLayer,
    "Reshape": ReshapeLayer,
}


def build_layer(spec: LayerSpec, in_shape) -> Layer:
    return LAYER_TYPES[spec.kind](spec, in_shape)
