"""Central finite-difference checks of the hand-written backward passes."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .layers import LSTM, Conv1D, Dense, Flatten, Reshape
from .network import Network, flatten_params, unflatten_like

DEFAULT_STEP = 1e-5
# gradients below this magnitude are compared absolutely
DEFAULT_FLOOR = 1e-6


def small_stacks() -> dict:
    """Tiny stacks exercising each layer kind on a (8, 3) input."""
    return {
        "dense": ((Dense(5), Dense(4, activation="linear")), (8, 3)),
        "conv1d": ((Conv1D(4, 3, stride=2), Conv1D(3, 2, activation="linear")), (8, 3)),
        "lstm": ((LSTM(5), LSTM(3)), (8, 3)),
        "stack": ((Conv1D(3, 2, stride=2), LSTM(4), Flatten(), Dense(6), Dense(12),
                   Reshape(4, 3), LSTM(6), Dense(6, activation="linear"), Reshape(8, 3)), (8, 3)),
    }


@dataclass(frozen=True)
class GradCheck:
    name: str
    seed: int
    max_rel_error: float
    n_params: int


def _loss_difference(net, params_up, params_down, x_up, x_down, target):
    """L(up) - L(down) for the MSE loss, differenced per element before summing.

    Summing the two losses first would cancel most significant digits and
    leave round-off of order eps * L / step in the quotient.
    """
    y_up, _ = net.forward(params_up, x_up)
    y_down, _ = net.forward(params_down, x_down)
    return float(np.sum((y_up - y_down) * (y_up + y_down - 2.0 * target)) / x_up.shape[0])


def relative_error(analytic, numeric, floor: float = DEFAULT_FLOOR) -> np.ndarray:
    a = np.asarray(analytic, dtype=float)
    n = np.asarray(numeric, dtype=float)
    return np.abs(a - n) / np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)


def check_network(net: Network, seed: int, batch: int = 2, step: float = DEFAULT_STEP,
                  floor: float = DEFAULT_FLOOR, name: str = "") -> GradCheck:
    """Compare the analytic MSE gradient of every weight and of the input with central differences.

    The target is random rather than the input, so the input gradient is a
    plain Jacobian-vector product.
    """
    rng = np.random.default_rng(seed)
    params = net.init_params(rng)
    # non-zero biases so that every code path carries signal
    for p in params:
        if "b" in p:
            p["b"] = rng.uniform(-0.5, 0.5, p["b"].shape)
    x = rng.standard_normal((batch,) + net.input_shape)
    target = rng.standard_normal((batch,) + net.output_shape)
    y, caches = net.forward(params, x)
    dx, grads = net.backward(params, 2.0 * (y - target) / batch, caches)

    v = flatten_params(params)
    analytic = np.concatenate([flatten_params(grads), dx.ravel()])
    numeric = np.empty_like(analytic)
    for i in range(v.size):
        e = np.zeros_like(v)
        e[i] = step
        diff = _loss_difference(net, unflatten_like(v + e, params), unflatten_like(v - e, params),
                                x, x, target)
        numeric[i] = diff / (2 * step)
    flat_x = x.ravel()
    for j in range(flat_x.size):
        e = np.zeros_like(flat_x)
        e[j] = step
        diff = _loss_difference(net, params, params, (flat_x + e).reshape(x.shape),
                                (flat_x - e).reshape(x.shape), target)
        numeric[v.size + j] = diff / (2 * step)
    err = float(np.max(relative_error(analytic, numeric, floor)))
    return GradCheck(name, seed, err, int(v.size))


def gradcheck(seeds=range(10), stacks=None, step: float = DEFAULT_STEP) -> list[GradCheck]:
    stacks = small_stacks() if stacks is None else stacks
    out = []
    for name, (specs, shape) in stacks.items():
        net = Network(specs, shape)
        for seed in seeds:
            out.append(check_network(net, seed, step=step, name=name))
    return out
