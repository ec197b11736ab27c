"""Windowed conv/LSTM autoencoder over the nine load and operating channels."""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Sequence

import numpy as np

from ..data import AE_SUBSET, NormalizerState, SignalMatrix, embed_rows, fit_normalizer
from ..errors import DivergedLoss, InsufficientData, NonFiniteWeights, ShapeMismatch
from ..stats import ResidualTrace, lowpass, quantile_threshold
from .layers import LSTM, Conv1D, Dense, Flatten, LayerSpec, Reshape
from .network import Adam, Network, check_output_shape

N_CHANNELS = len(AE_SUBSET)
_PREDICT_CHUNK = 1024


def default_stack(window: int = 100, channels: int = N_CHANNELS, filters: int = 16,
                  kernel: int = 5, hidden: int = 32, latent: int = 12) -> tuple:
    """Encoder conv -> LSTM -> latent dense; decoder dense -> LSTM -> per-step dense.

    The strided convolution compresses time by ``kernel``; the decoder's last
    dense layer emits ``kernel`` consecutive samples per step, which the final
    reshape unfolds back to ``window`` samples.
    """
    if window % kernel:
        raise ShapeMismatch(f"window {window} is not a multiple of the kernel length {kernel}")
    steps = window // kernel
    return (
        Conv1D(filters, kernel, stride=kernel),
        LSTM(hidden),
        Flatten(),
        Dense(latent),
        Dense(steps * filters),
        Reshape(steps, filters),
        LSTM(hidden),
        Dense(kernel * channels, activation="linear"),
        Reshape(window, channels),
    )


def build_network(specs: Sequence[LayerSpec], window: int, channels: int = N_CHANNELS) -> Network:
    net = Network(specs, (window, channels))
    check_output_shape(net, (window, channels))
    return net


@dataclass(frozen=True)
class TrainReport:
    train_loss: tuple
    val_loss: tuple
    wall_clock: float
    seed: int

    @property
    def epochs(self) -> int:
        return len(self.train_loss)

    def to_csv(self, path):
        with open(path, "w", newline="\n") as fh:
            fh.write("epoch,train_loss,val_loss\n")
            for i, (a, b) in enumerate(zip(self.train_loss, self.val_loss), start=1):
                fh.write(f"{i},{a:.17g},{b:.17g}\n")


@dataclass(frozen=True)
class AeModel:
    specs: tuple
    window: int
    normalizer: NormalizerState
    params: tuple
    mae_threshold: float = 1.0
    lpf_alpha: float = 0.98
    meta: dict = field(default_factory=dict)
    glr: Optional[object] = None

    def __post_init__(self):
        object.__setattr__(self, "specs", tuple(self.specs))
        object.__setattr__(self, "params", tuple(self.params))
        if len(self.normalizer.channels) != N_CHANNELS:
            raise ShapeMismatch(f"the autoencoder needs {N_CHANNELS} channels")
        net = self.network
        if len(self.params) != len(net.layers):
            raise ShapeMismatch("parameter list does not match the layer stack")
        for layer, p in zip(net.layers, self.params):
            expected = {k: v.shape for k, v in layer.init_params(np.random.default_rng(0)).items()}
            if {k: np.shape(v) for k, v in p.items()} != expected:
                raise ShapeMismatch(f"parameters of {layer.spec.kind} have the wrong shapes")
            if not all(np.all(np.isfinite(v)) for v in p.values()):
                raise NonFiniteWeights(f"non-finite weights in {layer.spec.kind}")
        if not self.mae_threshold > 0:
            raise ValueError("mae_threshold must be positive")

    @cached_property
    def network(self) -> Network:
        return build_network(self.specs, self.window)


def forward(model: AeModel, window) -> np.ndarray:
    """Reconstruct one normalized (window x 9) block, or a batch of them."""
    x = np.asarray(window, dtype=float)
    single = x.ndim == 2
    if single:
        x = x[None]
    if x.shape[1:] != (model.window, N_CHANNELS):
        raise ShapeMismatch(f"expected windows of shape {(model.window, N_CHANNELS)}, got {x.shape[1:]}")
    y = model.network.predict(list(model.params), x)
    return y[0] if single else y


def mse_loss(batch, reconstructions) -> float:
    """Mean over the batch of the squared reconstruction norm of each window."""
    x = np.asarray(batch, dtype=float)
    y = np.asarray(reconstructions, dtype=float)
    if x.shape != y.shape:
        raise ShapeMismatch(f"batch {x.shape} and reconstruction {y.shape} differ")
    return float(np.sum((x - y) ** 2) / x.shape[0])


def loss_and_grads(net: Network, params, batch):
    y, caches = net.forward(params, batch)
    loss = float(np.sum((y - batch) ** 2) / batch.shape[0])
    _, grads = net.backward(params, 2.0 * (y - batch) / batch.shape[0], caches)
    return loss, grads


def backward(model: AeModel, batch) -> list[dict]:
    """Gradients of the reconstruction MSE with respect to every weight tensor."""
    x = np.asarray(batch, dtype=float)
    if x.shape[1:] != (model.window, N_CHANNELS):
        raise ShapeMismatch(f"expected windows of shape {(model.window, N_CHANNELS)}")
    _, grads = loss_and_grads(model.network, [dict(p) for p in model.params], x)
    return grads


def _windows(z: np.ndarray, window: int, stride: int) -> np.ndarray:
    rows = embed_rows(z, window)[::stride]
    return rows.reshape(-1, window, z.shape[1])


def _segments(data) -> list[SignalMatrix]:
    return [data] if isinstance(data, SignalMatrix) else list(data)


def fit_windows(net: Network, params, windows, val_windows, epochs, rng,
                batch_size=64, lr=1e-3, betas=(0.9, 0.999), eps=1e-8, log=None):
    """Mini-batch Adam on fixed window sets; returns per-epoch train and val loss."""
    opt = Adam(params, lr, betas[0], betas[1], eps)
    n = windows.shape[0]
    train_hist, val_hist = [], []
    for epoch in range(epochs):
        order = rng.permutation(n)
        total = 0.0
        for a in range(0, n, batch_size):
            batch = windows[order[a:a + batch_size]]
            loss, grads = loss_and_grads(net, params, batch)
            if not math.isfinite(loss):
                raise DivergedLoss(f"loss became {loss} in epoch {epoch + 1}")
            opt.step(params, grads)
            total += loss * batch.shape[0]
        train_hist.append(total / n)
        val_hist.append(_mean_loss(net, params, val_windows) if val_windows is not None else float("nan"))
        if log:
            log(epoch + 1, train_hist[-1], val_hist[-1])
    return train_hist, val_hist


def _mean_loss(net, params, windows):
    total = 0.0
    for a in range(0, windows.shape[0], _PREDICT_CHUNK):
        w = windows[a:a + _PREDICT_CHUNK]
        total += float(np.sum((net.predict(params, w) - w) ** 2))
    return total / windows.shape[0]


def train_ae(
    train: SignalMatrix | Sequence[SignalMatrix],
    val: SignalMatrix | Sequence[SignalMatrix],
    specs: Optional[Sequence[LayerSpec]] = None,
    epochs: int = 200,
    seed: int = 0,
    window: int = 100,
    batch_size: int = 64,
    lr: float = 1e-3,
    train_stride: int = 10,
    pf: float = 0.01,
    lpf_alpha: float = 0.98,
    normalizer: Optional[NormalizerState] = None,
    log=None,
):
    """Train the autoencoder on healthy data and set its MAE threshold.

    Training windows are taken every ``train_stride`` samples from each
    contiguous segment; the threshold is the nearest-rank (1 - pf) quantile
    of the low-pass filtered per-sample MAE over the full training data.
    """
    if epochs < 1:
        raise ValueError("epochs must be at least 1")
    train_segs = [s.select(AE_SUBSET) for s in _segments(train)]
    val_segs = [s.select(AE_SUBSET) for s in _segments(val)]
    specs = tuple(specs) if specs is not None else default_stack(window)
    net = build_network(specs, window)
    norm = normalizer or fit_normalizer(train_segs)

    def windows_of(segs, stride):
        parts = [_windows((s.samples - norm.mean) / norm.std, window, stride)
                 for s in segs if s.n >= window]
        return np.concatenate(parts) if parts else np.zeros((0, window, N_CHANNELS))

    tw = windows_of(train_segs, train_stride)
    vw = windows_of(val_segs, train_stride)
    if tw.shape[0] < 1 or vw.shape[0] < 1:
        raise InsufficientData("training and validation data need at least one full window each")

    rng = np.random.default_rng(seed)
    params = net.init_params(rng)
    t0 = time.perf_counter()
    train_hist, val_hist = fit_windows(net, params, tw, vw, epochs, rng, batch_size, lr, log=log)
    report = TrainReport(tuple(train_hist), tuple(val_hist), time.perf_counter() - t0, seed)

    model = AeModel(specs, window, norm, tuple(params), 1.0, lpf_alpha,
                    {"epochs": epochs, "seed": seed, "train_loss": train_hist[-1],
                     "val_loss": val_hist[-1]})
    filtered = np.concatenate([mae_statistic(model, s).filtered[window - 1:]
                               for s in train_segs if s.n >= window])
    threshold = quantile_threshold(filtered, pf)
    return _with(model, mae_threshold=threshold), report


def _with(model: AeModel, **changes) -> AeModel:
    kw = dict(specs=model.specs, window=model.window, normalizer=model.normalizer,
              params=model.params, mae_threshold=model.mae_threshold,
              lpf_alpha=model.lpf_alpha, meta=model.meta, glr=model.glr)
    kw.update(changes)
    return AeModel(**kw)


def window_mae(model: AeModel, z: np.ndarray) -> np.ndarray:
    """MAE of every full window of a normalized (n x 9) array."""
    w = model.window
    n = z.shape[0] - w + 1
    out = np.empty(max(n, 0))
    params = list(model.params)
    for a in range(0, n, _PREDICT_CHUNK):
        b = min(n, a + _PREDICT_CHUNK)
        x = embed_rows(z[a:b + w - 1], w).reshape(-1, w, N_CHANNELS)
        out[a:b] = np.abs(model.network.predict(params, x) - x).mean(axis=(1, 2))
    return out


def mae_statistic(model: AeModel, run: SignalMatrix) -> ResidualTrace:
    """Per-sample MAE of the window ending at each sample; the first window-1 samples carry none."""
    run = run.select(AE_SUBSET) if run.channels != model.normalizer.channels else run
    n, w = run.n, model.window
    raw = np.full(n, np.nan)
    filt = np.full(n, np.nan)
    if n >= w:
        z = (run.samples - model.normalizer.mean) / model.normalizer.std
        m = window_mae(model, z)
        raw[w - 1:] = m
        filt[w - 1:] = lowpass(m, model.lpf_alpha)
    thr = np.full(n, model.mae_threshold)
    flags = np.zeros(n, dtype=bool)
    ok = np.isfinite(filt)
    flags[ok] = filt[ok] > model.mae_threshold
    return ResidualTrace(raw, filt, thr, flags)
