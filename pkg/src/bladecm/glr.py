"""Window-limited GLR test for a mean increase in a residual-statistic stream.

For a Gaussian stream with known H0 mean ``mu0`` and deviation ``sigma`` the
log-likelihood ratio of a mean change starting at sample j, maximised over
the new mean, is ``(sum_{i=j..k} (z_i - mu0))**2 / (2 sigma**2 (k-j+1))``.
The statistic keeps the largest value over the last ``M`` candidate onsets.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.stats import norm as _normal

from .errors import InsufficientData, NoFeasibleWindow, NonFiniteInput
from .stats import quantile_threshold, sample_mean_std

DEFAULT_WINDOW = 600
MIN_H0_SAMPLES = 1000


@dataclass(frozen=True)
class GlrConfig:
    mu0: float
    sigma: float
    M: int = DEFAULT_WINDOW
    h: float = 10.0
    # samples of the underlying statistic averaged into one GLR input sample
    stride: int = 1

    def __post_init__(self):
        if not (math.isfinite(self.mu0) and math.isfinite(self.sigma)):
            raise ValueError("mu0 and sigma must be finite")
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if int(self.M) != self.M or self.M < 1:
            raise ValueError("M must be a positive integer")
        if not self.h > 0:
            raise ValueError("h must be positive")
        if int(self.stride) != self.stride or self.stride < 1:
            raise ValueError("stride must be a positive integer")
        object.__setattr__(self, "M", int(self.M))
        object.__setattr__(self, "stride", int(self.stride))


def glr_statistic(z, cfg: GlrConfig) -> np.ndarray:
    """g(k) for every k; windows are truncated to the available samples near the start.

    Window sums are accumulated newest-to-oldest, one sample per candidate
    onset, so the result is bit-identical to the direct double loop.
    """
    d = np.asarray(z, dtype=float) - cfg.mu0
    if d.ndim != 1:
        raise ValueError("the residual stream must be one-dimensional")
    if not np.all(np.isfinite(d)):
        raise NonFiniteInput("GLR input contains non-finite values")
    n = d.size
    g = np.zeros(n)
    s = np.zeros(n)
    scale = 2.0 * cfg.sigma ** 2
    for length in range(1, min(cfg.M, n) + 1):
        # s[k] becomes sum of d[k-length+1 .. k] for k >= length-1
        s[length - 1:] += d[: n - length + 1]
        np.maximum(g[length - 1:], s[length - 1:] ** 2 / (scale * length), out=g[length - 1:])
    return g


def glr_statistic_batch(z: np.ndarray, cfg: GlrConfig) -> np.ndarray:
    """Row-wise :func:`glr_statistic` for a (runs, samples) array."""
    d = np.asarray(z, dtype=float) - cfg.mu0
    n = d.shape[1]
    g = np.zeros_like(d)
    s = np.zeros_like(d)
    scale = 2.0 * cfg.sigma ** 2
    for length in range(1, min(cfg.M, n) + 1):
        s[:, length - 1:] += d[:, : n - length + 1]
        np.maximum(g[:, length - 1:], s[:, length - 1:] ** 2 / (scale * length),
                   out=g[:, length - 1:])
    return g


class GlrStream:
    """Sample-at-a-time GLR holding the last M deviations."""

    def __init__(self, cfg: GlrConfig):
        self.cfg = cfg
        self._buf: deque = deque(maxlen=cfg.M)

    def update(self, z: float) -> float:
        if not math.isfinite(z):
            raise NonFiniteInput("GLR input contains non-finite values")
        self._buf.append(z - self.cfg.mu0)
        scale = 2.0 * self.cfg.sigma ** 2
        s = 0.0
        best = 0.0
        for length, dv in enumerate(reversed(self._buf), start=1):
            s += dv
            best = max(best, s * s / (scale * length))
        return best

    def reset(self):
        self._buf.clear()


def estimate_h0(z) -> tuple[float, float]:
    """Sample mean and deviation (divisor N-1) of a healthy residual stream."""
    v = np.asarray(z, dtype=float).ravel()
    v = v[np.isfinite(v)]
    if v.size < MIN_H0_SAMPLES:
        raise InsufficientData(f"{v.size} healthy samples, at least {MIN_H0_SAMPLES} needed")
    return sample_mean_std(v)


def calibrate_glr(
    mu0: float,
    sigma: float,
    pf_target: float = 0.01,
    pd_target: float = 0.99,
    mu1: Optional[float] = None,
    n_samples: int = 9000,
    fault_index: Optional[int] = None,
    runs: int = 1000,
    m_start: int = 100,
    seed: int = 0,
    stride: int = 1,
) -> GlrConfig:
    """Choose (M, h) by Monte Carlo on independent Gaussian streams.

    For each candidate window (doubling from ``m_start``), ``h`` is the
    nearest-rank (1 - pf_target) quantile of the per-run maximum of g over
    ``runs`` H0 streams of ``n_samples``; the search stops at the first
    window whose detection rate for a persistent shift to ``mu1`` starting
    at ``fault_index`` reaches ``pd_target``.
    """
    mu1 = 2.0 * mu0 if mu1 is None else mu1
    if not mu1 > mu0:
        raise ValueError("mu1 must exceed mu0")
    if not (0 < pf_target < 1 and 0 < pd_target < 1):
        raise ValueError("pf_target and pd_target must lie in (0, 1)")
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    fault_index = n_samples // 3 if fault_index is None else fault_index
    if not 0 <= fault_index < n_samples:
        raise ValueError("fault_index must lie inside the run")
    rng = np.random.default_rng(seed)
    h0 = mu0 + sigma * rng.standard_normal((runs, n_samples))
    h1 = mu0 + sigma * rng.standard_normal((runs, n_samples))
    h1[:, fault_index:] += mu1 - mu0
    M = m_start
    while M <= n_samples:
        base = GlrConfig(mu0, sigma, M, 1.0, stride)
        h = quantile_threshold(glr_statistic_batch(h0, base).max(axis=1), pf_target)
        h = max(h, np.finfo(float).tiny)
        g1 = glr_statistic_batch(h1[:, fault_index:], base)
        pd = float(np.mean(g1.max(axis=1) > h))
        if pd >= pd_target:
            return GlrConfig(mu0, sigma, M, h, stride)
        M *= 2
    raise NoFeasibleWindow(f"no window up to {n_samples} samples reaches P_D = {pd_target}")


def approximate_window(mu0, sigma, mu1, h, pd_target) -> int:
    """Closed-form window estimate: smallest M with Phi(sqrt(2h) - sqrt(M)(mu1-mu0)/sigma) <= 1-pd."""
    snr = (mu1 - mu0) / sigma
    q = _normal.ppf(1.0 - pd_target)
    root = (math.sqrt(2.0 * h) - q) / snr
    return max(1, math.ceil(root * root))


@dataclass(frozen=True)
class DetectionTrace:
    g: np.ndarray
    h: np.ndarray
    alarms: np.ndarray
    first_alarm: Optional[int]
    fault_index: Optional[int] = None
    false_alarm: bool = False
    detected: bool = False
    strongly_detected: bool = False

    @property
    def weakly_detected(self) -> bool:
        return self.detected and not self.strongly_detected

    def delay(self) -> Optional[int]:
        """Samples from the fault to the first post-fault alarm."""
        if not self.detected:
            return None
        post = self.alarms[self.alarms >= self.fault_index]
        return int(post[0] - self.fault_index)


def detect(g, h, fault_index: Optional[int] = None) -> DetectionTrace:
    """Classify a statistic sequence against threshold ``h`` (scalar or per sample).

    Alarms are upward crossings; a sequence that starts above ``h`` alarms at
    index 0. NaN samples never exceed the threshold.
    """
    g = np.asarray(g, dtype=float)
    h = np.broadcast_to(np.asarray(h, dtype=float), g.shape)
    above = np.zeros(g.shape, dtype=bool)
    ok = np.isfinite(g)
    above[ok] = g[ok] > h[ok]
    prev = np.concatenate([[False], above[:-1]])
    alarms = np.flatnonzero(above & ~prev)
    first = int(alarms[0]) if alarms.size else None
    if fault_index is None:
        return DetectionTrace(g, np.array(h), alarms, first)
    false_alarm = bool(np.any(alarms < fault_index))
    post = alarms[alarms >= fault_index]
    detected = bool(post.size)
    strong = detected and bool(np.all(above[post[0]:]))
    return DetectionTrace(g, np.array(h), alarms, first, fault_index, false_alarm, detected, strong)


@dataclass(frozen=True)
class BlockStream:
    """Means of consecutive, non-overlapping blocks of a per-sample statistic.

    A block holds ``stride`` finite samples of one contiguous stretch with a
    single model key (region); partial blocks at the end of a stretch are
    dropped. ``ends`` is the sample index at which each block completes.
    """

    values: np.ndarray
    ends: np.ndarray
    keys: np.ndarray
    n_samples: int


def block_stream(raw, stride: int, keys=None) -> BlockStream:
    raw = np.asarray(raw, dtype=float)
    n = raw.size
    keys = np.zeros(n, dtype=int) if keys is None else np.asarray(keys)
    ok = np.isfinite(raw)
    # stretch boundaries: finiteness or key changes
    brk = np.flatnonzero(np.diff(ok.astype(int)) != 0) + 1
    brk = np.union1d(brk, np.flatnonzero(keys[1:] != keys[:-1]) + 1)
    starts = np.concatenate([[0], brk]).astype(int)
    stops = np.concatenate([brk, [n]]).astype(int)
    vals, ends, ks = [], [], []
    for a, b in zip(starts, stops):
        if not ok[a] or b - a < stride:
            continue
        nb = (b - a) // stride
        vals.append(raw[a:a + nb * stride].reshape(nb, stride).mean(axis=1))
        ends.append(a + stride * np.arange(1, nb + 1) - 1)
        ks.append(np.full(nb, keys[a]))
    if not vals:
        return BlockStream(np.zeros(0), np.zeros(0, dtype=int), np.zeros(0, dtype=keys.dtype), n)
    return BlockStream(np.concatenate(vals), np.concatenate(ends), np.concatenate(ks), n)


def standardize_blocks(blocks: BlockStream, configs) -> np.ndarray:
    """(value - mu0) / sigma with the config of each block's key; ``configs`` maps key -> GlrConfig."""
    if not isinstance(configs, dict):
        configs = {k: configs for k in np.unique(blocks.keys)}
    mu = np.array([configs[k].mu0 for k in blocks.keys])
    sd = np.array([configs[k].sigma for k in blocks.keys])
    return (blocks.values - mu) / sd


def hold(values, ends, n: int) -> np.ndarray:
    """Per-sample sequence holding each block value from its completion to the next; NaN before the first."""
    out = np.full(n, np.nan)
    ends = np.asarray(ends, dtype=int)
    for i, e in enumerate(ends):
        stop = ends[i + 1] if i + 1 < ends.size else n
        out[e:stop] = values[i]
    return out


def glr_trace(raw, configs, keys=None) -> np.ndarray:
    """Per-sample GLR statistic of a residual trace.

    The raw statistic is block-averaged, standardized per key and fed to one
    GLR with the shared window; windows run across key changes.
    """
    cfg = configs if isinstance(configs, GlrConfig) else next(iter(configs.values()))
    blocks = block_stream(raw, cfg.stride, keys)
    u = standardize_blocks(blocks, configs)
    g = glr_statistic(u, GlrConfig(0.0, 1.0, cfg.M, cfg.h, 1))
    return hold(g, blocks.ends, blocks.n_samples)


class ResidualGlr:
    """Streaming counterpart of :func:`glr_trace`: one raw sample (and key) per call."""

    def __init__(self, configs):
        self.configs = configs if isinstance(configs, dict) else None
        self.single = configs if isinstance(configs, GlrConfig) else None
        cfg = self.single or next(iter(configs.values()))
        self.stride = cfg.stride
        self.glr = GlrStream(GlrConfig(0.0, 1.0, cfg.M, cfg.h, 1))
        self.g = math.nan
        self._acc: list = []
        self._key = None

    def update(self, value: float, key=0) -> float:
        if not math.isfinite(value) or key != self._key:
            self._acc = []
        self._key = key
        if math.isfinite(value):
            self._acc.append(value)
            if len(self._acc) == self.stride:
                cfg = self.single or self.configs[key]
                # same summation order as the batch path
                m = np.mean(np.array(self._acc))
                self.g = self.glr.update(float((m - cfg.mu0) / cfg.sigma))
                self._acc = []
        return self.g


def per_run_maxima(streams, M: int) -> np.ndarray:
    """Largest g of each standardized block stream (runs with no blocks give 0)."""
    cfg = GlrConfig(0.0, 1.0, M, 1.0)
    return np.array([glr_statistic(u, cfg).max() if len(u) else 0.0 for u in streams])


def empirical_threshold(streams, M: int, pf_target: float = 0.01) -> float:
    """Nearest-rank (1 - pf) quantile of per-run maxima over healthy standardized streams."""
    return quantile_threshold(per_run_maxima(streams, M), pf_target)
