"""Telemetry containers, normalization, window embedding, region labels and splits."""
from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    ChannelMismatch,
    InvalidFractions,
    MalformedCsv,
    MissingChannel,
    UnknownChannel,
    WindowTooLong,
    ZeroVarianceChannel,
    DataError,
)

FULL_CHANNELS = (
    "flap1", "flap2", "flap3",
    "edge1", "edge2", "edge3",
    "rotor_speed", "wind_speed", "grid_power",
    "pitch1", "pitch2", "pitch3",
)
DEFAULT_SAMPLE_PERIOD = 0.1


@dataclass(frozen=True)
class ChannelSet:
    names: tuple

    def __post_init__(self):
        names = tuple(self.names)
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate channel names in {names}")
        if not names:
            raise ValueError("a channel set needs at least one channel")
        object.__setattr__(self, "names", names)

    def __len__(self):
        return len(self.names)

    def __iter__(self):
        return iter(self.names)

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise UnknownChannel(name) from None

    def __contains__(self, name):
        return name in self.names


FULL = ChannelSet(FULL_CHANNELS)
AE_SUBSET = ChannelSet(FULL_CHANNELS[:9])


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class SignalMatrix:
    """n x m block of samples on a regular time grid."""

    samples: np.ndarray
    channels: ChannelSet = FULL
    sample_period: float = DEFAULT_SAMPLE_PERIOD
    start_time: float = 0.0

    def __post_init__(self):
        s = _frozen(self.samples)
        if s.ndim == 1:
            s = _frozen(s[:, None])
        if s.ndim != 2 or s.shape[0] < 1:
            raise DataError(f"samples must be a non-empty 2-D array, got shape {s.shape}")
        if s.shape[1] != len(self.channels):
            raise ChannelMismatch(
                f"{s.shape[1]} columns but {len(self.channels)} channels")
        if not self.sample_period > 0:
            raise DataError("sample_period must be positive")
        if not np.all(np.isfinite(s)):
            raise DataError("samples contain non-finite values")
        object.__setattr__(self, "samples", s)

    @property
    def n(self) -> int:
        return self.samples.shape[0]

    @property
    def m(self) -> int:
        return self.samples.shape[1]

    @property
    def times(self) -> np.ndarray:
        return self.start_time + self.sample_period * np.arange(self.n)

    def column(self, name: str) -> np.ndarray:
        return self.samples[:, self.channels.index(name)]

    def select(self, channels: ChannelSet | Sequence[str]) -> "SignalMatrix":
        if not isinstance(channels, ChannelSet):
            channels = ChannelSet(tuple(channels))
        idx = [self.channels.index(c) for c in channels]
        return SignalMatrix(self.samples[:, idx], channels, self.sample_period, self.start_time)

    def slice(self, start: int, stop: int) -> "SignalMatrix":
        return SignalMatrix(self.samples[start:stop], self.channels, self.sample_period,
                            self.start_time + start * self.sample_period)

    def replace(self, samples) -> "SignalMatrix":
        return SignalMatrix(samples, self.channels, self.sample_period, self.start_time)


@dataclass(frozen=True)
class NormalizerState:
    mean: np.ndarray
    std: np.ndarray
    channels: ChannelSet

    def __post_init__(self):
        if not isinstance(self.channels, ChannelSet):
            object.__setattr__(self, "channels", ChannelSet(tuple(self.channels)))
        mean, std = _frozen(self.mean), _frozen(self.std)
        if mean.shape != (len(self.channels),) or std.shape != mean.shape:
            raise ChannelMismatch("normalizer statistics do not match the channel set")
        for name, s in zip(self.channels, std):
            if not s > 0:
                raise ZeroVarianceChannel(name)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "std", std)


def fit_normalizer(data: SignalMatrix | Sequence[SignalMatrix]) -> NormalizerState:
    """Per-channel sample mean and standard deviation (divisor n-1).

    A sequence of matrices over the same channels is pooled.
    """
    parts = [data] if isinstance(data, SignalMatrix) else list(data)
    if not parts:
        raise DataError("no data to fit a normalizer on")
    channels = parts[0].channels
    for p in parts[1:]:
        if p.channels != channels:
            raise ChannelMismatch("pooled segments have different channels")
    x = np.concatenate([p.samples for p in parts], axis=0)
    if x.shape[0] < 2:
        raise DataError("at least two samples are needed to fit a normalizer")
    mean = x.mean(axis=0)
    std = x.std(axis=0, ddof=1)
    for name, s, col in zip(channels, std, x.T):
        if s == 0 or np.all(col == col[0]):
            raise ZeroVarianceChannel(name)
    return NormalizerState(mean, std, channels)


def _check_channels(data: SignalMatrix, norm: NormalizerState):
    if data.channels != norm.channels:
        raise ChannelMismatch(
            f"data channels {data.channels.names} differ from normalizer {norm.channels.names}")


def normalize(data: SignalMatrix, norm: NormalizerState) -> SignalMatrix:
    _check_channels(data, norm)
    return data.replace((data.samples - norm.mean) / norm.std)


def denormalize(data: SignalMatrix, norm: NormalizerState) -> SignalMatrix:
    _check_channels(data, norm)
    return data.replace(data.samples * norm.std + norm.mean)


@dataclass(frozen=True)
class EmbeddedMatrix:
    rows: np.ndarray
    window: int
    m: int


def embed_rows(x: np.ndarray, window: int) -> np.ndarray:
    """Stack ``window`` consecutive rows of ``x`` into one row, oldest first."""
    n, m = x.shape
    if window < 1:
        raise ValueError("window must be at least 1")
    if window > n:
        raise WindowTooLong(f"window {window} exceeds {n} samples")
    view = np.lib.stride_tricks.sliding_window_view(x, window, axis=0)
    # view is (n-w+1, m, w); reorder to time-major blocks of m columns
    return np.ascontiguousarray(view.transpose(0, 2, 1)).reshape(n - window + 1, window * m)


def embed_window(data: SignalMatrix, window: int) -> EmbeddedMatrix:
    return EmbeddedMatrix(embed_rows(data.samples, window), window, data.m)


class RegionLabel(enum.IntEnum):
    I = 1
    II = 2
    III = 3
    IV = 4
    V = 5

    def __str__(self):
        return self.name


MONITORED_REGIONS = (RegionLabel.II, RegionLabel.III, RegionLabel.IV, RegionLabel.V)


@dataclass(frozen=True)
class RegionBoundaries:
    """Wind-speed breakpoints between regions I|II, II|III, III|IV and IV|V.

    ``idle_power`` and ``idle_rotor_speed`` identify a non-producing turbine
    (Region I regardless of wind); ``rated_fraction`` of ``rated_power``
    must be reached before a sample may be labeled Region V.
    """

    breakpoints: tuple = (3.0, 7.0, 11.0, 13.0)
    rated_power: float = 2.2e6
    rated_rotor_speed: float = 1.75
    idle_power: float = 0.02 * 2.2e6
    idle_rotor_speed: float = 0.1 * 1.75
    rated_fraction: float = 0.9
    min_dwell: int = 50

    def __post_init__(self):
        bp = tuple(float(b) for b in self.breakpoints)
        if len(bp) != 4:
            raise ValueError("exactly four breakpoints separate five regions")
        if any(b <= 0 for b in bp) or any(b2 <= b1 for b1, b2 in zip(bp, bp[1:])):
            raise ValueError(f"breakpoints must be positive and strictly increasing: {bp}")
        if self.rated_power <= 0 or self.rated_rotor_speed <= 0:
            raise ValueError("rated levels must be positive")
        object.__setattr__(self, "breakpoints", bp)


def label_samples(wind, power, rotor_speed, bounds: RegionBoundaries) -> np.ndarray:
    """Per-sample region labels before dwell smoothing."""
    wind = np.asarray(wind, dtype=float)
    labels = 1 + np.searchsorted(np.asarray(bounds.breakpoints), wind, side="right")
    idle = (np.asarray(power) <= bounds.idle_power) | (np.asarray(rotor_speed) <= bounds.idle_rotor_speed)
    labels = np.where(idle, 1, np.maximum(labels, 2))
    below_rated = np.asarray(power) < bounds.rated_fraction * bounds.rated_power
    labels = np.where((labels == 5) & below_rated, 4, labels)
    return labels.astype(int)


def run_lengths(labels: np.ndarray):
    """Start indices, lengths and values of maximal constant runs."""
    labels = np.asarray(labels)
    if labels.size == 0:
        return np.zeros(0, int), np.zeros(0, int), labels[:0]
    change = np.flatnonzero(labels[1:] != labels[:-1]) + 1
    starts = np.concatenate([[0], change])
    lengths = np.diff(np.concatenate([starts, [labels.size]]))
    return starts, lengths, labels[starts]


def smooth_dwell(labels: np.ndarray, min_dwell: int) -> np.ndarray:
    """Merge runs shorter than ``min_dwell`` into the preceding run.

    A short leading run has no predecessor and is merged into the run that follows.
    """
    starts, lengths, values = run_lengths(labels)
    if len(values) <= 1 or min_dwell <= 1:
        return np.asarray(labels).copy()
    merged_vals, merged_lens = [], []
    for v, n in zip(values, lengths):
        if merged_vals and (n < min_dwell or v == merged_vals[-1]):
            merged_lens[-1] += n
        else:
            merged_vals.append(v)
            merged_lens.append(n)
    if len(merged_vals) > 1 and merged_lens[0] < min_dwell:
        merged_lens[1] += merged_lens[0]
        merged_vals, merged_lens = merged_vals[1:], merged_lens[1:]
    return np.repeat(np.asarray(merged_vals), merged_lens)


def segment_regions(data: SignalMatrix, bounds: RegionBoundaries | None = None) -> np.ndarray:
    """One :class:`RegionLabel` value per sample, as an int array."""
    bounds = bounds or RegionBoundaries()
    cols = {}
    for name in ("wind_speed", "grid_power", "rotor_speed"):
        if name not in data.channels:
            raise MissingChannel(name)
        cols[name] = data.column(name)
    raw = label_samples(cols["wind_speed"], cols["grid_power"], cols["rotor_speed"], bounds)
    return smooth_dwell(raw, bounds.min_dwell)


def region_segments(labels: np.ndarray, region: int):
    """(start, stop) index pairs of the contiguous runs carrying ``region``."""
    starts, lengths, values = run_lengths(labels)
    return [(int(s), int(s + n)) for s, n, v in zip(starts, lengths, values) if v == region]


def split_sizes(n: int, fractions: Sequence[float]) -> list[int]:
    fr = [float(f) for f in fractions]
    if any(not f > 0 for f in fr) or not math.isclose(sum(fr), 1.0, abs_tol=1e-9):
        raise InvalidFractions(f"fractions must be positive and sum to 1, got {fractions}")
    exact = [n * f for f in fr]
    sizes = [int(math.floor(e + 1e-9)) for e in exact]
    # largest remainder, earlier piece wins ties
    order = sorted(range(len(fr)), key=lambda i: (-(exact[i] - sizes[i]), i))
    for i in order[: n - sum(sizes)]:
        sizes[i] += 1
    if any(s == 0 for s in sizes):
        raise InvalidFractions(f"{n} samples cannot be split into {fractions}")
    return sizes


def split_dataset(data: SignalMatrix, fractions=(0.7, 0.15, 0.15)):
    """Chronological split into contiguous pieces."""
    sizes = split_sizes(data.n, fractions)
    edges = np.cumsum([0] + sizes)
    return tuple(data.slice(a, b) for a, b in zip(edges[:-1], edges[1:]))


def write_csv(data: SignalMatrix, path) -> None:
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        fh.write(",".join(("t",) + data.channels.names) + "\n")
        for t, row in zip(data.times, data.samples):
            fh.write(format(t, ".10g") + "," + ",".join(format(v, ".17g") for v in row) + "\n")


def read_csv(path, channels: Iterable[str] | None = None) -> SignalMatrix:
    """Load the canonical telemetry CSV; the sample period is taken from the time column."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise MalformedCsv(1, "empty file") from None
        if not header or header[0].strip() != "t":
            raise MalformedCsv(1, "first column must be 't'")
        names = tuple(h.strip() for h in header[1:])
        try:
            chset = ChannelSet(names)
        except ValueError as exc:
            raise MalformedCsv(1, str(exc)) from None
        times, rows = [], []
        for lineno, rec in enumerate(reader, start=2):
            if not rec:
                continue
            if len(rec) != len(names) + 1:
                raise MalformedCsv(lineno, f"expected {len(names) + 1} fields, got {len(rec)}")
            try:
                vals = [float(v) for v in rec]
            except ValueError as exc:
                raise MalformedCsv(lineno, str(exc)) from None
            if not all(math.isfinite(v) for v in vals):
                raise MalformedCsv(lineno, "non-finite value")
            times.append(vals[0])
            rows.append(vals[1:])
    if not rows:
        raise MalformedCsv(2, "no samples")
    times = np.asarray(times)
    period = float(np.round(np.median(np.diff(times)), 12)) if len(times) > 1 else DEFAULT_SAMPLE_PERIOD
    data = SignalMatrix(np.asarray(rows), chset, period, float(times[0]))
    if channels is not None:
        data = data.select(tuple(channels))
    return data
