"""Seeded synthetic telemetry for a 2.2 MW variable-speed, variable-pitch turbine.

The model is deliberately simple: a first-order filtered turbulence process
drives the rotor speed, power and pitch through static curves and lags,
flap loads follow thrust with a once-per-revolution (1P) modulation, and
edge loads are dominated by the gravity 1P sinusoid plus a torque share.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
from scipy.signal import lfilter

from .data import (
    FULL,
    DEFAULT_SAMPLE_PERIOD,
    RegionBoundaries,
    SignalMatrix,
    segment_regions,
)
from .errors import FaultAfterEnd, InvalidConfig, UnknownChannel


@dataclass(frozen=True)
class SimConfig:
    seed: int = 0
    duration: float = 900.0
    mean_wind: float = 9.0
    # linear ramp of the mean wind from mean_wind to ramp_to over the run
    ramp_to: Optional[float] = None
    turbulence_intensity: float = 0.1
    turbulence_time_constant: float = 10.0
    cut_in: float = 3.0
    rated_wind: float = 11.0
    cut_out: float = 25.0
    rated_power: float = 2.2e6
    rated_rotor_speed: float = 1.75
    # wind speed at which the rotor reaches rated speed (inside Region III)
    speed_saturation_wind: float = 9.5
    rotor_time_constant: float = 4.0
    # flap load per (m/s)^2 of effective wind, N*m; ~3e6 N*m at rated wind
    thrust_coefficient: float = 2.5e4
    flap_1p_amplitude: float = 0.1
    # gravity edge moment amplitude, N*m (blade mass * g * centre-of-mass radius)
    blade_mass_moment: float = 1.2e6
    pitch_gain: float = 1.5
    noise_flap: float = 5e4
    noise_edge: float = 5e4
    noise_rotor: float = 0.01
    noise_wind: float = 0.1
    noise_power: float = 1e4
    noise_pitch: float = 0.05
    sample_period: float = DEFAULT_SAMPLE_PERIOD
    start_time: float = 0.0

    def __post_init__(self):
        if not (0 < self.cut_in < self.rated_wind < self.cut_out):
            raise InvalidConfig("require 0 < cut_in < rated_wind < cut_out")
        if not (self.cut_in < self.speed_saturation_wind <= self.rated_wind):
            raise InvalidConfig("speed_saturation_wind must lie in (cut_in, rated_wind]")
        positive = ("duration", "rated_power", "rated_rotor_speed", "rotor_time_constant",
                    "turbulence_time_constant", "thrust_coefficient", "blade_mass_moment",
                    "pitch_gain", "sample_period")
        for name in positive:
            if not getattr(self, name) > 0:
                raise InvalidConfig(f"{name} must be positive")
        nonneg = ("mean_wind", "turbulence_intensity", "flap_1p_amplitude", "noise_flap",
                  "noise_edge", "noise_rotor", "noise_wind", "noise_power", "noise_pitch")
        for name in nonneg:
            if not getattr(self, name) >= 0:
                raise InvalidConfig(f"{name} must be non-negative")
        if self.ramp_to is not None and self.ramp_to < 0:
            raise InvalidConfig("ramp_to must be non-negative")
        steps = self.duration / self.sample_period
        if abs(steps - round(steps)) > 1e-6 or round(steps) < 1:
            raise InvalidConfig("duration must be a positive multiple of sample_period")

    @property
    def n_samples(self) -> int:
        return int(round(self.duration / self.sample_period))

    def boundaries(self) -> RegionBoundaries:
        return RegionBoundaries(rated_power=self.rated_power,
                                rated_rotor_speed=self.rated_rotor_speed,
                                idle_power=0.02 * self.rated_power,
                                idle_rotor_speed=0.1 * self.rated_rotor_speed)


class FaultKind(enum.Enum):
    FLAP_BIAS = "FlapBias"
    EDGE_BIAS = "EdgeBias"
    FLAP_STUCK = "FlapStuck"
    EDGE_STUCK = "EdgeStuck"
    FLAP_JUMP = "FlapJump"
    FLAP_EXP_DRIFT = "FlapExpDrift"

    @property
    def channel_group(self) -> str:
        return "edge" if self.value.startswith("Edge") else "flap"


DEFAULT_MAGNITUDE = {
    FaultKind.FLAP_BIAS: 1e6,
    FaultKind.EDGE_BIAS: 1e6,
    FaultKind.FLAP_STUCK: 0.8,
    FaultKind.EDGE_STUCK: 0.8,
    FaultKind.FLAP_JUMP: 3e6,
    FaultKind.FLAP_EXP_DRIFT: 1e6,
}
DEFAULT_DRIFT_TIME_CONSTANT = 60.0


@dataclass(frozen=True)
class FaultSpec:
    """One injected fault.

    ``magnitude`` is the offset in N*m for bias, jump and drift kinds and the
    stuck ratio for stuck kinds; ``time_constant`` only applies to the drift.
    """

    kind: FaultKind
    blade: int = 1
    t_f: float = 300.0
    magnitude: Optional[float] = None
    time_constant: float = DEFAULT_DRIFT_TIME_CONSTANT

    def __post_init__(self):
        kind = self.kind if isinstance(self.kind, FaultKind) else FaultKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if self.magnitude is None:
            object.__setattr__(self, "magnitude", DEFAULT_MAGNITUDE[kind])
        if self.blade not in (1, 2, 3):
            raise InvalidConfig(f"blade index must be 1, 2 or 3, got {self.blade}")
        if self.magnitude < 0 or not math.isfinite(self.magnitude):
            raise InvalidConfig("fault magnitude must be finite and non-negative")
        if not self.t_f > 0:
            raise InvalidConfig("fault time must be positive")
        if not self.time_constant > 0:
            raise InvalidConfig("drift time constant must be positive")

    @property
    def channel(self) -> str:
        return f"{self.kind.channel_group}{self.blade}"


@dataclass(frozen=True)
class LabeledRun:
    data: SignalMatrix
    fault: Optional[FaultSpec] = None
    regions: Optional[np.ndarray] = None


def _lag(u: np.ndarray, tau: float, dt: float, y0: float) -> np.ndarray:
    """First-order lag dy/dt = (u - y)/tau, discretized exactly for piecewise-constant u."""
    a = math.exp(-dt / tau)
    y, _ = lfilter([1 - a], [1, -a], u, zi=[a * y0])
    return y


def rotor_setpoint(wind, cfg: SimConfig):
    w = np.asarray(wind, dtype=float)
    sp = cfg.rated_rotor_speed * np.clip(w / cfg.speed_saturation_wind, 0.0, 1.0)
    return np.where((w < cfg.cut_in) | (w > cfg.cut_out), 0.0, sp)


def power_curve(wind, cfg: SimConfig):
    w = np.asarray(wind, dtype=float)
    ci3, r3 = cfg.cut_in ** 3, cfg.rated_wind ** 3
    partial = cfg.rated_power * (np.clip(w, cfg.cut_in, cfg.rated_wind) ** 3 - ci3) / (r3 - ci3)
    return np.where((w < cfg.cut_in) | (w > cfg.cut_out), 0.0, partial)


def pitch_curve(wind, cfg: SimConfig):
    w = np.asarray(wind, dtype=float)
    return cfg.pitch_gain * np.maximum(w - cfg.rated_wind, 0.0)


def thrust_load(wind, cfg: SimConfig):
    """Mean flap load per blade: quadratic below rated, relieved by pitch above."""
    w = np.asarray(wind, dtype=float)
    vr = cfg.rated_wind
    below = cfg.thrust_coefficient * w ** 2
    above = cfg.thrust_coefficient * vr ** 2 * np.sqrt(vr / np.maximum(w, vr))
    return np.where(w <= vr, below, above)


def generate_healthy(cfg: SimConfig, bounds: RegionBoundaries | None = None) -> LabeledRun:
    """Healthy 12-channel telemetry; bit-identical for identical configs."""
    n, dt = cfg.n_samples, cfg.sample_period
    rng = np.random.default_rng(cfg.seed)
    t = np.arange(n) * dt
    if cfg.ramp_to is None:
        mean = np.full(n, float(cfg.mean_wind))
    else:
        mean = cfg.mean_wind + (cfg.ramp_to - cfg.mean_wind) * t / max(t[-1], dt)

    # draw every random stream up front in a fixed order
    e_turb = rng.standard_normal(n)
    psi0 = rng.uniform(0.0, 2 * math.pi)
    noise = rng.standard_normal((n, 12))

    a = math.exp(-dt / cfg.turbulence_time_constant)
    turb, _ = lfilter([math.sqrt(1 - a * a)], [1, -a], e_turb[1:], zi=[a * e_turb[0]])
    turb = np.concatenate([[e_turb[0]], turb])
    wind = np.maximum(mean * (1.0 + cfg.turbulence_intensity * turb), 0.0)

    # rotor and drivetrain respond to a lagged "effective" wind
    v_eff = _lag(wind, cfg.rotor_time_constant, dt, wind[0])
    omega = _lag(rotor_setpoint(wind, cfg), cfg.rotor_time_constant, dt,
                 float(rotor_setpoint(wind[:1], cfg)[0]))
    running = (v_eff >= cfg.cut_in) & (v_eff <= cfg.cut_out)
    power = np.where(running, power_curve(v_eff, cfg), 0.0)
    pitch = np.where(running, pitch_curve(v_eff, cfg), 0.0)

    azimuth = psi0 + np.cumsum(omega) * dt
    phases = azimuth[:, None] + np.array([0.0, 2 * math.pi / 3, 4 * math.pi / 3])
    thrust = thrust_load(v_eff, cfg) * np.where(running, 1.0, 0.1)
    flap = thrust[:, None] * (1.0 + cfg.flap_1p_amplitude * np.sin(phases))
    torque_share = np.where(omega > 1e-3, power / np.maximum(omega, 1e-3), 0.0) / 3.0
    edge = cfg.blade_mass_moment * np.sin(phases) + torque_share[:, None]

    x = np.empty((n, 12))
    x[:, 0:3] = flap + cfg.noise_flap * noise[:, 0:3]
    x[:, 3:6] = edge + cfg.noise_edge * noise[:, 3:6]
    x[:, 6] = omega + cfg.noise_rotor * noise[:, 6]
    x[:, 7] = wind + cfg.noise_wind * noise[:, 7]
    x[:, 8] = power + cfg.noise_power * noise[:, 8]
    x[:, 9:12] = pitch[:, None] + cfg.noise_pitch * noise[:, 9:12]

    data = SignalMatrix(x, FULL, dt, cfg.start_time)
    return LabeledRun(data, None, segment_regions(data, bounds or cfg.boundaries()))


def fault_start_index(data: SignalMatrix, t_f: float) -> int:
    k = math.ceil((t_f - data.start_time) / data.sample_period - 1e-9)
    if k <= 0 or k >= data.n:
        raise FaultAfterEnd(
            f"fault time {t_f} s is outside the run ({data.start_time} s, "
            f"{data.start_time + data.n * data.sample_period} s)")
    return k


def inject_fault(run: LabeledRun, fault: FaultSpec) -> LabeledRun:
    data = run.data
    if fault.channel not in data.channels:
        raise UnknownChannel(fault.channel)
    k = fault_start_index(data, fault.t_f)
    c = data.channels.index(fault.channel)
    x = np.array(data.samples)
    kind = fault.kind
    if kind in (FaultKind.FLAP_BIAS, FaultKind.EDGE_BIAS, FaultKind.FLAP_JUMP):
        x[k:, c] = x[k:, c] + fault.magnitude
    elif kind in (FaultKind.FLAP_STUCK, FaultKind.EDGE_STUCK):
        x[k:, c] = fault.magnitude * data.samples[k, c]
    elif kind is FaultKind.FLAP_EXP_DRIFT:
        t = data.times[k:]
        x[k:, c] = x[k:, c] + fault.magnitude * (1.0 - np.exp(-(t - fault.t_f) / fault.time_constant))
    else:  # pragma: no cover
        raise ValueError(kind)
    return LabeledRun(data.replace(x), fault, run.regions)


def with_seed(cfg: SimConfig, seed: int, **changes) -> SimConfig:
    return replace(cfg, seed=seed, **changes)
