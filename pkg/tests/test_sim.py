import math

import numpy as np
import pytest

from bladecm.data import FULL
from bladecm.errors import FaultAfterEnd, InvalidConfig, UnknownChannel
from bladecm.sim import (
    FaultKind,
    FaultSpec,
    LabeledRun,
    SimConfig,
    generate_healthy,
    inject_fault,
    power_curve,
)

QUIET = dict(turbulence_intensity=0.0, noise_flap=0.0, noise_edge=0.0, noise_rotor=0.0,
             noise_wind=0.0, noise_power=0.0, noise_pitch=0.0)


@pytest.fixture(scope="module")
def run8():
    return generate_healthy(SimConfig(seed=42, duration=900.0, mean_wind=8.0))


def test_config_validation():
    with pytest.raises(InvalidConfig):
        SimConfig(cut_in=12.0)
    with pytest.raises(InvalidConfig):
        SimConfig(duration=10.05)
    with pytest.raises(InvalidConfig):
        SimConfig(rated_power=-1.0)
    assert SimConfig(duration=60.0).n_samples == 600


def test_below_cut_in_is_idle():
    run = generate_healthy(SimConfig(mean_wind=2.0, duration=60.0, **QUIET))
    assert np.all(run.data.column("grid_power") == 0.0)
    for b in (1, 2, 3):
        assert np.all(run.data.column(f"pitch{b}") == 0.0)
    assert np.all(run.regions == 1)


def test_high_wind_saturates():
    cfg = SimConfig(mean_wind=20.0, duration=120.0, **QUIET)
    run = generate_healthy(cfg)
    tail = slice(600, None)
    assert np.allclose(run.data.column("grid_power")[tail], cfg.rated_power, rtol=1e-9)
    assert np.allclose(run.data.column("rotor_speed")[tail], cfg.rated_rotor_speed, rtol=1e-9)
    assert np.all(run.regions[tail] == 5)


def test_flap_follows_wind(run8):
    flap = run8.data.column("flap1")
    wind = run8.data.column("wind_speed")
    assert np.corrcoef(flap, wind)[0, 1] > 0.5


def test_edge_peak_at_rotor_frequency(run8):
    # turbulence frequency-modulates the 1P line, so the reference is a unit sinusoid
    # driven by the azimuth integrated from the recorded rotor speed
    dt = run8.data.sample_period
    edge = run8.data.column("edge1")
    ref = np.sin(np.cumsum(run8.data.column("rotor_speed")) * dt)
    freqs = np.fft.rfftfreq(edge.size, dt)
    peak = freqs[np.argmax(np.abs(np.fft.rfft(edge - edge.mean())))]
    expected = freqs[np.argmax(np.abs(np.fft.rfft(ref - ref.mean())))]
    assert abs(peak - expected) <= freqs[1]
    omega = run8.data.column("rotor_speed")
    band = (omega.min() / (2 * math.pi), omega.max() / (2 * math.pi))
    assert band[0] <= peak <= band[1]


def test_deterministic():
    cfg = SimConfig(seed=7, duration=60.0, mean_wind=11.0)
    a, b = generate_healthy(cfg), generate_healthy(cfg)
    assert np.array_equal(a.data.samples, b.data.samples)
    assert np.array_equal(a.regions, b.regions)
    c = generate_healthy(SimConfig(seed=8, duration=60.0, mean_wind=11.0))
    assert not np.array_equal(a.data.samples, c.data.samples)


def test_ramp_visits_every_region():
    run = generate_healthy(SimConfig(seed=1, duration=1200.0, mean_wind=0.5, ramp_to=24.0))
    assert set(np.unique(run.regions).tolist()) == {1, 2, 3, 4, 5}


def test_power_curve_monotone():
    cfg = SimConfig()
    wind = np.linspace(0.0, cfg.cut_out, 2001)
    p = power_curve(wind, cfg)
    up = wind <= cfg.rated_wind
    assert np.all(np.diff(p[up]) >= 0)
    assert np.all(p[(wind >= cfg.rated_wind) & (wind <= cfg.cut_out)] == cfg.rated_power)
    steady = []
    for v in (2.0, 4.0, 6.0, 8.0, 10.0, 12.0, 16.0, 20.0):
        run = generate_healthy(SimConfig(mean_wind=v, duration=60.0, **QUIET))
        steady.append(run.data.column("grid_power")[-1])
    assert np.all(np.diff(steady) >= 0)
    assert steady[-1] == steady[-2] == cfg.rated_power


@pytest.fixture(scope="module")
def short():
    return generate_healthy(SimConfig(seed=5, duration=120.0, mean_wind=9.0))


def test_zero_bias_is_identity(short):
    out = inject_fault(short, FaultSpec(FaultKind.FLAP_BIAS, 1, 50.0, 0.0))
    assert np.array_equal(out.data.samples, short.data.samples)


@pytest.mark.parametrize("kind", list(FaultKind))
def test_prefix_and_other_channels_untouched(short, kind):
    fault = FaultSpec(kind, 2, 60.0)
    out = inject_fault(short, fault)
    k = 600
    assert np.array_equal(out.data.samples[:k], short.data.samples[:k])
    c = FULL.index(fault.channel)
    others = [i for i in range(12) if i != c]
    assert np.array_equal(out.data.samples[:, others], short.data.samples[:, others])
    assert not np.array_equal(out.data.samples[k:, c], short.data.samples[k:, c])
    assert out.fault == fault


def test_bias_offsets(short):
    out = inject_fault(short, FaultSpec("EdgeBias", 3, 60.0))
    diff = out.data.column("edge3")[600:] - short.data.column("edge3")[600:]
    assert np.allclose(diff, 1e6, rtol=0, atol=1e-6)


def test_stuck_value(short):
    out = inject_fault(short, FaultSpec(FaultKind.FLAP_STUCK, 1, 60.0))
    m_at_tf = short.data.column("flap1")[600]
    assert np.all(out.data.column("flap1")[600:] == 0.8 * m_at_tf)


def test_exponential_drift(short):
    out = inject_fault(short, FaultSpec(FaultKind.FLAP_EXP_DRIFT, 1, 30.0, 1e6, time_constant=30.0))
    k = 600  # t_f + 30 s
    rise = out.data.column("flap1")[k] - short.data.column("flap1")[k]
    assert rise == pytest.approx(1e6 * (1 - math.exp(-1.0)), rel=1e-9)
    assert rise == pytest.approx(6.321e5, rel=1e-4)


def test_fault_errors(short):
    with pytest.raises(FaultAfterEnd):
        inject_fault(short, FaultSpec(FaultKind.FLAP_BIAS, 1, 500.0))
    sub = LabeledRun(short.data.select(["edge1", "edge2"]))
    with pytest.raises(UnknownChannel):
        inject_fault(sub, FaultSpec(FaultKind.FLAP_BIAS, 1, 10.0))
    with pytest.raises(InvalidConfig):
        FaultSpec(FaultKind.FLAP_BIAS, 4, 10.0)
    with pytest.raises(ValueError):
        FaultSpec("NoSuchFault")


def test_bias_is_a_few_flap_deviations():
    # the default offset should sit a handful of healthy deviations above the flap load
    ratios = []
    for v in (5.0, 9.0, 12.0, 16.0):
        run = generate_healthy(SimConfig(seed=11, duration=600.0, mean_wind=v))
        ratios.append(1e6 / run.data.column("flap1").std(ddof=1))
    assert 2.0 < np.median(ratios) < 8.0
