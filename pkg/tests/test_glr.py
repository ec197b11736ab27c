import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bladecm.errors import InsufficientData, NonFiniteInput, NoFeasibleWindow
from bladecm.glr import (
    GlrConfig,
    GlrStream,
    ResidualGlr,
    block_stream,
    calibrate_glr,
    detect,
    empirical_threshold,
    estimate_h0,
    glr_statistic,
    glr_statistic_batch,
    glr_trace,
    hold,
    approximate_window,
)


def brute_force(z, mu0, sigma, M):
    """Direct double loop over the end index k and the change onset j."""
    g = []
    for k in range(len(z)):
        best = 0.0
        for j in range(max(0, k - M + 1), k + 1):
            s = 0.0
            for i in range(j, k + 1):
                s += z[i] - mu0
            best = max(best, s * s / (2 * sigma ** 2 * (k - j + 1)))
        g.append(best)
    return np.array(g)


def test_config_invariants():
    with pytest.raises(ValueError):
        GlrConfig(0.0, 0.0)
    with pytest.raises(ValueError):
        GlrConfig(0.0, 1.0, M=0)
    with pytest.raises(ValueError):
        GlrConfig(0.0, 1.0, h=0.0)


def test_constant_stream_is_zero():
    assert np.all(glr_statistic(np.full(50, 3.0), GlrConfig(3.0, 0.5, M=10)) == 0.0)


def test_persistent_shift_closed_form():
    mu0, sigma, delta, M = 1.5, 0.3, 0.7, 25
    g = glr_statistic(np.full(200, mu0 + delta), GlrConfig(mu0, sigma, M))
    expected = M * delta ** 2 / (2 * sigma ** 2)
    assert np.all(np.abs(g[M - 1:] - expected) <= 1e-9 * expected)
    assert np.all(g[:M - 1] < expected)


@pytest.mark.parametrize("seed", range(4))
def test_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    z = 2.0 + 0.5 * rng.standard_normal(120)
    cfg = GlrConfig(2.0, 0.5, M=17)
    ref = brute_force(z, 2.0, 0.5, 17)
    assert np.max(np.abs(glr_statistic(z, cfg) - ref)) <= 1e-12 * max(1.0, ref.max())
    stream = GlrStream(cfg)
    online = np.array([stream.update(v) for v in z])
    assert np.max(np.abs(online - ref)) <= 1e-12 * max(1.0, ref.max())
    batch = glr_statistic_batch(np.vstack([z, z[::-1]]), cfg)
    assert np.array_equal(batch[0], glr_statistic(z, cfg))


def test_h0_dominates_chi_square():
    # max over nested windows is at least the single full-window term, which is chi2(1)/2
    rng = np.random.default_rng(5)
    z = rng.standard_normal((2000, 600))
    g = glr_statistic_batch(z, GlrConfig(0.0, 1.0, M=600))[:, -1]
    full = z.sum(axis=1) ** 2 / (2 * 600)
    assert np.all(g >= full - 1e-12)
    assert np.mean(2 * g > 3.841) > 0.05


@settings(max_examples=40, deadline=None)
@given(st.floats(0.1, 100.0), st.floats(-50.0, 50.0), st.integers(1, 30))
def test_scale_consistency(a, b, M):
    rng = np.random.default_rng(M)
    z = rng.standard_normal(80)
    g1 = glr_statistic(z, GlrConfig(0.2, 1.1, M))
    g2 = glr_statistic(a * z + b, GlrConfig(a * 0.2 + b, a * 1.1, M))
    assert np.all(np.abs(g1 - g2) <= 1e-10 * np.maximum(1.0, np.abs(g1)))


def test_non_finite_rejected():
    with pytest.raises(NonFiniteInput):
        glr_statistic([0.0, np.nan], GlrConfig(0.0, 1.0))
    with pytest.raises(NonFiniteInput):
        GlrStream(GlrConfig(0.0, 1.0)).update(math.inf)


def test_estimate_h0():
    mu, sd = estimate_h0(np.tile([0.0, 2.0], 1000))
    assert mu == 1.0
    assert sd == pytest.approx(math.sqrt(2000 / 1999), rel=1e-14)
    mu, sd = estimate_h0(np.full(1000, 4.0))
    assert sd == 0.0
    with pytest.raises(ValueError):
        GlrConfig(mu, sd)
    with pytest.raises(InsufficientData):
        estimate_h0(np.ones(999))


def test_estimate_h0_two_pass_oracle():
    z = np.random.default_rng(6).gamma(2.0, 0.01, 5000) + 0.3
    mu, sd = estimate_h0(z)
    m = math.fsum(z) / z.size
    s = math.sqrt(math.fsum((v - m) ** 2 for v in z) / (z.size - 1))
    assert abs(mu - m) <= 1e-12 * m and abs(sd - s) <= 1e-12 * s


def test_calibration_large_shift_stops_at_first_window():
    cfg = calibrate_glr(1.0, 0.1, mu1=2.0, n_samples=3000, runs=1000, seed=1)
    assert cfg.M == 100
    assert cfg.h > 0


def test_calibration_self_consistent():
    mu0 = sigma = 1.0
    cfg = calibrate_glr(mu0, sigma, 0.01, 0.99, mu1=2.0, n_samples=900, fault_index=300,
                        runs=1000, m_start=4, seed=2)
    rng = np.random.default_rng(99)
    h0 = mu0 + sigma * rng.standard_normal((1000, 900))
    fa = np.mean(glr_statistic_batch(h0, cfg).max(axis=1) > cfg.h)
    assert 0.003 <= fa <= 0.03
    h1 = mu0 + sigma * rng.standard_normal((1000, 900))
    h1[:, 300:] += 1.0
    pd = np.mean(glr_statistic_batch(h1[:, 300:], cfg).max(axis=1) > cfg.h)
    assert pd >= 0.99


def test_calibration_errors():
    with pytest.raises(ValueError):
        calibrate_glr(1.0, 1.0, mu1=0.5)
    with pytest.raises(NoFeasibleWindow):
        calibrate_glr(1.0, 1.0, mu1=1.001, n_samples=200, runs=50, m_start=100)


def test_approximate_window_is_positive():
    assert approximate_window(0.0, 1.0, 10.0, 5.0, 0.99) == 1
    assert approximate_window(0.0, 1.0, 0.1, 10.0, 0.99) > 100


def test_detect_examples():
    quiet = detect(np.zeros(50), 1.0, 10)
    assert quiet.alarms.size == 0 and not quiet.detected and quiet.first_alarm is None
    step = detect(np.r_[np.zeros(20), np.full(30, 2.0)], 1.0, 20)
    assert step.detected and step.strongly_detected and not step.false_alarm
    assert step.delay() == 0
    weak = detect(np.r_[np.zeros(20), [2, 2, 0.5, 2, 2]], 1.0, 20)
    assert weak.detected and not weak.strongly_detected and weak.weakly_detected
    assert weak.alarms.tolist() == [20, 23]
    early = detect(np.r_[[0, 2, 0], np.zeros(10)], 1.0, 5)
    assert early.false_alarm and not early.detected


@settings(max_examples=80, deadline=None)
@given(st.lists(st.floats(0.0, 5.0), min_size=1, max_size=100), st.floats(0.1, 4.0),
       st.integers(0, 99))
def test_detect_invariants(g, h, tf):
    tf = min(tf, len(g) - 1)
    a = detect(g, h, tf)
    b = detect(g, h, tf)
    assert np.array_equal(a.alarms, b.alarms)
    assert np.all(np.diff(a.alarms) > 0)
    if a.first_alarm is not None:
        assert a.first_alarm <= a.alarms.min()
    assert a.detected == bool(np.any(a.alarms >= tf))
    assert not (a.strongly_detected and not a.detected)


def test_block_stream_and_hold():
    raw = np.r_[np.nan, np.nan, np.arange(7.0), np.arange(4.0)]
    keys = np.r_[[1] * 9, [2] * 4]
    b = block_stream(raw, 3, keys)
    assert b.values.tolist() == [1.0, 4.0, 1.0]
    assert b.ends.tolist() == [4, 7, 11]
    assert b.keys.tolist() == [1, 1, 2]
    held = hold(b.values, b.ends, raw.size)
    assert np.all(np.isnan(held[:4]))
    assert held[4:].tolist() == [1, 1, 1, 4, 4, 4, 4, 1, 1]


def test_glr_trace_standardizes_per_key():
    rng = np.random.default_rng(7)
    raw = np.r_[5.0 + rng.standard_normal(400), 50.0 + 10 * rng.standard_normal(400)]
    keys = np.r_[[2] * 400, [3] * 400]
    cfgs = {2: GlrConfig(5.0, 1.0, 8, 3.0, 4), 3: GlrConfig(50.0, 10.0, 8, 3.0, 4)}
    g = glr_trace(raw, cfgs, keys)
    u = np.r_[raw[:400].reshape(-1, 4).mean(axis=1) - 5.0,
              (raw[400:].reshape(-1, 4).mean(axis=1) - 50.0) / 10.0]
    ref = brute_force(u, 0.0, 1.0, 8)
    assert np.allclose(g[3::4], ref, rtol=1e-12, atol=1e-12)


def test_streaming_residual_glr_matches_batch():
    rng = np.random.default_rng(8)
    raw = np.abs(rng.standard_normal(700))
    raw[100:130] = np.nan
    keys = np.r_[[2] * 350, [4] * 350]
    cfgs = {2: GlrConfig(0.8, 0.6, 12, 5.0, 10), 4: GlrConfig(0.7, 0.5, 12, 5.0, 10)}
    batch = glr_trace(raw, cfgs, keys)
    online = ResidualGlr(cfgs)
    stream = np.array([online.update(v, k) for v, k in zip(raw, keys)])
    both = np.isfinite(batch)
    assert np.array_equal(both, np.isfinite(stream))
    assert np.max(np.abs(batch[both] - stream[both])) <= 1e-12 * max(1.0, np.nanmax(batch))


def test_empirical_threshold_rank():
    streams = [np.full(5, float(i) / 10) for i in range(100)]
    h = empirical_threshold(streams, 5, 0.01)
    # max g of a constant stream c is 5 c^2 / 2; the 99th of 100 is c = 9.8
    assert h == pytest.approx(5 * 9.8 ** 2 / 2, rel=1e-12)
