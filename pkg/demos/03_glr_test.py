"""
The window-limited GLR test
===========================

g(k) on a Gaussian stream with a mean change, the persistent-shift limit,
and a Monte Carlo design of the window M and threshold h.
"""
import numpy as np

from bladecm.glr import GlrConfig, calibrate_glr, detect, glr_statistic

rng = np.random.default_rng(0)
mu0, sigma = 1.0, 0.5
z = mu0 + sigma * rng.standard_normal(600)
z[400:] += 0.5  # one standard deviation from sample 400 on

cfg = GlrConfig(mu0, sigma, M=50)
g = glr_statistic(z, cfg)
print(f"max g before the change {g[:400].max():.2f}, after {g[400:].max():.2f}")

# noiseless persistent shift: g saturates at M delta^2 / (2 sigma^2)
flat = glr_statistic(np.full(200, mu0 + 0.5), cfg)
print(f"steady state {flat[-1]:.4f}, closed form {50 * 0.5 ** 2 / (2 * sigma ** 2):.4f}")

# choose M and h for 1 % false alarms per run and 99 % detection of mu1 = 2 mu0
design = calibrate_glr(mu0, sigma, 0.01, 0.99, mu1=2 * mu0, n_samples=600, fault_index=400,
                       runs=1000, m_start=4, seed=1)
print(f"designed window M = {design.M}, threshold h = {design.h:.2f}")
res = detect(glr_statistic(z, design), design.h, 400)
print(f"on the example stream: detected={res.detected}, false alarm={res.false_alarm}, "
      f"delay={res.delay()} samples")
