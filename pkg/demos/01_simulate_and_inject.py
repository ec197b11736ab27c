"""
Simulating a turbine and corrupting a blade sensor
==================================================

A healthy 15 minute run at 12 m/s mean wind, its operating regions, and
what the six sensor faults do to blade 1.
"""
import numpy as np

from bladecm.data import RegionLabel, segment_regions
from bladecm.sim import FaultKind, FaultSpec, SimConfig, generate_healthy, inject_fault

# 10 Hz samples of the twelve monitored channels
cfg = SimConfig(seed=7, mean_wind=12.0, duration=900.0)
run = generate_healthy(cfg)
print(f"{run.data.n} samples, channels: {', '.join(run.data.channels)}")

# the operating region follows wind, power and rotor speed
labels = segment_regions(run.data)
for r in RegionLabel:
    share = np.mean(labels == int(r))
    if share:
        print(f"region {r.name:>3s}: {100 * share:5.1f} % of the run")

flap = run.data.column("flap1")
print(f"flap1 mean {flap.mean():.3g} N*m, std {flap.std():.3g} N*m")

# every fault starts at t_f = 300 s and only touches one channel
for kind in FaultKind:
    faulty = inject_fault(run, FaultSpec(kind, blade=1, t_f=300.0))
    name = FaultSpec(kind).channel
    diff = faulty.data.column(name) - run.data.column(name)
    onset = np.flatnonzero(diff)[0] / 10 if diff.any() else None
    print(f"{kind.value:13s} on {name}: first change at {onset} s, "
          f"mean post-fault offset {diff[3000:].mean():.3g}")
