"""Run trained models over a recording and classify the result with both detectors."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Optional

import numpy as np

from .autoencoder.model import AeModel, mae_statistic
from .data import MONITORED_REGIONS, RegionBoundaries, RegionLabel, SignalMatrix, segment_regions
from .dpca import DpcaModel, dpca_monitor
from .errors import MissingModel
from .glr import DetectionTrace, GlrConfig, detect, glr_trace
from .stats import ResidualTrace

METHODS = ("dpca", "ae")
DETECTORS = ("static", "glr")


@dataclass(frozen=True)
class ModelSet:
    dpca: Mapping[RegionLabel, DpcaModel] = field(default_factory=dict)
    ae: Optional[AeModel] = None

    def methods(self) -> tuple:
        out = []
        if self.dpca:
            out.append("dpca")
        if self.ae is not None:
            out.append("ae")
        return tuple(out)

    def require(self, method: str):
        if method == "dpca":
            missing = [r for r in MONITORED_REGIONS if r not in self.dpca]
            if missing:
                raise MissingModel(missing[0])
        elif self.ae is None:
            raise MissingModel("ae")


@dataclass(frozen=True)
class MethodResult:
    trace: ResidualTrace
    # per-sample GLR statistic (NaN before the first complete block)
    glr: Optional[np.ndarray]
    detections: dict


def glr_configs(models: ModelSet, method: str):
    if method == "ae":
        return models.ae.glr
    cfgs = {int(r): m.glr for r, m in models.dpca.items()}
    return None if any(c is None for c in cfgs.values()) else cfgs


def residual_trace(models: ModelSet, method: str, run: SignalMatrix,
                   regions: Optional[np.ndarray] = None,
                   bounds: RegionBoundaries | None = None) -> ResidualTrace:
    models.require(method)
    if method == "dpca":
        return dpca_monitor(models.dpca, run, bounds, regions)
    return mae_statistic(models.ae, run)


def glr_input(trace: ResidualTrace) -> tuple[np.ndarray, Optional[np.ndarray]]:
    """Raw statistic and block keys for the GLR; idle samples carry no statistic."""
    if trace.regions is None:
        return trace.raw, None
    raw = np.where(trace.regions == int(RegionLabel.I), np.nan, trace.raw)
    return raw, trace.regions


def monitor_method(models: ModelSet, method: str, run: SignalMatrix,
                   detectors=DETECTORS, fault_index: Optional[int] = None,
                   regions: Optional[np.ndarray] = None,
                   bounds: RegionBoundaries | None = None) -> MethodResult:
    trace = residual_trace(models, method, run, regions, bounds)
    out = {}
    g = None
    if "static" in detectors:
        out["static"] = detect(trace.filtered, trace.threshold, fault_index)
    if "glr" in detectors:
        cfgs = glr_configs(models, method)
        if cfgs is None:
            raise MissingModel(f"{method} GLR calibration")
        raw, keys = glr_input(trace)
        g = glr_trace(raw, cfgs, keys)
        h = cfgs.h if isinstance(cfgs, GlrConfig) else next(iter(cfgs.values())).h
        out["glr"] = detect(g, h, fault_index)
    return MethodResult(trace, g, out)


def monitor_run(models: ModelSet, run: SignalMatrix, methods=None, detectors=DETECTORS,
                fault_index: Optional[int] = None, bounds: RegionBoundaries | None = None):
    """``{method: MethodResult}`` for every requested method."""
    methods = models.methods() if methods is None else tuple(methods)
    regions = segment_regions(run, bounds) if "dpca" in methods else None
    return {m: monitor_method(models, m, run, detectors, fault_index, regions, bounds) for m in methods}


def exceedance_before(d: DetectionTrace, stop: Optional[int] = None) -> tuple[int, int]:
    """(samples above threshold, samples with a statistic) before ``stop``."""
    g = d.g[:stop]
    h = np.broadcast_to(d.h, d.g.shape)[:stop]
    ok = np.isfinite(g) & np.isfinite(h)
    return int(np.count_nonzero(g[ok] > h[ok])), int(np.count_nonzero(ok))
