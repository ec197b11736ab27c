"""Offline training, online monitoring and fault-injection campaigns."""
from __future__ import annotations

import configparser
import csv
import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .autoencoder.model import TrainReport, default_stack, train_ae
from .data import (
    AE_SUBSET,
    MONITORED_REGIONS,
    NormalizerState,
    RegionBoundaries,
    RegionLabel,
    SignalMatrix,
    fit_normalizer,
    read_csv,
    region_segments,
    segment_regions,
    split_dataset,
)
from .dpca import fit_dpca
from .errors import DataError, InsufficientData, InsufficientRegionData, InvalidConfig, MissingModel
from .glr import GlrConfig, block_stream, calibrate_glr, empirical_threshold, estimate_h0
from .monitor import DETECTORS, METHODS, ModelSet, exceedance_before, glr_input, monitor_run, residual_trace
from .persist import load_model, save_model
from .sim import FaultKind, FaultSpec, SimConfig, fault_start_index, generate_healthy, inject_fault

HEALTHY = "Healthy"
ALL_SCENARIOS = (HEALTHY,) + tuple(k.value for k in FaultKind)
REGIME_WINDS = (5.0, 9.0, 12.0, 16.0)


@dataclass
class PipelineConfig:
    """Every tunable of the pipeline; ``section`` metadata maps fields onto config-file sections."""

    data_path: Optional[str] = field(default=None, metadata={"section": "paths"})
    models_dir: str = field(default="models", metadata={"section": "paths"})
    reports_dir: str = field(default="reports", metadata={"section": "paths"})
    method: str = field(default="both", metadata={"section": "pipeline"})
    detector: str = field(default="both", metadata={"section": "pipeline"})
    seed: int = field(default=0, metadata={"section": "pipeline"})
    # healthy training data: runs per regime mean wind, split into train and validation
    duration: float = field(default=900.0, metadata={"section": "sim"})
    regime_winds: tuple = field(default=REGIME_WINDS, metadata={"section": "sim"})
    train_runs: int = field(default=8, metadata={"section": "sim"})
    val_runs: int = field(default=2, metadata={"section": "sim"})
    # any further SimConfig field (thrust_coefficient, noise_flap, ...) set in [sim]
    sim_overrides: dict = field(default_factory=dict, metadata={"section": "sim"})
    window: int = field(default=100, metadata={"section": "pca"})
    cv_target: float = field(default=0.9, metadata={"section": "pca"})
    pf: float = field(default=0.01, metadata={"section": "pca"})
    lpf_alpha: float = field(default=0.98, metadata={"section": "pca"})
    breakpoints: tuple = field(default=(3.0, 7.0, 11.0, 13.0), metadata={"section": "pca"})
    min_dwell: int = field(default=50, metadata={"section": "pca"})
    epochs: int = field(default=200, metadata={"section": "ae"})
    train_stride: int = field(default=20, metadata={"section": "ae"})
    batch_size: int = field(default=64, metadata={"section": "ae"})
    learning_rate: float = field(default=1e-3, metadata={"section": "ae"})
    filters: int = field(default=16, metadata={"section": "ae"})
    kernel: int = field(default=5, metadata={"section": "ae"})
    hidden: int = field(default=32, metadata={"section": "ae"})
    latent: int = field(default=12, metadata={"section": "ae"})
    # GLR input samples are means over non-overlapping blocks of this many samples
    block: int = field(default=100, metadata={"section": "glr"})
    pd_target: float = field(default=0.99, metadata={"section": "glr"})
    shift_ratio: float = field(default=2.0, metadata={"section": "glr"})
    mc_runs: int = field(default=1000, metadata={"section": "glr"})
    calibration_runs: int = field(default=100, metadata={"section": "glr"})
    trials: int = field(default=100, metadata={"section": "campaign"})
    run_length: float = field(default=900.0, metadata={"section": "campaign"})
    t_f: float = field(default=300.0, metadata={"section": "campaign"})
    faults: tuple = field(default=ALL_SCENARIOS, metadata={"section": "campaign"})
    blade: int = field(default=1, metadata={"section": "campaign"})

    def __post_init__(self):
        for name in ("regime_winds", "breakpoints", "faults"):
            v = getattr(self, name)
            if isinstance(v, str):
                v = [s.strip() for s in v.split(",") if s.strip()]
            setattr(self, name, tuple(v))
        self.regime_winds = tuple(float(v) for v in self.regime_winds)
        self.breakpoints = tuple(float(v) for v in self.breakpoints)
        if self.method not in ("dpca", "ae", "both"):
            raise InvalidConfig(f"method must be dpca, ae or both, got {self.method!r}")
        if self.detector not in ("static", "glr", "both"):
            raise InvalidConfig(f"detector must be static, glr or both, got {self.detector!r}")
        for name in ("train_runs", "val_runs", "window", "epochs", "train_stride", "batch_size",
                     "block", "mc_runs", "calibration_runs", "trials"):
            if getattr(self, name) < 1:
                raise InvalidConfig(f"{name} must be at least 1")
        if len(self.regime_winds) != len(MONITORED_REGIONS):
            raise InvalidConfig("regime_winds needs one mean wind per monitored region")
        for name in ("pf", "pd_target", "lpf_alpha", "cv_target"):
            if not 0 < getattr(self, name) < 1:
                raise InvalidConfig(f"{name} must lie in (0, 1)")
        if not self.shift_ratio > 1:
            raise InvalidConfig("shift_ratio must exceed 1")
        if not 0 < self.t_f < self.run_length:
            raise InvalidConfig("t_f must lie inside the run")
        if self.blade not in (1, 2, 3):
            raise InvalidConfig("blade must be 1, 2 or 3")
        for name in self.faults:
            if name not in ALL_SCENARIOS:
                raise InvalidConfig(f"unknown scenario {name!r}")
        sim_fields = {f.name: f for f in dataclasses.fields(SimConfig)}
        for key in self.sim_overrides:
            if key not in sim_fields or key in ("seed", "mean_wind", "duration"):
                raise InvalidConfig(f"unknown simulator setting {key!r}")
        self.sim(0, 9.0)
        try:
            self.boundaries()
        except ValueError as exc:
            raise InvalidConfig(str(exc)) from exc

    @property
    def methods(self) -> tuple:
        return METHODS if self.method == "both" else (self.method,)

    @property
    def detectors(self) -> tuple:
        return DETECTORS if self.detector == "both" else (self.detector,)

    def boundaries(self) -> RegionBoundaries:
        return RegionBoundaries(breakpoints=self.breakpoints, min_dwell=self.min_dwell)

    def sim(self, seed: int, mean_wind: float, duration: Optional[float] = None) -> SimConfig:
        return SimConfig(**{**self.sim_overrides, "seed": int(seed), "mean_wind": mean_wind,
                            "duration": self.duration if duration is None else duration})


def _coerce(text: str, default):
    if isinstance(default, bool):
        return text.strip().lower() in ("1", "true", "yes", "on")
    if isinstance(default, int):
        return int(text)
    if isinstance(default, float):
        return float(text)
    if default is None:
        try:
            return float(text)
        except ValueError:
            return text.strip()
    return text.strip()


def load_config(path=None, **overrides) -> PipelineConfig:
    """Defaults, then the config file, then explicit overrides (``None`` overrides are ignored)."""
    values = {}
    if path is not None:
        parser = configparser.ConfigParser()
        try:
            with open(path, encoding="utf-8") as fh:
                parser.read_file(fh)
        except (OSError, configparser.Error) as exc:
            raise InvalidConfig(f"cannot read config {path}: {exc}") from exc
        fields = {f.name: f for f in dataclasses.fields(PipelineConfig)}
        sim_fields = {f.name: f for f in dataclasses.fields(SimConfig)}
        for section in parser.sections():
            for key, text in parser.items(section):
                f = fields.get(key)
                if f is None and section == "sim" and key in sim_fields:
                    try:
                        values.setdefault("sim_overrides", {})[key] = _coerce(text, sim_fields[key].default)
                    except ValueError as exc:
                        raise InvalidConfig(f"bad value for {key}: {text!r}") from exc
                    continue
                if f is None or f.metadata["section"] != section:
                    raise InvalidConfig(f"unknown setting [{section}] {key}")
                try:
                    values[key] = _coerce(text, f.default)
                except ValueError as exc:
                    raise InvalidConfig(f"bad value for {key}: {text!r}") from exc
    values.update({k: v for k, v in overrides.items() if v is not None})
    return PipelineConfig(**values)


def trial_seed(master: int, *counter: int) -> int:
    """Counter-based seed: independent of how many other trials or scenarios run."""
    return int(np.random.SeedSequence(master, spawn_key=tuple(counter)).generate_state(1)[0])


# stream ids keep training, validation, calibration and campaign runs disjoint
_TRAIN, _VAL, _CAL, _CAMPAIGN = 1, 2, 3, 4


def healthy_runs(cfg: PipelineConfig, stream: int, per_regime: int) -> list[SignalMatrix]:
    out = []
    for i in range(per_regime):
        for j, wind in enumerate(cfg.regime_winds):
            out.append(generate_healthy(cfg.sim(trial_seed(cfg.seed, stream, j, i), wind),
                                        cfg.boundaries()).data)
    return out


def load_healthy(cfg: PipelineConfig):
    """(train, validation, calibration) lists of recordings.

    A supplied CSV file (or directory of CSV files) is split per recording
    into train/validation/calibration pieces; otherwise runs are simulated.
    """
    if cfg.data_path:
        p = Path(cfg.data_path)
        files = sorted(p.glob("*.csv")) if p.is_dir() else [p]
        train, val, cal = [], [], []
        for f in files:
            a, b, c = split_dataset(read_csv(f))
            train.append(a)
            val.append(b)
            cal.append(c)
        return train, val, cal
    return (healthy_runs(cfg, _TRAIN, cfg.train_runs), healthy_runs(cfg, _VAL, cfg.val_runs),
            healthy_runs(cfg, _CAL, max(1, math.ceil(cfg.calibration_runs / len(cfg.regime_winds)))))


def dpca_normalizer(segments: Sequence[SignalMatrix], scale: np.ndarray) -> NormalizerState:
    """Region mean with a deviation shared by every region."""
    local = fit_normalizer(segments)
    return NormalizerState(local.mean, scale, local.channels)


def fit_region_models(train: Sequence[SignalMatrix], cfg: PipelineConfig) -> dict:
    bounds = cfg.boundaries()
    scale = fit_normalizer(list(train)).std
    pieces = {r: [] for r in MONITORED_REGIONS}
    for run in train:
        labels = segment_regions(run, bounds)
        for r in MONITORED_REGIONS:
            pieces[r].extend(run.slice(a, b) for a, b in region_segments(labels, int(r)))
    models = {}
    for r in MONITORED_REGIONS:
        usable = [s for s in pieces[r] if s.n >= cfg.window]
        try:
            models[r] = fit_dpca(usable, r, cfg.window, cfg.cv_target, cfg.pf, cfg.lpf_alpha,
                                 dpca_normalizer(usable, scale) if usable else None)
        except InsufficientData as exc:
            raise InsufficientRegionData(r, sum(s.n for s in usable)) from exc
    return models


def calibrate_method(models: ModelSet, method: str, runs: Sequence[SignalMatrix],
                     cfg: PipelineConfig) -> dict:
    """GLR settings for one method from healthy calibration runs.

    Per model (region), the H0 mean and deviation are those of the block
    means. The window is the largest that the Gaussian design procedure
    needs across models; the threshold is then the (1 - pf) quantile of the
    per-run maximum of g over the calibration runs.
    """
    bounds = cfg.boundaries()
    blocks = []
    for run in runs:
        raw, keys = glr_input(residual_trace(models, method, run, bounds=bounds))
        blocks.append(block_stream(raw, cfg.block, keys))
    keys = sorted({int(k) for b in blocks for k in b.keys})
    stats = {}
    for k in keys:
        vals = np.concatenate([b.values[b.keys == k] for b in blocks])
        try:
            stats[k] = estimate_h0(vals)
        except InsufficientData as exc:
            where = f"{method} region {RegionLabel(k).name}" if method == "dpca" else method
            raise InsufficientData(f"GLR calibration for {where}: {exc}; "
                                   "add calibration runs or shorten the block") from exc
    n_blocks = int(round(cfg.run_length / runs[0].sample_period)) // cfg.block
    fault_block = int(round(cfg.t_f / runs[0].sample_period)) // cfg.block
    M = 1
    for k in keys:
        mu0, sigma = stats[k]
        design = calibrate_glr(mu0, sigma, cfg.pf, cfg.pd_target, cfg.shift_ratio * mu0, n_blocks,
                               fault_block, cfg.mc_runs, 1, cfg.seed, cfg.block)
        M = max(M, design.M)
    streams = []
    for b in blocks:
        mu = np.array([stats[int(k)][0] for k in b.keys])
        sd = np.array([stats[int(k)][1] for k in b.keys])
        streams.append((b.values - mu) / sd)
    h = empirical_threshold(streams, M, cfg.pf)
    return {k: GlrConfig(stats[k][0], stats[k][1], M, h, cfg.block) for k in keys}


@dataclass(frozen=True)
class TrainingResult:
    models: ModelSet
    report: Optional[TrainReport]
    files: tuple


def model_files(models_dir) -> dict:
    d = Path(models_dir)
    files = {r: d / f"dpca_region_{r.name}.json" for r in MONITORED_REGIONS}
    files["ae"] = d / "ae.json"
    return files


def train_models(cfg: PipelineConfig, data=None, log=None) -> tuple[ModelSet, Optional[TrainReport]]:
    """Fit and calibrate every requested model in memory."""
    train, val, cal = load_healthy(cfg) if data is None else data
    dpca_models, ae, report = {}, None, None
    if "dpca" in cfg.methods:
        fitted = fit_region_models(train, cfg)
        glr = calibrate_method(ModelSet(dpca=fitted), "dpca", cal, cfg)
        for r, m in fitted.items():
            if int(r) not in glr:
                raise InsufficientRegionData(r, 0)
            dpca_models[r] = dataclasses.replace(m, glr=glr[int(r)])
    if "ae" in cfg.methods:
        specs = default_stack(cfg.window, len(AE_SUBSET), cfg.filters, cfg.kernel, cfg.hidden, cfg.latent)
        ae, report = train_ae(train, val, specs, cfg.epochs, cfg.seed, cfg.window, cfg.batch_size,
                              cfg.learning_rate, cfg.train_stride, cfg.pf, cfg.lpf_alpha, log=log)
        glr = calibrate_method(ModelSet(ae=ae), "ae", cal, cfg)
        ae = dataclasses.replace(ae, glr=glr[0])
    return ModelSet(dpca_models, ae), report


def train_offline(cfg: PipelineConfig, data=None, log=None) -> TrainingResult:
    """Train, calibrate and write one file per model plus the training reports."""
    models, report = train_models(cfg, data, log)
    files = write_models(models, cfg.models_dir)
    reports = Path(cfg.reports_dir)
    reports.mkdir(parents=True, exist_ok=True)
    if report is not None:
        report.to_csv(reports / "train_report.csv")
    summary = training_summary(models, report)
    (reports / "training_summary.json").write_text(json.dumps(summary, indent=1) + "\n", encoding="utf-8")
    return TrainingResult(models, report, tuple(files))


def write_models(models: ModelSet, models_dir) -> list[Path]:
    paths = model_files(models_dir)
    Path(models_dir).mkdir(parents=True, exist_ok=True)
    out = []
    for r, m in sorted(models.dpca.items()):
        out.append(save_model(m, paths[r]))
    if models.ae is not None:
        out.append(save_model(models.ae, paths["ae"]))
    return out


def load_models(models_dir, methods=METHODS) -> ModelSet:
    paths = model_files(models_dir)
    dpca_models, ae = {}, None
    if "dpca" in methods:
        for r in MONITORED_REGIONS:
            if not paths[r].exists():
                raise MissingModel(r)
            dpca_models[r] = load_model(paths[r])
    if "ae" in methods:
        if not paths["ae"].exists():
            raise MissingModel("ae")
        ae = load_model(paths["ae"])
    return ModelSet(dpca_models, ae)


def _glr_summary(cfg: Optional[GlrConfig]):
    if cfg is None:
        return None
    return {"mu0": cfg.mu0, "sigma": cfg.sigma, "M": cfg.M, "h": cfg.h, "block": cfg.stride}


def training_summary(models: ModelSet, report: Optional[TrainReport]) -> dict:
    out = {"dpca": {}, "ae": None}
    for r, m in sorted(models.dpca.items()):
        out["dpca"][r.name] = {"n_components": m.n_components, "spe_threshold": m.spe_threshold,
                               "glr": _glr_summary(m.glr)}
    if models.ae is not None:
        out["ae"] = {"mae_threshold": models.ae.mae_threshold, "glr": _glr_summary(models.ae.glr),
                     "epochs": report.epochs if report else models.ae.meta.get("epochs"),
                     "final_train_loss": report.train_loss[-1] if report else None,
                     "final_val_loss": report.val_loss[-1] if report else None}
    return out


def _write_trace(path, times, g, h, flags):
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        fh.write("t,g,h,alarm_flag\n")
        for t, a, b, f in zip(times, g, h, flags):
            fh.write(f"{t:.17g},{a:.17g},{b:.17g},{int(f)}\n")


def monitor_online(cfg: PipelineConfig, models: ModelSet, run_path, out_dir=None) -> dict:
    """Monitor one recorded run; writes a trace CSV per method and detector and a summary JSON.

    The whole recording is replayed in order; results match feeding the
    samples one at a time (the GLR streams block by block).
    """
    run = read_csv(run_path)
    out = Path(out_dir or cfg.reports_dir)
    out.mkdir(parents=True, exist_ok=True)
    methods = tuple(m for m in cfg.methods if m in models.methods()) or cfg.methods
    summary = {"run": str(run_path), "samples": run.n, "warnings": [], "detectors": {}}
    if run.n < cfg.window:
        summary["warnings"].append(
            f"run has {run.n} samples, fewer than the window of {cfg.window}; no statistic emitted")
    results = monitor_run(models, run, methods, cfg.detectors, bounds=cfg.boundaries())
    for method, res in results.items():
        for det, d in res.detections.items():
            h = np.broadcast_to(d.h, d.g.shape)
            above = np.isfinite(d.g) & np.isfinite(h)
            above[above] = d.g[above] > h[above]
            _write_trace(out / f"trace_{method}_{det}.csv", run.times, d.g, h, above)
            hi, n = exceedance_before(d)
            summary["detectors"][f"{method}_{det}"] = {
                "first_alarm_time": None if d.first_alarm is None else float(run.times[d.first_alarm]),
                "alarm_count": int(d.alarms.size),
                "exceedance_fraction": hi / n if n else 0.0,
                "samples_with_statistic": n,
            }
    (out / "monitor_summary.json").write_text(json.dumps(summary, indent=1) + "\n", encoding="utf-8")
    return {"summary": summary, "results": results}


@dataclass(frozen=True)
class CampaignResult:
    scenario: str
    method: str
    detector: str
    trials: int
    false_alarms: int
    detections: int
    strong_detections: int
    weak_detections: int
    mean_delay_s: Optional[float]
    # pooled fraction of pre-fault samples above the threshold
    exceedance_fraction: float

    def __post_init__(self):
        if self.detections != self.strong_detections + self.weak_detections:
            raise ValueError("detections must equal strong plus weak detections")
        if not 0 <= self.false_alarms <= self.trials or not 0 <= self.detections <= self.trials:
            raise ValueError("counts must lie between 0 and the trial count")

    def rate(self, count: int) -> float:
        return count / self.trials

    @property
    def false_alarm_rate(self) -> float:
        return self.rate(self.false_alarms)

    @property
    def detection_rate(self) -> float:
        return self.rate(self.detections)

    @property
    def strong_rate(self) -> float:
        return self.rate(self.strong_detections)

    @property
    def weak_rate(self) -> float:
        return self.rate(self.weak_detections)


def allocate(total: int, weights) -> list[int]:
    """Largest-remainder split of ``total`` items in proportion to ``weights``; ties go to the earlier entry."""
    w = np.asarray(weights, dtype=float)
    exact = total * w / w.sum()
    sizes = np.floor(exact).astype(int)
    order = sorted(range(len(w)), key=lambda i: (-(exact[i] - sizes[i]), i))
    for i in order[: total - int(sizes.sum())]:
        sizes[i] += 1
    return [int(v) for v in sizes]


def dwell_fractions(runs: Sequence[SignalMatrix], cfg: PipelineConfig) -> np.ndarray:
    """Share of monitored-region samples spent in each of regions II to V."""
    bounds = cfg.boundaries()
    labels = np.concatenate([segment_regions(r, bounds) for r in runs])
    counts = np.array([np.count_nonzero(labels == int(r)) for r in MONITORED_REGIONS], dtype=float)
    if counts.sum() == 0:
        raise InsufficientData("no monitored-region samples to stratify trials by")
    return counts / counts.sum()


def stratify(cfg: PipelineConfig, runs: Optional[Sequence[SignalMatrix]] = None) -> list[float]:
    """Mean wind of each trial, allocated across the regime winds by region dwell time.

    Dwell time is measured on ``runs`` (by default the simulated training corpus).
    """
    if runs is None:
        runs = healthy_runs(cfg, _TRAIN, cfg.train_runs)
    sizes = allocate(cfg.trials, dwell_fractions(runs, cfg))
    winds = []
    for wind, n in zip(cfg.regime_winds, sizes):
        winds.extend([wind] * n)
    return winds


def _scenario_fault(name: str, cfg: PipelineConfig, magnitude=None) -> Optional[FaultSpec]:
    if name == HEALTHY:
        return None
    return FaultSpec(FaultKind(name), cfg.blade, cfg.t_f, magnitude)


def run_campaign(cfg: PipelineConfig, models: ModelSet, scenarios=None, winds=None,
                 magnitudes: Optional[dict] = None, progress=None) -> list[CampaignResult]:
    """Monte Carlo campaign; every scenario sees the same healthy base runs."""
    methods = cfg.methods
    for m in methods:
        models.require(m)
    scenarios = tuple(cfg.faults if scenarios is None else scenarios)
    winds = stratify(cfg) if winds is None else list(winds)
    if len(winds) != cfg.trials:
        raise InvalidConfig("one mean wind per trial is required")
    magnitudes = magnitudes or {}
    bounds = cfg.boundaries()
    acc = {}
    for s_idx, name in enumerate(scenarios):
        fault = _scenario_fault(name, cfg, magnitudes.get(name))
        for trial in range(cfg.trials):
            sim = cfg.sim(trial_seed(cfg.seed, _CAMPAIGN, trial), winds[trial], cfg.run_length)
            run = generate_healthy(sim, bounds)
            fi = None
            if fault is not None:
                run = inject_fault(run, fault)
                fi = fault_start_index(run.data, fault.t_f)
            res = monitor_run(models, run.data, methods, cfg.detectors, fi, bounds)
            for method, mr in res.items():
                for det, d in mr.detections.items():
                    a = acc.setdefault((name, method, det), {"fa": 0, "det": 0, "strong": 0,
                                                              "delays": [], "hi": 0, "n": 0})
                    a["fa"] += d.false_alarm if fi is not None else bool(d.alarms.size)
                    a["det"] += d.detected
                    a["strong"] += d.strongly_detected
                    if d.detected:
                        a["delays"].append(d.delay() * run.data.sample_period)
                    hi, n = exceedance_before(d, fi)
                    a["hi"] += hi
                    a["n"] += n
            if progress:
                progress(name, trial)
    out = []
    for name in scenarios:
        for method in methods:
            for det in cfg.detectors:
                a = acc[(name, method, det)]
                delay = float(np.mean(a["delays"])) if a["delays"] else None
                out.append(CampaignResult(name, method, det, cfg.trials, a["fa"], a["det"], a["strong"],
                                          a["det"] - a["strong"], delay,
                                          a["hi"] / a["n"] if a["n"] else 0.0))
    return out


REPORT_FIELDS = ("scenario", "method", "detector", "trials", "false_alarms", "detections",
                 "strong_detections", "weak_detections", "false_alarm_rate", "detection_rate",
                 "strong_rate", "weak_rate", "mean_delay_s", "exceedance_fraction")


def _report_row(r: CampaignResult) -> dict:
    def f6(x):
        return "null" if x is None else f"{x:.6f}"

    return {
        "scenario": r.scenario, "method": r.method, "detector": r.detector, "trials": str(r.trials),
        "false_alarms": str(r.false_alarms), "detections": str(r.detections),
        "strong_detections": str(r.strong_detections), "weak_detections": str(r.weak_detections),
        "false_alarm_rate": f6(r.false_alarm_rate), "detection_rate": f6(r.detection_rate),
        "strong_rate": f6(r.strong_rate), "weak_rate": f6(r.weak_rate),
        "mean_delay_s": f6(r.mean_delay_s), "exceedance_fraction": f6(r.exceedance_fraction),
    }


def emit_report(results: Sequence[CampaignResult], reports_dir, stem: str = "campaign") -> tuple[Path, Path]:
    """CSV with one row per (scenario, method, detector) and a JSON document mirroring it."""
    if not results:
        raise ValueError("no campaign results to report")
    d = Path(reports_dir)
    d.mkdir(parents=True, exist_ok=True)
    rows = [_report_row(r) for r in results]
    csv_path, json_path = d / f"{stem}.csv", d / f"{stem}.json"
    with open(csv_path, "w", newline="\n", encoding="utf-8") as fh:
        fh.write(",".join(REPORT_FIELDS) + "\n")
        for row in rows:
            fh.write(",".join("" if row[k] == "null" else row[k] for k in REPORT_FIELDS) + "\n")
    strings = ("scenario", "method", "detector")
    lines = []
    for row in rows:
        parts = [f'"{k}": {json.dumps(row[k]) if k in strings else row[k]}' for k in REPORT_FIELDS]
        lines.append("  {" + ", ".join(parts) + "}")
    json_path.write_text('{"results": [\n' + ",\n".join(lines) + "\n]}\n", encoding="utf-8")
    return csv_path, json_path


def read_report(path) -> list[dict]:
    path = Path(path)
    if path.suffix == ".json":
        try:
            return json.loads(path.read_text(encoding="utf-8"))["results"]
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise DataError(f"malformed campaign report {path}: {exc}") from exc
    ints = ("trials", "false_alarms", "detections", "strong_detections", "weak_detections")
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    try:
        for row in rows:
            for k in REPORT_FIELDS[3:]:
                row[k] = int(row[k]) if k in ints else (float(row[k]) if row[k] else None)
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"malformed campaign report {path}: {exc}") from exc
    return rows
