import hashlib
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bladecm import pipeline
from bladecm.data import write_csv
from bladecm.errors import InsufficientData, InvalidConfig, MissingModel
from bladecm.monitor import ModelSet, monitor_run
from bladecm.sim import FaultKind, FaultSpec, generate_healthy, inject_fault

from conftest import TINY_INI, tiny_config


def _digest(paths):
    return {p.name: hashlib.sha256(p.read_bytes()).hexdigest() for p in paths}


def test_config_file_and_overrides(tmp_path):
    path = tmp_path / "c.ini"
    path.write_text(TINY_INI.format(root=tmp_path).replace("[sim]\n", "[sim]\nnoise_flap = 0.5\n"))
    cfg = pipeline.load_config(path, trials=7, seed=None)
    assert cfg.window == 10 and cfg.block == 5 and cfg.trials == 7 and cfg.seed == 0
    assert cfg.faults == ("Healthy", "FlapBias")
    assert cfg.sim_overrides == {"noise_flap": 0.5}
    assert cfg.sim(3, 9.0).noise_flap == 0.5
    assert cfg.models_dir == f"{tmp_path}/models"


@pytest.mark.parametrize("text", ["[pca]\nwindoww = 3\n", "[glr]\nwindow = 3\n", "[pca]\nwindow = ten\n",
                                  "[sim]\nseed = 4\n", "no section\n"])
def test_config_rejects_bad_files(tmp_path, text):
    path = tmp_path / "bad.ini"
    path.write_text(text)
    with pytest.raises(InvalidConfig):
        pipeline.load_config(path)


@pytest.mark.parametrize("kw", [{"method": "svm"}, {"detector": "cusum"}, {"pf": 0.0}, {"window": 0},
                                {"t_f": 900.0}, {"blade": 4}, {"faults": ("Crack",)},
                                {"regime_winds": (5.0, 9.0)}, {"shift_ratio": 1.0},
                                {"breakpoints": (7.0, 3.0, 11.0, 13.0)}])
def test_config_validation(kw):
    with pytest.raises(InvalidConfig):
        pipeline.PipelineConfig(**kw)


def test_config_missing_file():
    with pytest.raises(InvalidConfig):
        pipeline.load_config("/nonexistent/cfg.ini")


def test_trial_seed_is_counter_based():
    a = pipeline.trial_seed(0, 4, 17)
    assert a == pipeline.trial_seed(0, 4, 17)
    assert len({pipeline.trial_seed(0, 4, t) for t in range(200)}) == 200
    assert a != pipeline.trial_seed(1, 4, 17) and a != pipeline.trial_seed(0, 3, 17)


def test_allocate_examples():
    assert pipeline.allocate(10, [1, 1]) == [5, 5]
    assert pipeline.allocate(3, [1, 1]) == [2, 1]
    assert pipeline.allocate(100, [0.2, 0.35, 0.35, 0.1]) == [20, 35, 35, 10]
    assert pipeline.allocate(7, [0.5, 0.3, 0.2]) == [4, 2, 1]


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 1000), st.lists(st.floats(0.01, 10.0), min_size=1, max_size=6))
def test_allocate_properties(total, weights):
    sizes = pipeline.allocate(total, weights)
    assert sum(sizes) == total
    exact = [total * w / sum(weights) for w in weights]
    assert all(math.floor(e) - 1e-9 <= s <= math.ceil(e) + 1e-9 for s, e in zip(sizes, exact))


def test_stratify_follows_dwell(tiny):
    cfg, _ = tiny
    runs = pipeline.healthy_runs(cfg, 1, cfg.train_runs)
    frac = pipeline.dwell_fractions(runs, cfg)
    assert frac.shape == (4,) and abs(frac.sum() - 1.0) < 1e-12
    winds = pipeline.stratify(cfg, runs)
    assert len(winds) == cfg.trials
    counts = [winds.count(w) for w in cfg.regime_winds]
    assert counts == pipeline.allocate(cfg.trials, frac)
    assert winds == sorted(winds)


def test_campaign_result_invariants():
    r = pipeline.CampaignResult("FlapBias", "ae", "glr", 10, 1, 9, 7, 2, 3.5, 0.0)
    assert r.detection_rate == 0.9 and r.strong_rate == 0.7 and r.weak_rate == 0.2
    assert r.false_alarm_rate == 0.1
    with pytest.raises(ValueError):
        pipeline.CampaignResult("FlapBias", "ae", "glr", 10, 0, 9, 7, 1, None, 0.0)
    with pytest.raises(ValueError):
        pipeline.CampaignResult("FlapBias", "ae", "glr", 10, 11, 0, 0, 0, None, 0.0)


def test_report_format(tmp_path):
    rows = [pipeline.CampaignResult("Healthy", "dpca", "static", 3, 1, 0, 0, 0, None, 0.0123456789),
            pipeline.CampaignResult("FlapBias", "ae", "glr", 3, 0, 3, 2, 1, 2.0 / 3, 0.0)]
    csv_path, json_path = pipeline.emit_report(rows, tmp_path)
    lines = csv_path.read_text().splitlines()
    assert lines[0].split(",") == list(pipeline.REPORT_FIELDS)
    assert lines[1] == "Healthy,dpca,static,3,1,0,0,0,0.333333,0.000000,0.000000,0.000000,,0.012346"
    assert lines[2].endswith(",0.666667,0.000000")
    doc = json.loads(json_path.read_text())
    assert doc["results"][0]["mean_delay_s"] is None
    assert doc["results"][1]["weak_rate"] == pytest.approx(1 / 3, abs=1e-6)
    assert pipeline.read_report(csv_path) == pipeline.read_report(json_path)
    with pytest.raises(ValueError):
        pipeline.emit_report([], tmp_path)


def test_report_re_emission_is_identical(tmp_path):
    rows = [pipeline.CampaignResult("EdgeBias", "dpca", "glr", 100, 2, 95, 90, 5, 12.345678912, 0.004)]
    _, first = pipeline.emit_report(rows, tmp_path / "a")
    again = [pipeline.CampaignResult(**{k: r[k] for k in (
        "scenario", "method", "detector", "trials", "false_alarms", "detections", "strong_detections",
        "weak_detections", "mean_delay_s", "exceedance_fraction")}) for r in pipeline.read_report(first)]
    _, second = pipeline.emit_report(again, tmp_path / "b")
    assert first.read_bytes() == second.read_bytes()


def test_train_offline_writes_every_model(tiny):
    cfg, res = tiny
    names = sorted(p.name for p in res.files)
    assert names == ["ae.json", "dpca_region_II.json", "dpca_region_III.json", "dpca_region_IV.json",
                     "dpca_region_V.json"]
    summary = json.loads((pipeline.Path(cfg.reports_dir) / "training_summary.json").read_text())
    assert set(summary["dpca"]) == {"II", "III", "IV", "V"}
    assert summary["ae"]["epochs"] == cfg.epochs
    hs = {v["glr"]["h"] for v in summary["dpca"].values()}
    assert len(hs) == 1  # one threshold across regions
    assert all(m.glr is not None for m in res.models.dpca.values()) and res.models.ae.glr is not None


def test_training_is_deterministic(tiny, tmp_path):
    cfg, res = tiny
    again = pipeline.train_offline(tiny_config(tmp_path))
    assert _digest(res.files) == _digest(again.files)


def test_reloaded_models_monitor_identically(tiny):
    cfg, res = tiny
    loaded = pipeline.load_models(cfg.models_dir)
    run = inject_fault(generate_healthy(cfg.sim(123, 12.0)), FaultSpec(FaultKind.FLAP_BIAS, 1, 100.0)).data
    a = monitor_run(res.models, run, bounds=cfg.boundaries())
    b = monitor_run(loaded, run, bounds=cfg.boundaries())
    for m in a:
        assert np.array_equal(a[m].trace.raw, b[m].trace.raw, equal_nan=True)
        assert np.array_equal(a[m].glr, b[m].glr, equal_nan=True)
    with pytest.raises(MissingModel):
        pipeline.load_models(cfg.reports_dir)


def test_monitor_online_outputs(tiny, tmp_path):
    cfg, res = tiny
    run = generate_healthy(cfg.sim(5, 9.0)).data
    path = tmp_path / "run.csv"
    write_csv(run, path)
    out = pipeline.monitor_online(cfg, res.models, path, tmp_path / "out")
    s = out["summary"]
    assert s["samples"] == run.n and s["warnings"] == []
    assert set(s["detectors"]) == {"dpca_static", "dpca_glr", "ae_static", "ae_glr"}
    trace = (tmp_path / "out" / "trace_ae_glr.csv").read_text().splitlines()
    assert trace[0] == "t,g,h,alarm_flag" and len(trace) == run.n + 1
    short = tmp_path / "short.csv"
    write_csv(run.slice(0, cfg.window - 1), short)
    out = pipeline.monitor_online(cfg, res.models, short, tmp_path / "short")
    assert out["summary"]["warnings"]
    assert all(d["alarm_count"] == 0 for d in out["summary"]["detectors"].values())


def test_zero_magnitude_fault_matches_healthy(tiny):
    cfg, res = tiny
    winds = [9.0] * cfg.trials
    healthy = pipeline.run_campaign(cfg, res.models, ["Healthy"], winds)
    zero = pipeline.run_campaign(cfg, res.models, ["FlapBias"], winds, {"FlapBias": 0.0})
    for h, z in zip(healthy, zero):
        assert (h.method, h.detector) == (z.method, z.detector)
        # without a fault the post-onset alarms are the only difference from a healthy run
        assert z.false_alarms <= h.false_alarms <= z.false_alarms + z.detections


def test_campaign_is_reproducible_and_checks_inputs(tiny):
    cfg, res = tiny
    a = pipeline.run_campaign(cfg, res.models)
    b = pipeline.run_campaign(cfg, res.models)
    assert a == b
    assert [(r.scenario, r.method, r.detector) for r in a][:2] == [("Healthy", "dpca", "static"),
                                                                  ("Healthy", "dpca", "glr")]
    with pytest.raises(InvalidConfig):
        pipeline.run_campaign(cfg, res.models, winds=[9.0])
    with pytest.raises(MissingModel):
        pipeline.run_campaign(cfg, ModelSet(dpca=res.models.dpca))


def test_calibration_needs_enough_blocks(tiny):
    cfg, res = tiny
    short = tiny_config("/tmp/unused", calibration_runs=2)
    runs = pipeline.healthy_runs(short, 3, 1)
    with pytest.raises(InsufficientData, match="region"):
        pipeline.calibrate_method(ModelSet(dpca=res.models.dpca), "dpca", runs, short)


@pytest.mark.parametrize("method,count", [("dpca", 4), ("ae", 1)])
def test_single_method_model_files(tmp_path, method, count):
    res = pipeline.train_offline(tiny_config(tmp_path, method=method))
    assert len(res.files) == count
    assert len(list((tmp_path / "models").glob("*.json"))) == count
