import os
from pathlib import Path

import pytest

from bladecm import pipeline

TINY = dict(duration=300.0, train_runs=2, val_runs=1, calibration_runs=16, window=10, epochs=2,
            filters=4, hidden=4, latent=3, block=5, mc_runs=200, trials=4, run_length=300.0,
            t_f=100.0, faults=("Healthy", "FlapBias"))

TINY_INI = """\
[paths]
models_dir = {root}/models
reports_dir = {root}/reports
[sim]
duration = 300
train_runs = 2
val_runs = 1
[pca]
window = 10
[ae]
epochs = 2
filters = 4
hidden = 4
latent = 3
[glr]
block = 5
mc_runs = 200
calibration_runs = 16
[campaign]
trials = 4
run_length = 300
t_f = 100
faults = Healthy,FlapBias
"""


def tiny_config(root, **kw) -> pipeline.PipelineConfig:
    return pipeline.PipelineConfig(models_dir=str(Path(root) / "models"),
                                   reports_dir=str(Path(root) / "reports"), **{**TINY, **kw})


@pytest.fixture(scope="session")
def tiny(tmp_path_factory):
    """A small, fully trained model set; seconds to build."""
    root = tmp_path_factory.mktemp("tiny")
    cfg = tiny_config(root)
    return cfg, pipeline.train_offline(cfg)


@pytest.fixture(scope="session")
def full_models(tmp_path_factory):
    """Models at the default settings, except a shorter autoencoder schedule.

    Training takes several minutes. Setting BLADECM_MODEL_CACHE to a directory
    reuses models written there by an earlier session.
    """
    cache = os.environ.get("BLADECM_MODEL_CACHE")
    root = Path(cache) if cache else tmp_path_factory.mktemp("full")
    cfg = pipeline.PipelineConfig(models_dir=str(root / "models"), reports_dir=str(root / "reports"),
                                  epochs=60)
    if cache and (root / "models" / "ae.json").exists():
        return cfg, pipeline.load_models(cfg.models_dir)
    return cfg, pipeline.train_offline(cfg).models


ACCEPTANCE_LINES = []


def record(criterion: int, ok: bool, detail: str):
    ACCEPTANCE_LINES.append((criterion, f"criterion {criterion:2d}: {'PASS' if ok else 'FAIL'}  {detail}"))


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
