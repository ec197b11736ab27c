import json

import pytest

from bladecm.cli import EXIT_DATA, EXIT_NUMERICAL, EXIT_OK, EXIT_USAGE, main

from conftest import TINY_INI


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    (root / "tiny.ini").write_text(TINY_INI.format(root=root))
    return root


def run(*argv):
    return main([str(a) for a in argv])


def test_generate_inject_train_monitor_campaign_report(workdir, capsys):
    cfg = workdir / "tiny.ini"
    assert run("generate", "--config", cfg, "--out", workdir / "run.csv", "--mean-wind", 12) == EXIT_OK
    assert run("inject", "--config", cfg, "--input", workdir / "run.csv", "--fault", "FlapBias",
               "--out", workdir / "fault.csv") == EXIT_OK
    assert run("train", "--config", cfg) == EXIT_OK
    assert (workdir / "models" / "ae.json").exists()
    capsys.readouterr()
    assert run("monitor", "--config", cfg, "--input", workdir / "fault.csv",
               "--out", workdir / "mon") == EXIT_OK
    summary = json.loads(capsys.readouterr().out)
    assert summary["samples"] == 3000
    assert summary["detectors"]["dpca_static"]["first_alarm_time"] is not None
    assert run("campaign", "--config", cfg, "--trials", 2) == EXIT_OK
    report = workdir / "reports" / "campaign.json"
    assert len(json.loads(report.read_text())["results"]) == 8
    assert run("report", "--input", report, "--out-dir", workdir / "again") == EXIT_OK
    assert (workdir / "again" / "campaign.json").read_bytes() == report.read_bytes()


def test_usage_errors(workdir):
    assert run() == EXIT_USAGE
    assert run("bogus") == EXIT_USAGE
    assert run("generate") == EXIT_USAGE
    assert run("inject", "--input", workdir / "run.csv", "--fault", "Nope", "--out", workdir / "x.csv") == EXIT_USAGE
    bad = workdir / "bad.ini"
    bad.write_text("[pca]\nwidow = 3\n")
    assert run("generate", "--config", bad, "--out", workdir / "x.csv") == EXIT_USAGE


def test_data_errors(workdir, tmp_path):
    assert run("report", "--input", tmp_path / "missing.json") == EXIT_DATA
    (tmp_path / "empty.json").write_text("{}")
    assert run("report", "--input", tmp_path / "empty.json") == EXIT_DATA
    broken = tmp_path / "broken.csv"
    broken.write_text("t,flap1\n0,abc\n")
    assert run("inject", "--input", broken, "--fault", "FlapBias", "--out", tmp_path / "o.csv") == EXIT_DATA
    assert run("monitor", "--input", workdir / "run.csv", "--models-dir", tmp_path / "none") == EXIT_DATA


def test_gradcheck_exit_codes(capsys):
    assert run("gradcheck", "--seeds", 1) == EXIT_OK
    assert "lstm" in capsys.readouterr().out
    assert run("gradcheck", "--seeds", 1, "--tolerance", 1e-15) == EXIT_NUMERICAL
