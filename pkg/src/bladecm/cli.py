"""Command line: generate, inject, train, monitor, campaign, gradcheck, report.

Settings come from defaults, then ``--config`` (key = value sections), then
flags. Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import pipeline
from .data import read_csv, write_csv
from .errors import BladeCMError, UsageError
from .sim import FaultSpec, LabeledRun, generate_healthy, inject_fault

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERICAL = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _common(p):
    p.add_argument("--config", help="key = value config file")
    p.add_argument("--seed", type=int)
    p.add_argument("--models-dir")
    p.add_argument("--reports-dir")
    p.add_argument("--method", choices=("dpca", "ae", "both"))
    p.add_argument("--detector", choices=("static", "glr", "both"))


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="bladecm", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", help="simulate one healthy run to CSV")
    _common(g)
    g.add_argument("--mean-wind", type=float, default=9.0)
    g.add_argument("--duration", type=float)
    g.add_argument("--out", required=True)

    i = sub.add_parser("inject", help="inject a fault into a run CSV")
    i.add_argument("--config")
    i.add_argument("--input", required=True)
    i.add_argument("--fault", required=True, help="FlapBias, EdgeBias, FlapStuck, ...")
    i.add_argument("--blade", type=int)
    i.add_argument("--t-f", type=float)
    i.add_argument("--magnitude", type=float)
    i.add_argument("--out", required=True)

    t = sub.add_parser("train", help="fit and calibrate models")
    _common(t)
    t.add_argument("--data", help="healthy CSV file or directory (default: simulate)")
    t.add_argument("--epochs", type=int)
    t.add_argument("--train-runs", type=int)
    t.add_argument("--calibration-runs", type=int)

    m = sub.add_parser("monitor", help="monitor a recorded run")
    _common(m)
    m.add_argument("--input", required=True)
    m.add_argument("--out")

    c = sub.add_parser("campaign", help="fault-injection Monte Carlo campaign")
    _common(c)
    c.add_argument("--trials", type=int)
    c.add_argument("--faults", help="comma-separated scenarios, e.g. Healthy,FlapBias")
    c.add_argument("--blade", type=int)
    c.add_argument("--stem", default="campaign")

    gc = sub.add_parser("gradcheck", help="finite-difference check of the backward passes")
    gc.add_argument("--seeds", type=int, default=10)
    gc.add_argument("--tolerance", type=float, default=1e-4)

    r = sub.add_parser("report", help="print a campaign report, optionally re-emitting it")
    r.add_argument("--input", required=True, help="campaign JSON")
    r.add_argument("--out-dir")
    return ap


def _config(args, **extra):
    keys = ("seed", "models_dir", "reports_dir", "method", "detector")
    overrides = {k: getattr(args, k, None) for k in keys}
    overrides.update(extra)
    return pipeline.load_config(getattr(args, "config", None), **overrides)


def cmd_generate(args):
    cfg = _config(args, duration=args.duration)
    run = generate_healthy(cfg.sim(cfg.seed, args.mean_wind), cfg.boundaries())
    write_csv(run.data, args.out)
    print(f"wrote {run.data.n} samples to {args.out}")


def cmd_inject(args):
    cfg = pipeline.load_config(args.config, blade=args.blade, t_f=args.t_f)
    try:
        fault = FaultSpec(args.fault, cfg.blade, cfg.t_f, args.magnitude)
    except ValueError as exc:
        raise UsageError(f"unknown fault kind {args.fault!r}") from exc
    run = LabeledRun(read_csv(args.input))
    out = inject_fault(run, fault)
    write_csv(out.data, args.out)
    print(f"injected {fault.kind.value} on {fault.channel} at {fault.t_f:g} s into {args.out}")


def cmd_train(args):
    cfg = _config(args, data_path=args.data, epochs=args.epochs, train_runs=args.train_runs,
                  calibration_runs=args.calibration_runs)
    res = pipeline.train_offline(cfg, log=lambda e, a, b: print(f"epoch {e}: train {a:.6g} val {b:.6g}"))
    for f in res.files:
        print(f"wrote {f}")


def cmd_monitor(args):
    cfg = _config(args)
    models = pipeline.load_models(cfg.models_dir, cfg.methods)
    out = pipeline.monitor_online(cfg, models, args.input, args.out)
    print(json.dumps(out["summary"], indent=1))


def cmd_campaign(args):
    cfg = _config(args, trials=args.trials, faults=args.faults, blade=args.blade)
    models = pipeline.load_models(cfg.models_dir, cfg.methods)
    results = pipeline.run_campaign(cfg, models)
    paths = pipeline.emit_report(results, cfg.reports_dir, args.stem)
    _print_results(pipeline.read_report(paths[1]))
    for p in paths:
        print(f"wrote {p}")


def cmd_gradcheck(args):
    from .autoencoder.gradcheck import gradcheck
    from .errors import NumericalError

    results = gradcheck(range(args.seeds))
    worst = {}
    for r in results:
        worst[r.name] = max(worst.get(r.name, 0.0), r.max_rel_error)
    for name, err in worst.items():
        print(f"{name:8s} max relative error {err:.3e}")
    if max(worst.values()) >= args.tolerance:
        raise NumericalError(f"gradient check failed: {max(worst.values()):.3e} >= {args.tolerance:g}")


def _print_results(rows):
    print(f"{'scenario':14s} {'method':6s} {'detector':8s} {'P_F':>9s} {'P_D':>9s} {'strong':>9s} {'weak':>9s}")
    for r in rows:
        print(f"{r['scenario']:14s} {r['method']:6s} {r['detector']:8s} {r['false_alarm_rate']:9.6f} "
              f"{r['detection_rate']:9.6f} {r['strong_rate']:9.6f} {r['weak_rate']:9.6f}")


def cmd_report(args):
    rows = pipeline.read_report(args.input)
    _print_results(rows)
    if args.out_dir:
        results = [pipeline.CampaignResult(r["scenario"], r["method"], r["detector"], r["trials"],
                                           r["false_alarms"], r["detections"], r["strong_detections"],
                                           r["weak_detections"], r["mean_delay_s"], r["exceedance_fraction"])
                   for r in rows]
        for p in pipeline.emit_report(results, args.out_dir, Path(args.input).stem):
            print(f"wrote {p}")


COMMANDS = {"generate": cmd_generate, "inject": cmd_inject, "train": cmd_train, "monitor": cmd_monitor,
            "campaign": cmd_campaign, "gradcheck": cmd_gradcheck, "report": cmd_report}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        COMMANDS[args.command](args)
    except BladeCMError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (FileNotFoundError, IsADirectoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
