"""Command-line harness.

Subcommands: ``cluster`` (label a dataset), ``risk`` (replicated risk for a
mixture), ``sweep`` (grid experiments from a config), ``check`` (numerical
theory checks), ``repro`` (the named benchmark experiments). Exit codes:
0 success, 1 usage/parse error, 2 internal numerical failure.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace

import numpy as np

from . import fileio, svgplots
from .experiments import (
    Basins2dReport,
    ExperimentConfig,
    SweepRow,
    run_basins2d,
    run_custom,
    run_highdim_sweep,
    run_separation_sweep,
)
from .morse import default_seeds, find_critical_points
from .risk import replicate_risk
from .streams import substream
from .theory import standard_check_battery

USAGE_ERROR, NUMERICAL_ERROR = 1, 2


def _add_common(parser):
    parser.add_argument("--config", help="flat key = value config file")
    parser.add_argument("--seed", type=int, help="master seed (64-bit)")
    parser.add_argument("--out", default=".", help="output directory")
    parser.add_argument("--threads", type=int, default=1, help="worker processes")
    parser.add_argument("--emit-plots", action="store_true", help="also write SVG plots")


def build_parser():
    parser = argparse.ArgumentParser(prog="modeclust",
                                     description="density mode clustering harness")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("cluster", help="mean-shift cluster a dataset file")
    p.add_argument("--data", required=True, help="CSV dataset, one point per line")
    p.add_argument("--bandwidth", type=float, required=True)
    p.add_argument("--mixture", help="optional mixture spec: score against its flow oracle")
    _add_common(p)

    p = sub.add_parser("risk", help="replicated clustering risk for a mixture")
    p.add_argument("--mixture", required=True, help="mixture spec file")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--bandwidth", type=float, required=True)
    p.add_argument("--replications", type=int, default=20)
    _add_common(p)

    p = sub.add_parser("sweep", help="run the sweep described by a config file")
    _add_common(p)

    p = sub.add_parser("check", help="numerical theory checks")
    p.add_argument("--which", default="all",
                   choices=["all", "flow", "gaussian", "chisq", "delta"])
    _add_common(p)

    p = sub.add_parser("repro", help="reproduce a named benchmark experiment")
    p.add_argument("experiment", choices=["basins2d", "highdim", "separation"])
    _add_common(p)
    return parser


def _load_config(args, experiment=None):
    mapping = fileio.read_config(args.config) if args.config else {}
    cfg = ExperimentConfig.from_mapping(mapping)
    if experiment:
        cfg = replace(cfg, experiment=experiment)
    if args.seed is not None:
        cfg = replace(cfg, master_seed=args.seed)
    if args.threads:
        cfg = replace(cfg, threads=args.threads)
    return cfg


def _outdir(args):
    os.makedirs(args.out, exist_ok=True)
    return args.out


def _write_sweep_outputs(out, cfg, result, emit_plots):
    fileio.write_results_csv(os.path.join(out, "results.csv"),
                             cfg.experiment, cfg.dim, result.rows)
    fileio.write_timings_csv(os.path.join(out, "timings.csv"), result.rows)
    if not emit_plots:
        return
    if cfg.experiment == "separation_sweep":
        seps = sorted({r.separation for r in result.rows})
        losses = [next(r.mean_loss for r in result.rows if r.separation == s) for s in seps]
        svgplots.line_plot(os.path.join(out, "separation_loss.svg"), seps,
                           [("mean loss", losses)], xlabel="separation",
                           ylabel="mean pairwise loss",
                           title=f"n={cfg.n}, h={cfg.bandwidth}, {cfg.replications} reps")
    else:
        ns = sorted({r.n for r in result.rows})
        hs = sorted({r.h for r in result.rows})
        matrix = np.full((len(ns), len(hs)), np.nan)
        for r in result.rows:
            matrix[ns.index(r.n), hs.index(r.h)] = r.mean_loss
        svgplots.heatmap(os.path.join(out, "loss_heatmap.svg"), matrix,
                         [str(n) for n in ns], [f"{h:.3g}" for h in hs],
                         xlabel="bandwidth h", ylabel="sample size n",
                         title=f"mean pairwise loss, d={cfg.dim}")


def cmd_cluster(args):
    out = _outdir(args)
    data = fileio.read_dataset(args.data)
    mixture = fileio.read_mixture_spec(args.mixture) if args.mixture else None
    if mixture is not None and mixture.dim != data.shape[1]:
        raise ValueError(f"mixture dimension {mixture.dim} does not match "
                         f"dataset dimension {data.shape[1]}")
    cfg = _load_config(args)
    cfg = replace(cfg, bandwidth=args.bandwidth, dim=data.shape[1], mixture=mixture)
    report = run_custom(cfg, data=data)
    fileio.write_labels_csv(os.path.join(out, "labels.csv"), report.labels)
    fileio.write_modes_csv(os.path.join(out, "modes.csv"),
                           report.modes, report.mode_densities)
    print(f"clustered {data.shape[0]} points into {report.n_modes} modes "
          f"(bandwidth {args.bandwidth})")
    if report.risk is not None:
        row = SweepRow(n=data.shape[0], h=args.bandwidth, separation=0.0,
                       replications=1, mean_loss=report.risk.loss, stderr=None,
                       core_loss=report.risk.core_loss,
                       core_fraction=report.risk.core_fraction,
                       excluded=report.risk.excluded, flagged=False,
                       runtime_seconds=report.runtime_seconds)
        fileio.write_results_csv(os.path.join(out, "results.csv"), "custom",
                                 data.shape[1], [row])
        print(f"pairwise loss vs flow oracle: {report.risk.loss:.5f}")
    return 0


def cmd_risk(args):
    out = _outdir(args)
    mixture = fileio.read_mixture_spec(args.mixture)
    cfg = _load_config(args)
    cfg = replace(cfg, experiment="risk", dim=mixture.dim, mixture=mixture,
                  n=args.n, bandwidth=args.bandwidth, replications=args.replications)

    from .experiments import make_core_specs, risk_replication

    critical_points = find_critical_points(mixture, default_seeds(mixture))
    core_specs = make_core_specs(mixture, critical_points, cfg.core_offset_fraction)

    def pipeline(rng, tight):
        return risk_replication(mixture, cfg.n, cfg.bandwidth, rng, tight=tight,
                                critical_points=critical_points, core_specs=core_specs)

    result = replicate_risk(cfg.replications, cfg.master_seed, pipeline)
    core_losses = [r.core_loss for r in result.reports if r.core_loss is not None]
    row = SweepRow(n=cfg.n, h=cfg.bandwidth, separation=0.0,
                   replications=cfg.replications, mean_loss=result.mean_loss,
                   stderr=result.stderr,
                   core_loss=float(np.mean(core_losses)) if core_losses else None,
                   core_fraction=float(np.mean([r.core_fraction for r in result.reports])),
                   excluded=sum(r.excluded for r in result.reports),
                   flagged=bool(result.flagged), runtime_seconds=0.0)
    fileio.write_results_csv(os.path.join(out, "results.csv"), "risk", cfg.dim, [row])
    fileio.write_critical_point_report(os.path.join(out, "critical_points.txt"),
                                       critical_points)
    print(f"mean loss {result.mean_loss:.5f}"
          + (f" +- {result.stderr:.5f}" if result.stderr is not None else "")
          + f" over {cfg.replications} replications")
    return 0


def cmd_sweep(args):
    out = _outdir(args)
    cfg = _load_config(args)
    if cfg.experiment == "separation_sweep":
        result = run_separation_sweep(cfg)
    elif cfg.experiment == "highdim_sweep":
        result = run_highdim_sweep(cfg)
    else:
        print(f"config must set experiment to a sweep, got {cfg.experiment!r}",
              file=sys.stderr)
        return USAGE_ERROR
    _write_sweep_outputs(out, cfg, result, args.emit_plots)
    h, loss = result.best_bandwidth()
    print(f"{len(result.rows)} cells written; best cell h={h:.3g} mean_loss={loss:.5f}")
    return 0


def cmd_check(args):
    out = _outdir(args)
    cfg = _load_config(args)
    results = standard_check_battery(cfg.master_seed, which=args.which)
    fileio.write_checks_csv(os.path.join(out, "checks.csv"), results)
    failed = [name for name, res in results if not res.passed]
    for name, res in results:
        status = "precondition-failed" if res.precondition_failed else (
            "pass" if res.violations == 0 else f"{res.violations} violations")
        print(f"{name}: {status} (checked {res.checked}, "
              f"max lhs/rhs {res.max_slack_ratio:.3g})")
    return 0 if not failed else NUMERICAL_ERROR


def cmd_repro(args):
    out = _outdir(args)
    name = {"basins2d": "basins2d", "highdim": "highdim_sweep",
            "separation": "separation_sweep"}[args.experiment]
    cfg = _load_config(args, experiment=name)
    if name == "basins2d":
        report = run_basins2d(cfg)
        row = SweepRow(n=cfg.n, h=cfg.bandwidth, separation=0.0, replications=1,
                       mean_loss=report.loss, stderr=None, core_loss=report.core_loss,
                       core_fraction=report.core_fraction, excluded=report.excluded,
                       flagged=False, runtime_seconds=report.runtime_seconds)
        row.tv_distance = report.tv_distance
        fileio.write_results_csv(os.path.join(out, "results.csv"), name, cfg.dim, [row])
        fileio.write_timings_csv(os.path.join(out, "timings.csv"), [row])
        fileio.write_modes_csv(os.path.join(out, "modes.csv"),
                               report.modes, np.zeros(len(report.modes)))
        fileio.write_csv(os.path.join(out, "misclustered.csv"), ["point"],
                         [[int(i)] for i in report.misclustered])
        if args.emit_plots:
            svgplots.line_plot(os.path.join(out, "loss.svg"), [0, 1],
                               [("loss", [report.loss, report.loss])],
                               xlabel="", ylabel="loss", title="curved-basins run")
        print(f"loss {report.loss:.5f}, TV distance {report.tv_distance:.4f} "
              f"+- {report.tv_stderr:.4f}, {report.n_modes_estimated} estimated modes")
        if report.n_modes_estimated != report.n_modes_true:
            print(f"note: estimated {report.n_modes_estimated} modes, "
                  f"true density has {report.n_modes_true}")
    elif name == "highdim_sweep":
        cfg = replace(cfg, dim=10 if cfg.dim == 2 else cfg.dim)
        result = run_highdim_sweep(cfg)
        _write_sweep_outputs(out, cfg, result, args.emit_plots)
        h, loss = result.best_bandwidth()
        print(f"best cell: h={h:.3g} mean_loss={loss:.5f}")
    else:
        cfg = replace(cfg, n=300 if cfg.n == 1000 else cfg.n,
                      replications=35 if cfg.replications == 75 else cfg.replications,
                      bandwidth=0.3 if cfg.bandwidth == 1.0 else cfg.bandwidth)
        result = run_separation_sweep(cfg)
        _write_sweep_outputs(out, cfg, result, args.emit_plots)
        for r in result.rows:
            print(f"separation {r.separation:g}: mean loss {r.mean_loss:.5f}")
    return 0


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return USAGE_ERROR if exc.code not in (0, None) else 0
    handlers = {"cluster": cmd_cluster, "risk": cmd_risk, "sweep": cmd_sweep,
                "check": cmd_check, "repro": cmd_repro}
    try:
        return handlers[args.command](args)
    except (ValueError, FileNotFoundError, fileio.ParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except (ArithmeticError, np.linalg.LinAlgError, RuntimeError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return NUMERICAL_ERROR


if __name__ == "__main__":
    sys.exit(main())
