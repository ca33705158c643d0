"""Command line entry point.

Subcommands: simulate, mfc, mfg, smooth, experiment, report. Options can
come from a flat key=value config file (--config) with every key
overridable by --set key=value or a dedicated flag. Errors exit nonzero
with a single `ErrorClass: message` line on stderr.
"""

import argparse
import csv
import os
import sys

import numpy as np

from . import fgm, harness, io, mtproc
from .errors import FuncnetError, InvalidArgument
from .presmooth import SmootherConfig, smooth_panel
from .quadrature import make_uniform_grid, read_grid


def read_config_file(path) -> dict:
    """Flat key=value lines; blank lines and '#' comments are skipped."""
    out = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise InvalidArgument(f"{path}:{lineno}: expected key=value")
            key, _, value = line.partition("=")
            out[key.strip()] = value.strip()
    return out


_INT_KEYS = {"n", "p", "s_a", "T", "grid_length", "replications", "seed",
             "workers", "tau_grid_size"}
_FLOAT_KEYS = {"noise_sd", "pve", "bandwidth_constant", "tau_grid_span"}


def build_experiment_config(raw: dict) -> harness.ExperimentConfig:
    kwargs = {}
    for key, value in raw.items():
        if key in _INT_KEYS:
            kwargs[key] = int(value)
        elif key in _FLOAT_KEYS:
            kwargs[key] = float(value)
        elif key == "alphas":
            kwargs[key] = tuple(float(x) for x in str(value).split(",") if x)
        elif key == "methods":
            kwargs[key] = tuple(x.strip() for x in str(value).split(",") if x.strip())
        elif key in ("model", "observation", "outdir"):
            kwargs[key] = str(value)
        else:
            raise InvalidArgument(f"unknown config key {key!r}")
    return harness.ExperimentConfig(**kwargs)


def _merged_config(args, extra_keys=()) -> dict:
    raw = read_config_file(args.config) if getattr(args, "config", None) else {}
    for item in getattr(args, "set", None) or []:
        if "=" not in item:
            raise InvalidArgument(f"--set expects key=value, got {item!r}")
        key, _, value = item.partition("=")
        raw[key.strip()] = value.strip()
    for key in ("seed", "workers", "out") + tuple(extra_keys):
        value = getattr(args, key, None)
        if value is not None:
            raw["outdir" if key == "out" else key] = value
    if getattr(args, "alpha", None) is not None:
        raw["alphas"] = ",".join(str(a) for a in args.alpha)
    return raw


def _battery_decisions(battery, alphas, method, out_dir):
    """Single-panel analysis: threshold per alpha, write one decisions CSV each."""
    os.makedirs(out_dir, exist_ok=True)
    stats = battery.statistics if battery.statistics is not None \
        else [float("nan")] * battery.Q
    for alpha in alphas:
        ds = mtproc.select_threshold(battery, alpha)
        rows = [
            (0, method, pr[0], pr[1], t, pv, v, pr in ds.rejected)
            for pr, t, pv, v in zip(battery.pairs, stats,
                                    battery.pvalues, battery.scores)
        ]
        name = "decisions.csv" if len(alphas) == 1 \
            else f"decisions_alpha={alpha}.csv"
        io.write_decisions(rows, os.path.join(out_dir, name))
        print(f"alpha={alpha} t_hat={ds.t_hat:.6f} exists={ds.exists} "
              f"rejections={len(ds.rejected)}")


def cmd_simulate(args):
    raw = _merged_config(args, extra_keys=("model", "n", "p"))
    raw.setdefault("replications", "1")
    raw.setdefault("methods", "")
    cfg = build_experiment_config(raw)
    rng = np.random.default_rng(cfg.seed)
    grid = make_uniform_grid(cfg.grid_length)
    from . import simgen
    if cfg.model in harness.COV_MODELS:
        pi, truth = simgen.gen_cov_design(
            cfg.model, cfg.p, rng, s_a=cfg.s_a if cfg.model == "figure1" else None)
        panel = simgen.sample_cov_panel(pi, cfg.n, grid, rng)
    else:
        edges, coeffs, truth = simgen.gen_dag_design(cfg.model, cfg.p, rng)
        panel = simgen.sample_dag_panel(edges, coeffs, cfg.p, cfg.n, grid, rng)
    os.makedirs(cfg.outdir, exist_ok=True)
    io.write_panel(panel, os.path.join(cfg.outdir, "panel.csv"))
    io.write_truth(truth.h1, os.path.join(cfg.outdir, "truth.csv"))
    if cfg.observation == "discrete":
        dp = simgen.discretize(panel, cfg.T, cfg.noise_sd, rng)
        io.write_discrete(dp, os.path.join(cfg.outdir, "discrete.csv"))
    print(f"wrote panel ({cfg.n} x {cfg.p} x {cfg.grid_length}) and truth "
          f"({len(truth.h1)} pairs) to {cfg.outdir}")
    return 0


def cmd_mfc(args):
    panel = io.read_panel(args.panel)
    from . import covtest, nulldist
    records = covtest.fill_pvalues(covtest.all_pair_records(panel),
                                   nulldist.pvalue_and_score)
    battery = mtproc.battery_from_records(records)
    _battery_decisions(battery, args.alpha or [0.1], "MFC", args.out or ".")
    return 0


def cmd_mfg(args):
    panel = io.read_panel(args.panel)
    basis = fgm.fpca(panel, pve=args.pve)
    tau_grid = fgm.default_tau_grid(basis, args.tau_grid_size, args.tau_grid_span)
    tau_hat, battery, _ = fgm.select_tau(panel, basis, tau_grid)
    print(f"tau_hat={tau_hat:.6g}")
    _battery_decisions(battery, args.alpha or [0.1], "MFG", args.out or ".")
    return 0


def cmd_smooth(args):
    dp = io.read_discrete(args.discrete)
    if args.grid:
        grid = read_grid(args.grid)
    else:
        grid = make_uniform_grid(args.grid_length)
    panel = smooth_panel(dp, grid, SmootherConfig(args.bandwidth_constant))
    io.write_panel(panel, args.out or "panel.csv")
    print(f"wrote reconstructed panel ({panel.n} x {panel.p} x {panel.L}) "
          f"to {args.out or 'panel.csv'}")
    return 0


def cmd_experiment(args):
    cfg = build_experiment_config(_merged_config(args))
    rows = harness.run_experiment(cfg)
    for r in rows:
        print(f"{r.method} alpha={r.alpha}: fdr={r.fdr:.4f} power={r.power:.4f}")
    print(f"artifacts in {cfg.outdir}")
    return 0


def cmd_report(args):
    decisions = io.read_decisions(args.decisions)
    truths = io.read_replication_truths(args.truth)
    table = harness.summarize_decisions(decisions, truths)
    out = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        w = csv.writer(out)
        w.writerow(["method", "fdr_pct", "power_pct", "replications"])
        for method, fdr, power, b in table:
            w.writerow([method, f"{100 * fdr:.2f}", f"{100 * power:.2f}", b])
    finally:
        if args.out:
            out.close()
    return 0


def _add_common(sp):
    sp.add_argument("--config", help="flat key=value config file")
    sp.add_argument("--set", action="append", metavar="KEY=VALUE",
                    help="override any config key")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--alpha", type=float, action="append",
                    help="level; repeat for several")
    sp.add_argument("--workers", type=int)
    sp.add_argument("--out", help="output directory")


def build_parser():
    ap = argparse.ArgumentParser(prog="funcnet")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("simulate", help="emit a simulated panel plus truth")
    _add_common(sp)
    sp.add_argument("--model")
    sp.add_argument("--n", type=int)
    sp.add_argument("--p", type=int)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("mfc", help="covariance-network testing on a panel file")
    sp.add_argument("panel")
    sp.add_argument("--alpha", type=float, action="append")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_mfc)

    sp = sub.add_parser("mfg", help="graphical-model testing on a panel file")
    sp.add_argument("panel")
    sp.add_argument("--alpha", type=float, action="append")
    sp.add_argument("--pve", type=float, default=0.95)
    sp.add_argument("--tau-grid-size", type=int, default=20)
    sp.add_argument("--tau-grid-span", type=float, default=100.0)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_mfg)

    sp = sub.add_parser("smooth", help="reconstruct curves from discrete data")
    sp.add_argument("discrete")
    sp.add_argument("--grid", help="grid sidecar to evaluate on")
    sp.add_argument("--grid-length", type=int, default=51)
    sp.add_argument("--bandwidth-constant", type=float, default=1.0)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_smooth)

    sp = sub.add_parser("experiment", help="replication study from a config file")
    _add_common(sp)
    sp.set_defaults(func=cmd_experiment)

    sp = sub.add_parser("report", help="summarize a decisions CSV")
    sp.add_argument("decisions")
    sp.add_argument("truth", help="replication truth CSV")
    sp.add_argument("--out", help="output CSV path (default stdout)")
    sp.set_defaults(func=cmd_report)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except FuncnetError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
