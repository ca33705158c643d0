"""Experiment orchestration: replication loops, empirical FDR/power,
method comparison rows, and persisted artifacts.

Replication r uses the derived seed base_seed + r, so results are identical
for any worker count; aggregation happens in replication order.
"""

import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from . import covtest, fgm, io, mtproc, nulldist, simgen, threshbase
from .errors import InvalidArgument, PowerUndefined
from .presmooth import SmootherConfig, smooth_panel
from .quadrature import make_uniform_grid

COV_MODELS = ("cov1", "cov2", "figure1")
DAG_MODELS = ("dag3", "dag4")
KNOWN_METHODS = ("MFC", "MFG", "BH", "BC", "hard", "soft")


@dataclass(frozen=True)
class ExperimentConfig:
    model: str = "cov1"
    n: int = 100
    p: int = 30
    s_a: int = 10                      # figure1 only
    observation: str = "full"          # 'full' | 'discrete'
    T: int = 51
    noise_sd: float = 1.0
    grid_length: int = 51
    methods: tuple = ("MFC",)
    alphas: tuple = (0.1,)
    replications: int = 1
    seed: int = 0
    workers: int = 1
    outdir: str = "results"
    pve: float = 0.95
    bandwidth_constant: float = 1.0
    tau_grid_size: int = 20
    tau_grid_span: float = 100.0

    def __post_init__(self):
        if self.replications < 1:
            raise InvalidArgument("replications must be >= 1")
        for a in self.alphas:
            if not 0.0 < a < 1.0:
                raise InvalidArgument(f"alpha {a} outside (0,1)")
        if self.model not in COV_MODELS + DAG_MODELS:
            raise InvalidArgument(f"unknown model {self.model!r}")
        if self.observation not in ("full", "discrete"):
            raise InvalidArgument(f"unknown observation mode {self.observation!r}")
        for m in self.methods:
            if m not in KNOWN_METHODS:
                raise InvalidArgument(f"unknown method {m!r}")
        if "MFG" in self.methods and self.model in COV_MODELS:
            raise InvalidArgument("MFG applies to the dag models")
        if "MFC" in self.methods and self.model in DAG_MODELS:
            raise InvalidArgument("MFC applies to the covariance models")


@dataclass(frozen=True)
class ResultRow:
    method: str
    model: str
    n: int
    p: int
    observation: str
    alpha: float
    fdr: float
    power: float
    t_exists_freq: float
    wall_time: float


def empirical_fdr(rejections, h1) -> float:
    """Mean false discovery proportion over replications.

    ``h1`` may be one pair set for all replications or a per-replication list.
    """
    h1s = _per_rep(h1, len(rejections))
    fdps = []
    for rej, truth in zip(rejections, h1s):
        false = sum(1 for pr in rej if pr not in truth)
        fdps.append(false / max(len(rej), 1))
    return float(np.mean(fdps)) if fdps else 0.0


def empirical_power(rejections, h1) -> float:
    """Mean fraction of true alternatives recovered per replication."""
    h1s = _per_rep(h1, len(rejections))
    powers = []
    for rej, truth in zip(rejections, h1s):
        if len(truth) == 0:
            raise PowerUndefined("power undefined with no true alternatives")
        powers.append(sum(1 for pr in rej if pr in truth) / len(truth))
    return float(np.mean(powers)) if powers else 0.0


def _per_rep(h1, b):
    if isinstance(h1, (set, frozenset)):
        return [h1] * b
    h1 = list(h1)
    if len(h1) != b:
        raise InvalidArgument("per-replication truth list length mismatch")
    return h1


def generate_replication(cfg: ExperimentConfig, rep: int):
    """(panel, ground_truth) for replication ``rep``; random designs are
    redrawn per replication from the derived seed."""
    rng = np.random.default_rng(cfg.seed + rep)
    grid = make_uniform_grid(cfg.grid_length)
    if cfg.model in COV_MODELS:
        pi, truth = simgen.gen_cov_design(
            cfg.model, cfg.p, rng, s_a=cfg.s_a if cfg.model == "figure1" else None
        )
        panel = simgen.sample_cov_panel(pi, cfg.n, grid, rng)
    else:
        edges, coeffs, truth = simgen.gen_dag_design(cfg.model, cfg.p, rng)
        panel = simgen.sample_dag_panel(edges, coeffs, cfg.p, cfg.n, grid, rng)
    if cfg.observation == "discrete":
        dp = simgen.discretize(panel, cfg.T, cfg.noise_sd, rng)
        panel = smooth_panel(dp, grid, SmootherConfig(cfg.bandwidth_constant))
    return panel, truth


def mfc_records(panel):
    """Cross-covariance records: statistics, cumulants, p-values, V scores."""
    records = covtest.all_pair_records(panel)
    return covtest.fill_pvalues(records, nulldist.pvalue_and_score)


def residual_pair_norms(res_pairs: dict, weights, n: int) -> dict:
    """HS norms of residual cross-covariance surfaces per pair."""
    w = np.asarray(weights)
    out = {}
    for pr, (a, b) in res_pairs.items():
        ac = a - a.mean(axis=0, keepdims=True)
        bc = b - b.mean(axis=0, keepdims=True)
        surf = ac.T @ bc / (n - 1)
        out[pr] = math.sqrt(max(
            float(np.sum(w[:, None] * w[None, :] * surf * surf)), 0.0))
    return out


def run_replication(cfg: ExperimentConfig, rep: int):
    """All requested methods on one simulated replication.

    Returns the truth pairs, per-(method, alpha) rejection sets, decision
    rows keyed by alpha, and the t-hat existence flags.
    """
    panel, truth = generate_replication(cfg, rep)
    rows_by_alpha = {a: [] for a in cfg.alphas}
    rejections = {}
    t_exists = {}
    tau_hat = None

    if cfg.model in COV_MODELS:
        records = mfc_records(panel)
        main_method = "MFC"
    else:
        basis = fgm.fpca(panel, pve=cfg.pve)
        tau_grid = fgm.default_tau_grid(basis, cfg.tau_grid_size, cfg.tau_grid_span)
        tau_hat, battery_sel, _ = fgm.select_tau(panel, basis, tau_grid)
        records = [
            covtest.PairTestRecord(j=pr[0], k=pr[1], T=t, cumulants=(),
                                   pvalue=pv, V=v)
            for pr, t, pv, v in zip(battery_sel.pairs, battery_sel.statistics,
                                    battery_sel.pvalues, battery_sel.scores)
        ]
        main_method = "MFG"
    battery = mtproc.battery_from_records(records)

    def emit(method, alpha, rejected):
        rejections[(method, alpha)] = frozenset(rejected)
        for r in records:
            pr = (r.j, r.k)
            rows_by_alpha[alpha].append(
                (rep, method, r.j, r.k, r.T, r.pvalue, r.V, pr in rejected))

    for alpha in cfg.alphas:
        if main_method in cfg.methods:
            ds = mtproc.select_threshold(battery, alpha)
            t_exists[alpha] = ds.exists
            emit(main_method, alpha, ds.rejected)
        if "BH" in cfg.methods:
            emit("BH", alpha, mtproc.bh_procedure(battery, alpha))
        if "BC" in cfg.methods:
            emit("BC", alpha, mtproc.bonferroni(battery, alpha))

    if "hard" in cfg.methods or "soft" in cfg.methods:
        if cfg.model in COV_MODELS:
            centered = covtest.center_panel(panel)
            norms = threshbase.pair_hs_norms(centered)

            def cv(mode):
                return threshbase.cv_threshold(panel, mode, seed=cfg.seed + rep)
        else:
            res_pairs = fgm.fgm_residual_pairs(basis, tau_hat)
            norms = residual_pair_norms(res_pairs, panel.grid.weights, panel.n)

            def cv(mode):
                return threshbase.cv_threshold_pairs(
                    res_pairs, panel.grid.weights, panel.n, mode,
                    seed=cfg.seed + rep)

        for mode in ("hard", "soft"):
            if mode not in cfg.methods:
                continue
            est = threshbase.apply_threshold(norms, cv(mode), mode)
            for alpha in cfg.alphas:
                rejections[(mode, alpha)] = est.adjacency
                for pr in sorted(norms):
                    rows_by_alpha[alpha].append(
                        (rep, mode, pr[0], pr[1], norms[pr], None, None,
                         pr in est.adjacency))

    return {
        "rep": rep,
        "h1": truth.h1,
        "rows_by_alpha": rows_by_alpha,
        "rejections": rejections,
        "t_exists": t_exists,
        "tau_hat": tau_hat,
    }


def _safe_replication(args):
    cfg, rep = args
    try:
        return run_replication(cfg, rep)
    except Exception as exc:  # keep the run alive, flag the cell
        return (rep, type(exc).__name__, str(exc))


def run_experiment(cfg: ExperimentConfig):
    """Replication loop, aggregation, and artifact persistence.

    Writes results.csv, one decisions CSV per alpha, truth.csv, and
    summary.json under cfg.outdir; returns the list of ResultRow.
    """
    os.makedirs(cfg.outdir, exist_ok=True)
    start = time.perf_counter()
    jobs = [(cfg, r) for r in range(cfg.replications)]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as ex:
            raw = list(ex.map(_safe_replication, jobs))
    else:
        raw = [_safe_replication(job) for job in jobs]
    results = [item for item in raw if isinstance(item, dict)]
    failures = [item for item in raw if not isinstance(item, dict)]

    wall = time.perf_counter() - start
    h1s = [r["h1"] for r in results]
    row_objs = []
    for method in cfg.methods:
        for alpha in cfg.alphas:
            key = (method, alpha)
            rejs = [r["rejections"][key] for r in results if key in r["rejections"]]
            if not rejs:
                continue
            fdr = empirical_fdr(rejs, h1s)
            power = empirical_power(rejs, h1s)
            if method in ("MFC", "MFG"):
                flags = [r["t_exists"][alpha] for r in results
                         if alpha in r["t_exists"]]
                freq = float(np.mean(flags)) if flags else float("nan")
            else:
                freq = float("nan")
            row_objs.append(ResultRow(
                method=method, model=cfg.model, n=cfg.n, p=cfg.p,
                observation=cfg.observation if cfg.observation == "full"
                else f"discrete(T={cfg.T},sd={cfg.noise_sd})",
                alpha=alpha, fdr=fdr, power=power,
                t_exists_freq=freq, wall_time=wall,
            ))

    _write_results_csv(row_objs, os.path.join(cfg.outdir, "results.csv"))
    for alpha in cfg.alphas:
        rows = [row for r in results for row in r["rows_by_alpha"][alpha]]
        name = "decisions.csv" if len(cfg.alphas) == 1 \
            else f"decisions_alpha={alpha}.csv"
        io.write_decisions(rows, os.path.join(cfg.outdir, name))
    io.write_replication_truths(
        [(r["rep"], r["h1"]) for r in results],
        os.path.join(cfg.outdir, "truth.csv"),
    )
    summary = {
        "config": asdict(cfg),
        "completed_replications": len(results),
        "failed_replications": failures,
        "wall_time_sec": wall,
        "results": [asdict(r) for r in row_objs],
    }
    with open(os.path.join(cfg.outdir, "summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2, default=str)
    return row_objs


def _write_results_csv(rows, path):
    import csv

    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["method", "model", "n", "p", "observation", "alpha",
                    "fdr", "power", "t_exists_freq", "wall_time"])
        for r in rows:
            w.writerow([r.method, r.model, r.n, r.p, r.observation, r.alpha,
                        repr(r.fdr), repr(r.power), repr(r.t_exists_freq),
                        f"{r.wall_time:.3f}"])


def summarize_decisions(decision_rows, truths: dict):
    """Recompute per-method FDR/power from a decisions table.

    ``truths`` maps replication -> pair set. Independent of run_experiment's
    aggregation path; backs the `report` CLI command.
    """
    per = {}
    for rep, method, j, k, _stat, _pv, _v, rejected in decision_rows:
        per.setdefault(method, {}).setdefault(rep, set())
        if rejected:
            per[method][rep].add((j, k))
    out = []
    for method in sorted(per):
        reps = sorted(per[method])
        rejs = [frozenset(per[method][r]) for r in reps]
        h1s = [truths[r] for r in reps]
        out.append((method, empirical_fdr(rejs, h1s), empirical_power(rejs, h1s),
                    len(reps)))
    return out
