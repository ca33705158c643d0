"""File formats: curve panels, discrete observations, ground truth pairs,
per-replication decisions, and grid sidecars.

Panels are long CSVs `subject,variable,time_index,value` with 1-based
integer ids; the grid lives in a sidecar next to the panel file (for
`foo.csv` the sidecar is `foo.grid.csv`, one `point,weight` pair per line).
Floats are written with repr for byte-exact round trips.
"""

import csv
import os

import numpy as np

from .covtest import CurvePanel
from .errors import InvalidArgument
from .presmooth import DiscretePanel
from .quadrature import FunctionGrid, read_grid, write_grid


def grid_sidecar_path(panel_path) -> str:
    root, ext = os.path.splitext(str(panel_path))
    return f"{root}.grid{ext or '.csv'}"


def write_panel(panel: CurvePanel, path) -> None:
    write_grid(panel.grid, grid_sidecar_path(path))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["subject", "variable", "time_index", "value"])
        for i in range(panel.n):
            for j in range(panel.p):
                for t in range(panel.L):
                    w.writerow([i + 1, j + 1, t + 1, repr(float(panel.values[i, j, t]))])


def read_panel(path, grid: FunctionGrid = None) -> CurvePanel:
    if grid is None:
        grid = read_grid(grid_sidecar_path(path))
    entries = []
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        if [h.strip() for h in header] != ["subject", "variable", "time_index", "value"]:
            raise InvalidArgument(f"unexpected panel header {header}")
        for row in r:
            if not row:
                continue
            entries.append((int(row[0]), int(row[1]), int(row[2]), float(row[3])))
    n = max(e[0] for e in entries)
    p = max(e[1] for e in entries)
    L = max(e[2] for e in entries)
    if L != len(grid):
        raise InvalidArgument(f"panel has {L} time indices but grid has {len(grid)}")
    values = np.full((n, p, L), np.nan)
    for i, j, t, v in entries:
        values[i - 1, j - 1, t - 1] = v
    if np.any(np.isnan(values)):
        raise InvalidArgument("panel file has missing (subject, variable, time) cells")
    return CurvePanel(grid, values, centered=False)


def write_discrete(dp: DiscretePanel, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["subject", "variable", "time", "value"])
        for i in range(dp.n):
            for j in range(dp.p):
                times, values = dp.observations[i][j]
                for t, v in zip(times, values):
                    w.writerow([i + 1, j + 1, repr(float(t)), repr(float(v))])


def read_discrete(path) -> DiscretePanel:
    cells = {}
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        if [h.strip() for h in header] != ["subject", "variable", "time", "value"]:
            raise InvalidArgument(f"unexpected discrete header {header}")
        for row in r:
            if not row:
                continue
            i, j = int(row[0]), int(row[1])
            cells.setdefault((i, j), ([], []))
            cells[(i, j)][0].append(float(row[2]))
            cells[(i, j)][1].append(float(row[3]))
    n = max(i for i, _ in cells)
    p = max(j for _, j in cells)
    obs = []
    for i in range(1, n + 1):
        row = []
        for j in range(1, p + 1):
            if (i, j) not in cells:
                raise InvalidArgument(f"no observations for subject {i}, variable {j}")
            t, v = cells[(i, j)]
            row.append((np.array(t), np.array(v)))
        obs.append(row)
    return DiscretePanel(n=n, p=p, observations=obs)


def write_truth(pairs, path) -> None:
    """Pair-list CSV `j,k`, 1-based."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["j", "k"])
        for j, k in sorted(pairs):
            w.writerow([j + 1, k + 1])


def read_truth(path) -> frozenset:
    out = set()
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        next(r)
        for row in r:
            if row:
                out.add((int(row[0]) - 1, int(row[1]) - 1))
    return frozenset(out)


DECISION_HEADER = ["replication", "method", "j", "k", "statistic", "pvalue", "V",
                   "rejected"]


def write_decisions(rows, path) -> None:
    """rows: (replication, method, j, k, statistic, pvalue, V, rejected)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(DECISION_HEADER)
        for rep, method, j, k, stat, pv, v, rej in rows:
            w.writerow([
                rep, method, j + 1, k + 1,
                repr(float(stat)),
                "" if pv is None else repr(float(pv)),
                "" if v is None else repr(float(v)),
                int(rej),
            ])


def read_decisions(path):
    rows = []
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        if [h.strip() for h in header] != DECISION_HEADER:
            raise InvalidArgument(f"unexpected decisions header {header}")
        for row in r:
            if not row:
                continue
            rows.append((
                int(row[0]), row[1], int(row[2]) - 1, int(row[3]) - 1,
                float(row[4]),
                float(row[5]) if row[5] else None,
                float(row[6]) if row[6] else None,
                bool(int(row[7])),
            ))
    return rows


def write_replication_truths(truths, path) -> None:
    """Per-replication ground truth: CSV `replication,j,k`, 1-based pairs."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["replication", "j", "k"])
        for rep, pairs in truths:
            for j, k in sorted(pairs):
                w.writerow([rep, j + 1, k + 1])


def read_replication_truths(path) -> dict:
    out = {}
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        next(r)
        for row in r:
            if row:
                out.setdefault(int(row[0]), set()).add((int(row[1]) - 1, int(row[2]) - 1))
    return {rep: frozenset(s) for rep, s in out.items()}
