"""Seeded generators for the simulated designs: banded and random sparse
covariance models, the sparse 0/1-masked design, DAG-based graphical models
with moralized ground truth, and noisy discretization.

All generators are pure functions of their inputs and a numpy Generator;
the harness derives one Generator per replication from the base seed.
"""

import math
from dataclasses import dataclass

import numpy as np

from .covtest import CurvePanel
from .errors import InvalidArgument, NotADAG, NotPSD
from .presmooth import DiscretePanel
from .quadrature import FunctionGrid

SCORE_DIM = 10
# per-coordinate score variances 1, 1/4, ..., 1/100
SCORE_VARS = 1.0 / np.arange(1, SCORE_DIM + 1) ** 2


@dataclass(frozen=True)
class GroundTruth:
    """True alternative pairs; DAG models also carry the directed edges."""

    h1: frozenset             # pairs (j,k), 0-based, j < k
    directed_edges: tuple = ()


def fourier_basis(grid: FunctionGrid, dim: int = SCORE_DIM) -> np.ndarray:
    """Orthonormal Fourier system on [0,1]: 1, sqrt2 sin/cos pairs, as dim x L."""
    if dim != SCORE_DIM:
        raise InvalidArgument(f"basis dimension is fixed at {SCORE_DIM}")
    u = grid.points
    rows = [np.ones_like(u)]
    for m in range(1, 5):
        rows.append(math.sqrt(2.0) * np.sin(2.0 * math.pi * m * u))
        rows.append(math.sqrt(2.0) * np.cos(2.0 * math.pi * m * u))
    rows.append(math.sqrt(2.0) * np.sin(10.0 * math.pi * u))
    return np.vstack(rows)


def _pairs(p):
    return [(j, k) for j in range(p) for k in range(j + 1, p)]


def gen_cov_design(model: str, p: int, rng: np.random.Generator, s_a: int = None):
    """Block correlation matrix Pi and its ground truth for the covariance models.

    model: 'cov1' banded (1-|j-k|/3)_+; 'cov2' random sparse with +0.01 PSD
    shift; 'figure1' a 0/1 mask of s_a pairs times Unif[0.2,0.3] weights with
    +0.01 PSD shift.
    """
    if model == "cov1":
        idx = np.arange(p)
        pi = np.maximum(1.0 - np.abs(idx[:, None] - idx[None, :]) / 3.0, 0.0)
    elif model == "cov2":
        b = np.zeros((p, p))
        iu = np.triu_indices(p)
        mask = rng.random(iu[0].size) < 3.0 / p
        vals = rng.uniform(0.3, 0.8, size=iu[0].size)
        b[iu] = np.where(mask, vals, 0.0)
        b = b + np.triu(b, 1).T
        shift = max(-float(np.linalg.eigvalsh(b)[0]), 0.0) + 0.01
        pi = b + shift * np.eye(p)
    elif model == "figure1":
        q = p * (p - 1) // 2
        if s_a is None or not 0 <= s_a <= q:
            raise InvalidArgument(f"figure1 needs s_a in [0, {q}]")
        a = np.eye(p)
        pair_list = _pairs(p)
        chosen = rng.choice(q, size=s_a, replace=False)
        for c in chosen:
            j, k = pair_list[c]
            a[j, k] = a[k, j] = 1.0
        b = np.zeros((p, p))
        iu = np.triu_indices(p)
        b[iu] = rng.uniform(0.2, 0.3, size=iu[0].size)
        b = b + np.triu(b, 1).T
        ab = a * b
        shift = max(-float(np.linalg.eigvalsh(ab)[0]), 0.0) + 0.01
        pi = ab + shift * np.eye(p)
    else:
        raise InvalidArgument(f"unknown covariance model {model!r}")
    h1 = frozenset((j, k) for j, k in _pairs(p) if pi[j, k] != 0.0)
    return pi, GroundTruth(h1=h1)


def _psd_factor(pi):
    eig = np.linalg.eigvalsh(pi)
    if eig[0] < -1e-8:
        raise NotPSD(f"minimum eigenvalue {eig[0]} of Pi")
    try:
        return np.linalg.cholesky(pi)
    except np.linalg.LinAlgError:
        w, v = np.linalg.eigh(pi)
        return v * np.sqrt(np.maximum(w, 1e-12))[None, :]


def sample_cov_panel(pi, n: int, grid: FunctionGrid,
                     rng: np.random.Generator) -> CurvePanel:
    """Curves X_ij = theta_ij^T s(.) with score covariance Pi (x) Delta."""
    p = pi.shape[0]
    lfac = _psd_factor(pi)
    basis = fourier_basis(grid)
    z = rng.standard_normal((n, p, SCORE_DIM))
    # theta[i] = L_Pi @ z[i] @ Delta^{1/2}: Cov over variables is Pi, over
    # coordinates is Delta
    theta = np.einsum("jk,ikm->ijm", lfac, z) * np.sqrt(SCORE_VARS)[None, None, :]
    values = theta @ basis
    return CurvePanel(grid, values, centered=False)


def moralize(directed_edges, p: int = None) -> frozenset:
    """Undirected skeleton plus marriages between co-parents, as (j,k) pairs."""
    edges = [tuple(e) for e in directed_edges]
    nodes = sorted({v for e in edges for v in e})
    if p is not None:
        nodes = sorted(set(nodes) | set(range(p)))
    # cycle check via Kahn's algorithm
    children = {v: [] for v in nodes}
    indeg = {v: 0 for v in nodes}
    for a, b in edges:
        children[a].append(b)
        indeg[b] += 1
    queue = [v for v in nodes if indeg[v] == 0]
    seen = 0
    while queue:
        v = queue.pop()
        seen += 1
        for c in children[v]:
            indeg[c] -= 1
            if indeg[c] == 0:
                queue.append(c)
    if seen != len(nodes):
        raise NotADAG("directed edge list contains a cycle")
    und = {(min(a, b), max(a, b)) for a, b in edges}
    parents = {}
    for a, b in edges:
        parents.setdefault(b, []).append(a)
    for ps in parents.values():
        for x in range(len(ps)):
            for y in range(x + 1, len(ps)):
                a, b = ps[x], ps[y]
                und.add((min(a, b), max(a, b)))
    return frozenset(und)


def gen_dag_design(model: str, p: int, rng: np.random.Generator):
    """Directed edges, per-edge 10x10 coefficient matrices, moralized truth.

    'dag3': parents j-1, j-2 for every j >= 3 (banded chain).
    'dag4': roots 1..p/3; each later node picks 1 or 2 parents uniformly.
    """
    if p < 3:
        raise InvalidArgument("dag models need p >= 3")
    edges = []
    if model == "dag3":
        for j in range(2, p):
            edges.append((j - 1, j))
            edges.append((j - 2, j))
    elif model == "dag4":
        if p % 3 != 0:
            raise InvalidArgument("dag4 needs p divisible by 3")
        for j in range(p // 3, p):
            m = int(rng.integers(1, 3))  # one or two parents, equal probability
            m = min(m, j)
            parents = rng.choice(j, size=m, replace=False)
            for k in sorted(int(x) for x in parents):
                edges.append((k, j))
    else:
        raise InvalidArgument(f"unknown dag model {model!r}")
    n_parents = {}
    for k, j in edges:
        n_parents[j] = n_parents.get(j, 0) + 1
    lm = np.arange(1, SCORE_DIM + 1)
    sign = (-1.0) ** (lm[:, None] + lm[None, :])
    decay = 1.0 / (lm[:, None] + lm[None, :]) ** 2
    coeffs = {}
    for k, j in edges:
        c_b = rng.uniform(4.0, 6.0)
        coeffs[(k, j)] = sign * decay * (c_b / n_parents[j])
    return tuple(edges), coeffs, GroundTruth(
        h1=moralize(edges, p=p), directed_edges=tuple(edges)
    )


def sample_dag_panel(edges, coeffs, p: int, n: int, grid: FunctionGrid,
                     rng: np.random.Generator) -> CurvePanel:
    """Sequential generation in node order; integrals are exact in score space."""
    basis = fourier_basis(grid)
    innov = rng.standard_normal((n, p, SCORE_DIM)) * np.sqrt(SCORE_VARS)[None, None, :]
    scores = np.zeros((n, p, SCORE_DIM))
    parents = {}
    for k, j in edges:
        parents.setdefault(j, []).append(k)
    for j in range(p):
        acc = innov[:, j, :].copy()
        for k in parents.get(j, ()):
            acc += scores[:, k, :] @ coeffs[(k, j)].T
        scores[:, j, :] = acc
    return CurvePanel(grid, scores @ basis, centered=False)


def discretize(panel: CurvePanel, T: int, noise_sd: float,
               rng: np.random.Generator) -> DiscretePanel:
    """T uniform observation times per curve, linear interpolation plus noise."""
    if T < 1:
        raise InvalidArgument("T must be >= 1")
    obs = []
    u = panel.grid.points
    for i in range(panel.n):
        row = []
        for j in range(panel.p):
            times = rng.uniform(0.0, 1.0, size=T)
            vals = np.interp(times, u, panel.values[i, j])
            if noise_sd > 0:
                vals = vals + noise_sd * rng.standard_normal(T)
            row.append((times, vals))
        obs.append(row)
    return DiscretePanel(n=panel.n, p=panel.p, observations=obs)
