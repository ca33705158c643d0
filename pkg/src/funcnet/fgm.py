"""Functional graphical model pipeline.

FPCA per variable, nodewise standardized group lasso in score space for
every ordered pair (target j, excluded k), functional residuals, and
residual cross-covariance testing with the same HS statistic / cumulant
machinery as the covariance pipeline. A single global regularization
parameter is selected by matching empirical exceedance counts of the
transformed scores to their null expectations at ten cut levels.

After per-group orthonormalization U_l = V_l Q_l^{-1} with
Q_l = (V_l^T V_l / n)^{1/2}, each block update is the closed-form
shrinkage B_l <- (1 - tau' / ||G_l||_F)_+ G_l against the partial-residual
least squares target G_l; the solver works entirely on precomputed
cross-products, so a fit costs O(sweeps * p * d^2) independent of n.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import covtest
from .covtest import CurvePanel, center_panel
from .errors import (
    DegenerateVariable,
    InvalidArgument,
    InvalidPair,
    PipelineOrderError,
    TooFewSubjects,
)
from .mtproc import TestBattery
from .nulldist import pvalue_and_score, std_normal_quantile, std_normal_sf

BCD_TOL = 1e-8
BCD_MAX_SWEEPS = 500
QMAT_EIG_FLOOR = 1e-10


@dataclass(frozen=True)
class FpcaBasis:
    """Per-variable truncated eigensystem of the marginal covariances."""

    grid: object
    curves: np.ndarray        # centered n x p x L values the scores refer to
    d: tuple                  # truncation per variable
    eigenvalues: tuple        # arrays of length d_j
    eigenfunctions: tuple     # d_j x L arrays, orthonormal under the grid
    scores: tuple             # n x d_j arrays

    @property
    def n(self):
        return self.curves.shape[0]

    @property
    def p(self):
        return self.curves.shape[1]


@dataclass(frozen=True)
class GroupLassoFit:
    target: int
    excluded: int
    blocks: dict              # l -> d_l x d_j coefficient matrix Psi
    active: frozenset
    tau: float
    objective: float
    sweeps: int
    flagged: bool = False


@dataclass(frozen=True)
class ResidualPair:
    j: int
    k: int
    res_jk: np.ndarray        # n x L residuals of j regressed on rest minus k
    res_kj: np.ndarray


def fpca(panel: CurvePanel, pve: float = 0.95) -> FpcaBasis:
    """Eigendecompose each variable's marginal covariance; keep the smallest
    number of components whose eigenvalue share reaches ``pve``."""
    if panel.n < 3:
        raise TooFewSubjects("fpca requires n >= 3")
    if not 0.0 < pve <= 1.0:
        raise InvalidArgument("pve must be in (0, 1]")
    panel = center_panel(panel)
    n, p, L = panel.values.shape
    sw = panel.grid._sqrt_weights
    ds, evals, efuns, scores = [], [], [], []
    for j in range(p):
        X = panel.values[:, j, :]
        K = X.T @ X / (n - 1)
        B = sw[:, None] * K * sw[None, :]
        w, v = np.linalg.eigh(B)
        w = np.maximum(w[::-1], 0.0)
        v = v[:, ::-1]
        total = w.sum()
        if total <= 0.0:
            raise DegenerateVariable(f"variable {j} has zero variance")
        d = int(np.searchsorted(np.cumsum(w) / total, pve) + 1)
        d = min(d, L)
        phi = (v[:, :d] / sw[:, None]).T            # d x L, grid-orthonormal
        xi = (X * panel.grid.weights[None, :]) @ phi.T
        ds.append(d)
        evals.append(w[:d])
        efuns.append(phi)
        scores.append(xi)
    return FpcaBasis(
        grid=panel.grid,
        curves=panel.values,
        d=tuple(ds),
        eigenvalues=tuple(evals),
        eigenfunctions=tuple(efuns),
        scores=tuple(scores),
    )


class _Workspace:
    """Cross-products shared by every nodewise fit on one basis."""

    def __init__(self, basis: FpcaBasis):
        n = basis.n
        p = basis.p
        self.basis = basis
        self.n = n
        self.p = p
        self.slices = []
        start = 0
        for d in basis.d:
            self.slices.append(slice(start, start + d))
            start += d
        self.D = start
        U = np.empty((n, self.D))
        self.qmats, self.qinvs, self.flagged_vars = [], [], set()
        for j in range(p):
            V = basis.scores[j]
            S = V.T @ V / n
            w, vecs = np.linalg.eigh(S)
            if w[0] < QMAT_EIG_FLOOR:
                self.flagged_vars.add(j)
            w = np.maximum(w, QMAT_EIG_FLOOR)
            sqw = np.sqrt(w)
            Q = (vecs * sqw[None, :]) @ vecs.T
            Qinv = (vecs / sqw[None, :]) @ vecs.T
            self.qmats.append(Q)
            self.qinvs.append(Qinv)
            U[:, self.slices[j]] = V @ Qinv
        self.U = U
        self.CU = U.T @ U
        self.block_index = [np.arange(s.start, s.stop) for s in self.slices]
        self.block_starts = np.array([s.start for s in self.slices])
        # c_j = U^T V_j, the standardized-design response cross-products
        self.CV = [self.CU[:, self.slices[j]] @ self.qmats[j] for j in range(p)]
        self.yss = [float(np.sum(basis.scores[j] ** 2)) for j in range(p)]

    def target_tau_max(self) -> np.ndarray:
        """Per-target zero-solution thresholds (KKT at zero, max over blocks)."""
        sqn = math.sqrt(self.n)
        out = np.zeros(self.p)
        for j in range(self.p):
            c = self.CV[j]
            out[j] = max(
                float(np.linalg.norm(c[self.slices[l]])) / sqn
                for l in range(self.p) if l != j
            )
        return out

    def tau_max(self) -> float:
        """Smallest tau at which every nodewise fit has the all-zero solution."""
        return float(self.target_tau_max().max())

    def _mm_steps(self, B: np.ndarray, c: np.ndarray, pen: float,
                  block_ids, iters: int = 30) -> np.ndarray:
        """Majorize-minimize fallback: each step bounds every active block's
        norm penalty by its quadratic tangent and solves the resulting ridge
        system exactly. Monotone in the true objective; linear convergence
        only, so it is used when the Newton solve below fails. B in place."""
        for _ in range(iters):
            active, norms = [], []
            for l in block_ids:
                nb = float(np.linalg.norm(B[self.slices[l]]))
                if nb > 0.0:
                    active.append(l)
                    norms.append(nb)
            if not active:
                return B
            if pen > 0.0:
                # collapsing blocks converge geometrically; zero them now and
                # let the next shrinkage sweep re-screen their KKT condition
                cut = 1e-9 * max(norms)
                for l, nb in zip(active, norms):
                    if nb <= cut:
                        B[self.slices[l]] = 0.0
                pairs = [(l, nb) for l, nb in zip(active, norms) if nb > cut]
                if not pairs:
                    return B
                active = [l for l, _ in pairs]
                norms = [nb for _, nb in pairs]
            idx = np.concatenate([self.block_index[l] for l in active])
            A = self.CU[np.ix_(idx, idx)].copy()
            if pen > 0.0:
                pos = 0
                for l, nb in zip(active, norms):
                    dl = self.block_index[l].size
                    rr = np.arange(pos, pos + dl)
                    A[rr, rr] += pen / nb
                    pos += dl
                try:
                    X = np.linalg.solve(A, c[idx])
                except np.linalg.LinAlgError:
                    X = np.linalg.lstsq(A, c[idx], rcond=None)[0]
            else:
                # unpenalized: minimum-norm solution of the (possibly
                # singular) normal equations
                X = np.linalg.lstsq(A, c[idx], rcond=None)[0]
            move = float(np.linalg.norm(X - B[idx]))
            B[idx] = X
            if move <= 1e-10 * max(float(np.linalg.norm(X)), 1.0):
                break
        return B

    def _smooth_min_active(self, c: np.ndarray, pen: float, active,
                           B: np.ndarray):
        """Levenberg-Marquardt Newton minimization on the given active blocks.

        On the active set the objective is smooth (all block norms positive)
        and the exact Hessian is cheap at these sizes. Adaptive ridge damping
        handles the near-singular directions that stall line searches.
        Returns the restricted minimizer stacked over the active blocks
        (K x d_j).
        """
        idx = np.concatenate([self.block_index[l] for l in active])
        Aq = self.CU[np.ix_(idx, idx)]
        rhs = c[idx]
        sizes = [self.block_index[l].size for l in active]
        bounds = np.cumsum([0] + sizes)
        starts = bounds[:-1]
        K, dj = idx.size, rhs.shape[1]
        nfloor = 1e-300

        def block_norms(Bm):
            sq = np.einsum("ij,ij->i", Bm, Bm)
            return np.sqrt(np.add.reduceat(sq, starts))

        def value(Bm):
            quad = 0.5 * float(np.sum(Bm * (Aq @ Bm))) - float(np.sum(rhs * Bm))
            return quad + pen * float(block_norms(Bm).sum())

        Bm = B[idx].copy()
        Hq = np.kron(Aq, np.eye(dj))       # row-major vec: x[i*dj + col]
        fv = value(Bm)
        scale = max(float(np.trace(Aq)) / K, 1.0)
        lam = 1e-10 * scale
        block_eyes = [np.eye((b - a) * dj) for a, b in zip(bounds[:-1], bounds[1:])]
        for _ in range(50):
            g = Aq @ Bm - rhs
            H = Hq.copy()
            norms = np.maximum(block_norms(Bm), nfloor)
            for (a, b), nb, Ib in zip(
                    zip(bounds[:-1], bounds[1:]), norms, block_eyes):
                g[a:b] += (pen / nb) * Bm[a:b]
                v = Bm[a:b].ravel() / nb
                # block rows are contiguous in the flattened ordering
                H[a * dj:b * dj, a * dj:b * dj] += (pen / nb) * (
                    Ib - np.outer(v, v))
            gv = g.ravel()
            accepted = False
            diag = np.diag_indices_from(H)
            for _ in range(16):
                Hd = H.copy()
                Hd[diag] += lam * scale
                try:
                    dx = np.linalg.solve(Hd, -gv)
                except np.linalg.LinAlgError:
                    lam = max(lam * 10.0, 1e-10)
                    continue
                cand = Bm + dx.reshape(K, dj)
                fc = value(cand)
                if fc < fv:
                    gain = fv - fc
                    Bm, fv = cand, fc
                    lam = max(lam * 0.25, 1e-14)
                    # gains below the outer-loop resolution are not worth
                    # further iterations here
                    accepted = gain > 1e-10 * max(abs(fv), 1.0)
                    break
                lam = max(lam * 10.0, 1e-10)
            if not accepted:
                break
        return Bm

    def fit(self, j: int, k, tau: float, warm: np.ndarray = None,
            max_rounds: int = BCD_MAX_SWEEPS):
        """Nodewise group-lasso fit for target j with variable k excluded.

        Active-set algorithm: every round screens all blocks by their KKT
        margin, adds the violators, solves the restricted smooth problem by
        damped Newton, and drops blocks whose norm collapses. Returns (B,
        objective, rounds) in standardized coordinates; B is D x d_j with the
        j and k blocks identically zero. ``k=None`` fits on all remaining
        variables.
        """
        n = self.n
        dj = self.basis.d[j]
        c = self.CV[j]
        blocks = [l for l in range(self.p) if l != j and l != k]
        if warm is None:
            B = np.zeros((self.D, dj))
        else:
            B = warm.copy()
            B[self.slices[j]] = 0.0
            if k is not None:
                B[self.slices[k]] = 0.0
        S = self.CU @ B
        thr = tau / math.sqrt(n)
        pen = tau * math.sqrt(n)

        starts = self.block_starts

        def block_norms_all(Bv):
            sq = np.einsum("ij,ij->i", Bv, Bv)
            return np.sqrt(np.add.reduceat(sq, starts))

        def objective(Bv, Sv):
            rss = self.yss[j] - 2.0 * float(np.sum(Bv * c)) + float(np.sum(Bv * Sv))
            # the j and k blocks are identically zero, so summing every block
            # norm equals summing over the regressor blocks
            return 0.5 * rss + pen * float(block_norms_all(Bv).sum())

        if pen == 0.0:
            # unpenalized: one exact minimum-norm least squares solve
            for l in blocks:
                sl = self.slices[l]
                if not np.any(B[sl]):
                    B[sl] = 1.0  # mark every block active for the solve
            self._mm_steps(B, c, 0.0, blocks, iters=1)
            S = self.CU @ B
            return B, objective(B, S), 1

        prev = objective(B, S)
        rounds = 0
        stall_streak = 0
        while rounds < max_rounds:
            rounds += 1
            R = c - S
            bn = block_norms_all(B)
            rn = block_norms_all(R)
            excl = {j} if k is None else {j, k}
            active = [l for l in np.nonzero(bn > 0.0)[0] if l not in excl]
            violators = [
                l for l in np.nonzero((bn == 0.0) & (rn > pen * (1.0 + 1e-10)))[0]
                if l not in excl
            ]
            if not active and not violators:
                break
            for l in violators:
                # seed entering blocks with one shrinkage update each,
                # refreshing the partial residual so the seeds are jointly
                # monotone in the objective
                sl = self.slices[l]
                bi = self.block_index[l]
                G = (c[bi] - S[bi]) / n
                gn = float(np.linalg.norm(G))
                if gn <= thr:
                    continue
                B[sl] = (1.0 - thr / gn) * G
                S = S + self.CU[:, bi] @ B[sl]
            trial = sorted(active + [l for l in violators
                                     if np.any(B[self.slices[l]])])
            if not trial:
                break
            X = self._smooth_min_active(c, pen, trial, B)
            Bcand = np.zeros_like(B)
            idx = np.concatenate([self.block_index[l] for l in trial])
            Bcand[idx] = X
            Scand = self.CU @ Bcand
            # exact coordinate cleanup: the per-block subproblem has a closed
            # form (CU[sl, sl] = n I), so one shrinkage pass zeroes weak
            # blocks decisively instead of letting them linger near zero
            order = sorted(trial, key=lambda l: float(
                np.linalg.norm(Bcand[self.slices[l]])))
            for l in order:
                bi = self.block_index[l]
                M = c[bi] - Scand[bi] + n * Bcand[bi]
                if float(np.linalg.norm(M)) <= pen and np.any(Bcand[bi]):
                    Scand -= self.CU[:, bi] @ Bcand[bi]
                    Bcand[bi] = 0.0
            ocand = objective(Bcand, Scand)
            if ocand <= prev:
                B, S = Bcand, Scand
                cur = ocand
            else:
                cur = prev
            stalled = prev - cur <= BCD_TOL * max(abs(prev), 1.0)
            prev = cur
            stall_streak = stall_streak + 1 if stalled else 0
            if stalled and (not violators or stall_streak >= 3):
                break
        return B, prev, rounds

    def fit_target_batch(self, j: int, tau: float, warm: np.ndarray = None,
                         max_rounds: int = BCD_MAX_SWEEPS) -> np.ndarray:
        """All p nodewise fits for one target j as a (p, D, d_j) array.

        Slot k is the fit with variable k excluded; slot j is the fit on all
        remaining variables. If the unconstrained fit already has block k at
        zero it is also the minimizer of the k-excluded problem (the extra
        constraint is inactive at the optimum), so only the blocks active in
        the base fit need their own solve.
        """
        p = self.p
        out = np.empty((p, self.D, self.basis.d[j]))
        base = self.fit(j, None, tau,
                        warm=None if warm is None else warm[j],
                        max_rounds=max_rounds)[0]
        out[j] = base
        for k in range(p):
            if k == j:
                continue
            if not np.any(base[self.slices[k]]):
                out[k] = base
            else:
                w = base if warm is None else warm[k]
                out[k] = self.fit(j, k, tau, warm=w,
                                  max_rounds=max_rounds)[0]
        return out

    def quick_exclusion(self, j: int, k: int, tau: float, base: np.ndarray,
                        iters: int = 3) -> np.ndarray:
        """Cheap k-excluded solution: zero block k of the base fit and take a
        few majorize-minimize steps on the remaining active blocks. Exact at
        tau = 0 (a single least squares solve); elsewhere accurate enough to
        rank candidate tau values on the regularization path, where the
        selected tau is refit exactly afterwards.
        """
        c = self.CV[j]
        pen = tau * math.sqrt(self.n)
        B = base.copy()
        B[self.slices[k]] = 0.0
        blocks = [l for l in range(self.p) if l != j and l != k]
        if pen == 0.0:
            for l in blocks:
                if not np.any(B[self.slices[l]]):
                    B[self.slices[l]] = 1.0
            return self._mm_steps(B, c, 0.0, blocks, iters=1)
        return self._mm_steps(B, c, pen, blocks, iters=iters)

    def fitted_curves(self, j: int, B: np.ndarray) -> np.ndarray:
        return (self.U @ B) @ self.basis.eigenfunctions[j]


def standardized_group_lasso(basis: FpcaBasis, j: int, k: int,
                             tau: float) -> GroupLassoFit:
    """Solve the group-penalized nodewise regression for one (target, excluded)."""
    if j == k:
        raise InvalidPair("target and excluded variable must differ")
    if tau < 0:
        raise InvalidArgument("tau must be nonnegative")
    ws = _Workspace(basis)
    B, obj, sweeps = ws.fit(j, k, tau)
    blocks, active = {}, set()
    for l in range(basis.p):
        if l in (j, k):
            continue
        Bl = B[ws.slices[l]]
        psi = ws.qinvs[l] @ Bl
        if np.any(Bl):
            active.add(l)
        else:
            psi = np.zeros_like(psi)
        blocks[l] = psi
    return GroupLassoFit(
        target=j, excluded=k, blocks=blocks, active=frozenset(active),
        tau=tau, objective=obj, sweeps=sweeps,
        flagged=bool(ws.flagged_vars - {j, k}),
    )


def group_lasso_objective(basis: FpcaBasis, j: int, k: int, tau: float,
                          blocks: dict) -> float:
    """Penalized least squares value at given coefficient blocks (checking aid)."""
    n = basis.n
    fitted = np.zeros_like(basis.scores[j])
    pensum = 0.0
    for l, psi in blocks.items():
        V = basis.scores[l]
        fitted += V @ psi
        pensum += float(np.linalg.norm(V @ psi)) / math.sqrt(n)
    rss = float(np.sum((basis.scores[j] - fitted) ** 2))
    return 0.5 * rss + tau * math.sqrt(n) * pensum


def residual_pair(basis: FpcaBasis, j: int, k: int,
                  fit_jk: GroupLassoFit, fit_kj: GroupLassoFit) -> ResidualPair:
    """Observed-minus-fitted curves for both regression directions."""
    if fit_jk is None or fit_kj is None:
        raise PipelineOrderError("both directional fits are required")
    if (fit_jk.target, fit_jk.excluded) != (j, k) or \
            (fit_kj.target, fit_kj.excluded) != (k, j):
        raise PipelineOrderError("fits do not match the requested pair")

    def residual(fit):
        t = fit.target
        fitted = np.zeros((basis.n, len(basis.grid)))
        for l, psi in fit.blocks.items():
            fitted += (basis.scores[l] @ psi) @ basis.eigenfunctions[t]
        return basis.curves[:, t, :] - fitted

    return ResidualPair(j=j, k=k, res_jk=residual(fit_jk), res_kj=residual(fit_kj))


def _battery_from_pair_records(records) -> TestBattery:
    return TestBattery(
        pairs=tuple((r.j, r.k) for r in records),
        pvalues=np.array([r.pvalue for r in records]),
        scores=np.array([r.V for r in records]),
        statistics=np.array([r.T for r in records]),
    )


def _pair_record(ws: _Workspace, gram_full, j, k, Bjk, Bkj):
    """Residual cross-covariance record via the score-space Gram identity.

    With P = U B (n x d_j) and V_j the target scores, the residual Gram is
    G_jj - V_j P^T - P V_j^T + P P^T; all matrices have zero column means,
    so the residuals are centered by construction.
    """
    n = ws.n

    def gram(target, B):
        P = ws.U @ B
        V = ws.basis.scores[target]
        A = gram_full[target] - V @ P.T - P @ V.T + P @ P.T
        return 0.5 * (A + A.T)

    rec = covtest.pair_record_from_gram_pair(gram(j, Bjk), gram(k, Bkj), n, j=j, k=k)
    pv, v = pvalue_and_score(rec.T, rec.cumulants)
    return covtest.PairTestRecord(j=j, k=k, T=rec.T, cumulants=rec.cumulants,
                                  pvalue=pv, V=v)


def _curve_grams(basis: FpcaBasis):
    # curves are centered already, so no extra centering pass
    return [
        covtest.gram_of_curves(basis.curves[:, j, :], basis.grid, center=False)
        for j in range(basis.p)
    ]


def fgm_battery(panel: CurvePanel, basis: FpcaBasis, tau: float) -> TestBattery:
    """Residual cross-covariance battery for all pairs at one tau."""
    ws = _Workspace(basis)
    grams = _curve_grams(basis)
    batches = [ws.fit_target_batch(j, tau) for j in range(basis.p)]
    records = []
    for j in range(basis.p):
        for k in range(j + 1, basis.p):
            records.append(
                _pair_record(ws, grams, j, k, batches[j][k], batches[k][j]))
    return _battery_from_pair_records(records)


def fgm_residual_pairs(basis: FpcaBasis, tau: float) -> dict:
    """Residual curve matrices (res_jk, res_kj) for every pair at one tau.

    Feeds the thresholding baselines, which score residual cross-covariance
    surfaces directly.
    """
    ws = _Workspace(basis)
    batches = [ws.fit_target_batch(j, tau) for j in range(basis.p)]
    out = {}
    for j in range(basis.p):
        for k in range(j + 1, basis.p):
            out[(j, k)] = (
                basis.curves[:, j, :] - ws.fitted_curves(j, batches[j][k]),
                basis.curves[:, k, :] - ws.fitted_curves(k, batches[k][j]),
            )
    return out


def default_tau_grid(basis: FpcaBasis, num: int = 20, span: float = 100.0):
    """Log-spaced path from the global tau_max down to a data-driven floor,
    plus the unpenalized endpoint tau = 0.

    The floor is the smaller of tau_max/span and a tenth of the smallest
    per-target activation threshold, so strongly heteroscedastic panels
    (where per-target scales span orders of magnitude) still reach the
    region where every target's fit can activate.
    """
    per_target = _Workspace(basis).target_tau_max()
    tmax = float(per_target.max())
    if tmax <= 0.0:
        return np.array([0.0])
    floor = min(tmax / span, float(per_target.min()) / 10.0)
    floor = max(floor, tmax * 1e-12)
    return np.append(np.geomspace(tmax, floor, num - 1), 0.0)


def fgm_path(basis: FpcaBasis, tau_grid, exact: bool = False):
    """Batteries for every tau on the (descending) grid, warm-started.

    With ``exact=False`` (the default, used for tau selection) only the
    unconstrained fit per target is solved in full; each k-excluded fit is
    approximated by :meth:`_Workspace.quick_exclusion`, which is accurate
    enough to rank candidate tau values at a fraction of the cost. Returns a
    list of (tau, TestBattery) in the order of the sorted grid, largest tau
    first.
    """
    taus = sorted(set(float(t) for t in tau_grid), reverse=True)
    if not taus:
        raise InvalidArgument("empty tau grid")
    ws = _Workspace(basis)
    grams = _curve_grams(basis)
    p = basis.p
    out = []
    batches = [None] * p  # per-target fit batches, warm along the path
    for tau in taus:
        for j in range(p):
            if exact:
                batches[j] = ws.fit_target_batch(j, tau, warm=batches[j])
            else:
                warm = None if batches[j] is None else batches[j][j]
                base = ws.fit(j, None, tau, warm=warm)[0]
                batch = np.empty((p, ws.D, basis.d[j]))
                batch[j] = base
                for k in range(p):
                    if k == j:
                        continue
                    if not np.any(base[ws.slices[k]]):
                        batch[k] = base
                    else:
                        batch[k] = ws.quick_exclusion(j, k, tau, base)
                batches[j] = batch
        records = []
        for j in range(p):
            for k in range(j + 1, p):
                records.append(
                    _pair_record(ws, grams, j, k, batches[j][k], batches[k][j]))
        out.append((tau, _battery_from_pair_records(records)))
    return out


def tau_criterion(battery: TestBattery, p: int) -> float:
    """Distance of exceedance counts from their null expectations at 10 cuts."""
    base = float(std_normal_sf(math.sqrt(math.log(p))))
    total = 0.0
    for level in range(1, 11):
        beta = level * base / 10.0
        cut = float(std_normal_quantile(1.0 - beta))
        count = int(np.sum(battery.scores >= cut))
        total += (count / (battery.Q * beta) - 1.0) ** 2
    return total


def select_tau(panel: CurvePanel, basis: FpcaBasis, tau_grid, p: int = None):
    """Global tau minimizing the exceedance-matching criterion.

    Returns (tau_hat, battery_at_tau_hat, path) where path is the full list
    of (tau, battery, criterion) triples. Ties break toward larger tau.
    """
    if p is None:
        p = basis.p
    path = fgm_path(basis, tau_grid)
    scored = [(tau, bat, tau_criterion(bat, p)) for tau, bat in path]
    best_tau, best_bat, best_val = scored[0]
    for tau, bat, val in scored[1:]:
        if val < best_val:  # strict: earlier (larger) tau wins ties
            best_tau, best_bat, best_val = tau, bat, val
    # the path ranks with approximate exclusion fits; the reported battery
    # at the winner comes from the exact solver
    best_bat = fgm_battery(panel, basis, best_tau)
    return best_tau, best_bat, scored
