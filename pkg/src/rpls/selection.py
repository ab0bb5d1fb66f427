"""Model selection: BIC for the per-factor lambda, sparse post-selection of K,
and k-fold / leave-one-out cross-validation."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _cd
from .errors import AllDegenerate, BadRange, NonOrthogonalFactors, TooFewSamples
from .linalg import as_array, as_matrix, standardize
from .penalties import LambdaGrid, lambda_grid, lambda_max, soft_threshold
from .solver import solve_single_factor

ORTHO_TOL = 1e-8


@dataclass
class BicResult:
    lambdas: np.ndarray
    bic: np.ndarray
    df: np.ndarray
    degenerate: np.ndarray
    chosen: int
    results: list

    @property
    def lam(self):
        return float(self.lambdas[self.chosen])

    @property
    def result(self):
        return self.results[self.chosen]

    def rows(self):
        """(lambda, BIC, df, degenerate) tuples for CSV export."""
        return [
            (float(l), float(b), int(d), bool(g))
            for l, b, d, g in zip(self.lambdas, self.bic, self.df, self.degenerate)
        ]


def bic_value(M, res, spec):
    """log(RSS / pq) + log(pq)/(pq) * df for one single-factor fit.

    RSS is the Frobenius residual of the rank-one fit ``v_hat u'`` to M.
    """
    A = as_array(M)
    A = A[:, None] if A.ndim == 1 else A
    pq = A.size
    rss = float(np.sum((A - np.outer(res.vhat, res.u)) ** 2))
    rss = max(rss, 1e-300, 1e-30 * float(np.sum(A * A)))
    return np.log(rss / pq) + np.log(pq) / pq * spec.df(res.vhat)


TIE_RTOL = 1e-9


def _first_min(scores):
    # Grids run from most to least regularized, so the first near-minimum is
    # the most regularized among (round-off) ties.
    best = float(np.min(scores))
    return int(np.flatnonzero(scores <= best + TIE_RTOL * max(1.0, abs(best)))[0])


def bic_select_lambda(M, spec, grid, Q=None, opts=None):
    """Fit the single-factor problem along a descending lambda grid, pick min BIC.

    Each fit is warm-started from the previous (larger) lambda. Degenerate
    fits (zero loading) are excluded; ties go to the larger lambda.
    """
    lams = np.asarray(grid.values if isinstance(grid, LambdaGrid) else grid, dtype=float)
    if lams.size == 0:
        raise BadRange("empty lambda grid")
    lams = np.sort(lams)[::-1]
    bic = np.full(lams.size, np.inf)
    df = np.zeros(lams.size, dtype=int)
    degenerate = np.zeros(lams.size, dtype=bool)
    results = []
    warm = None
    for i, lam in enumerate(lams):
        s = spec.with_lambda(lam)
        res = solve_single_factor(M, s, Q, opts, warm=warm)
        results.append(res)
        if res.degenerate:
            degenerate[i] = True
            continue
        warm = res
        df[i] = s.df(res.vhat)
        bic[i] = bic_value(M, res, s)
    if degenerate.all():
        raise AllDegenerate(f"every lambda in [{lams[-1]:.3g}, {lams[0]:.3g}] zeroes the loading")
    chosen = _first_min(bic)
    return BicResult(lams, bic, df, degenerate, chosen, results)


class BicSelector:
    """Per-factor lambda chooser for :func:`rpls.pipeline.fit`.

    Builds a `count`-point log grid from lambda_max of each deflated
    cross-product down to `floor` and keeps the BIC-optimal fit.
    """

    def __init__(self, spec, count=25, floor=1e-5, grid=None):
        self.spec = spec
        self.count = count
        self.floor = floor
        self.grid = grid

    def grid_for(self, M):
        if self.grid is not None:
            return np.asarray(self.grid, dtype=float)
        lmax = lambda_max(M, self.spec)
        return lambda_grid(lmax, self.count, min(self.floor, 0.5 * lmax)).values

    def __call__(self, M, Q=None, opts=None):
        out = bic_select_lambda(M, self.spec, self.grid_for(M), Q, opts)
        return self.spec.with_lambda(out.lam), out.result, out


@dataclass
class KSelection:
    gammas: np.ndarray
    coefs: list
    bic: np.ndarray
    chosen: int
    scales: np.ndarray
    method: str

    @property
    def gamma(self):
        return float(self.gammas[self.chosen])

    @property
    def beta(self):
        """Coefficients on unit-norm factors (K x q)."""
        return self.coefs[self.chosen]

    @property
    def B(self):
        """Coefficients on the raw factor scale."""
        return self.beta / self.scales[:, None]

    @property
    def selected(self):
        return np.flatnonzero(np.any(self.beta != 0, axis=1))

    @property
    def K(self):
        return int(self.selected.size)

    @property
    def degenerate(self):
        return self.K == 0

    def rows(self):
        return [
            (float(g), float(b), int(np.any(c != 0, axis=1).sum()))
            for g, b, c in zip(self.gammas, self.bic, self.coefs)
        ]


def normalize_columns(Z):
    Z = as_matrix(Z, "Z")
    scales = np.linalg.norm(Z, axis=0)
    if np.any(scales == 0):
        raise NonOrthogonalFactors("zero factor column")
    return Z / scales, scales


def lasso_cd(X, y, gamma, beta=None, tol=1e-12, max_sweeps=100_000):
    """argmin 1/2 ||y - X b||^2 + gamma ||b||_1 by cyclic coordinate descent."""
    X = np.asarray(X, dtype=float)
    b = np.zeros(X.shape[1]) if beta is None else np.array(beta, dtype=float)
    b, _, _ = _cd.cd_lasso_gram(X.T @ X, X.T @ np.asarray(y, dtype=float), float(gamma), b, tol, max_sweeps)
    return b


def select_k_sparse(Z, Y, gammas=None, count=25, floor=1e-5, strict=True):
    """Post-select factors by the lasso on unit-normalized factors.

    On orthonormal factors the lasso solution of 1/2||Y - Z b||^2 +
    gamma ||b||_1 is the closed form S(Z'Y, gamma). With ``strict`` (the
    default) non-orthogonal factors raise :class:`NonOrthogonalFactors`;
    otherwise the lasso is solved exactly by coordinate descent.
    gamma is chosen by BIC = N log(RSS/N) + log(N) df over the N entries of
    Y; ties go to the larger gamma.
    """
    Zn, scales = normalize_columns(Z)
    Y = as_matrix(Y, "Y")
    if Zn.shape[0] != Y.shape[0]:
        raise TooFewSamples("Z and Y row counts differ")
    G = Zn.T @ Zn
    off = np.abs(G - np.diag(np.diag(G))).max() if G.shape[0] > 1 else 0.0
    orthogonal = off <= ORTHO_TOL
    if strict and not orthogonal:
        raise NonOrthogonalFactors(f"max |z_i'z_j| = {off:.2e} on normalized factors")
    ZtY = Zn.T @ Y
    if gammas is None:
        top = float(np.abs(ZtY).max())
        gammas = lambda_grid(top, count, min(floor, 0.5 * top)).values if top > 0 else np.array([0.0])
    gammas = np.sort(np.asarray(gammas, dtype=float))[::-1]
    N = Y.size
    coefs, bic = [], np.empty(gammas.size)
    prev = np.zeros_like(ZtY)
    for i, g in enumerate(gammas):
        if orthogonal:
            beta = soft_threshold(ZtY, g)
        else:
            beta = np.column_stack(
                [lasso_cd(Zn, Y[:, j], g, beta=prev[:, j]) for j in range(Y.shape[1])]
            )
            prev = beta
        rss = max(float(np.sum((Y - Zn @ beta) ** 2)), 1e-300)
        coefs.append(beta)
        bic[i] = N * np.log(rss / N) + np.log(N) * np.count_nonzero(beta)
    chosen = _first_min(bic)
    return KSelection(gammas, coefs, bic, chosen, scales, "closed-form" if orthogonal else "coordinate-descent")


@dataclass
class CvResult:
    candidates: list
    fold_scores: np.ndarray
    folds: list

    @property
    def mean(self):
        return self.fold_scores.mean(axis=0)

    @property
    def se(self):
        k = self.fold_scores.shape[0]
        return self.fold_scores.std(axis=0, ddof=1) / np.sqrt(k) if k > 1 else np.zeros(self.fold_scores.shape[1])

    @property
    def best_index(self):
        # First minimum: candidates are ordered most-regularized first by convention.
        return int(np.argmin(self.mean))

    @property
    def best(self):
        return self.candidates[self.best_index]


def fold_indices(n, folds=10, seed=0):
    """Test-index arrays for k-fold CV (``folds="loo"`` for leave-one-out)."""
    if folds == "loo" or folds == n:
        return [np.array([i]) for i in range(n)]
    folds = int(folds)
    if folds < 2:
        raise TooFewSamples("need at least 2 folds")
    if n < folds:
        raise TooFewSamples(f"{n} samples cannot fill {folds} folds")
    perm = np.random.default_rng(seed).permutation(n)
    return [np.sort(chunk) for chunk in np.array_split(perm, folds)]


def _mspe(pred, truth):
    d = np.asarray(pred, dtype=float).reshape(len(truth), -1) - np.asarray(truth, dtype=float).reshape(len(truth), -1)
    return float(np.mean(np.sum(d * d, axis=1)))


def cross_validate(procedure, X, Y, folds=10, metric=None, seed=0, scale_x=True, scale_y=False):
    """Score candidate models by cross-validation.

    ``procedure(train, X_test)`` gets the training fold as StandardizedData
    (standardization is refit inside every fold) plus the raw held-out rows
    and returns ``{candidate: Y_pred}`` with predictions on the original
    response scale. Scores are averaged over folds; the standard error is
    the fold SD over sqrt(#folds).
    """
    X = as_matrix(X, "X")
    Y = as_matrix(Y, "Y")
    metric = _mspe if metric is None else metric
    n = X.shape[0]
    tests = fold_indices(n, folds, seed)
    candidates, scores = None, []
    for te in tests:
        tr = np.setdiff1d(np.arange(n), te)
        if tr.size < 2:
            raise TooFewSamples("training fold has fewer than 2 samples")
        train = standardize(X[tr], Y[tr], scale_x=scale_x, scale_y=scale_y)
        preds = procedure(train, X[te])
        if candidates is None:
            candidates = list(preds)
        scores.append([metric(preds[c], Y[te]) for c in candidates])
    return CvResult(candidates, np.asarray(scores), tests)
