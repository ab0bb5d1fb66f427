"""K-factor regularized PLS: SIMPLS deflation around the single-factor solver."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateFactor, DimensionMismatch, ZeroMatrix
from .linalg import (
    ProjectionState,
    StandardizedData,
    as_matrix,
    cross_product,
    project_out,
    qapply,
    qmatrix,
)
from .penalties import PenaltySpec
from .solver import SolverOptions, solve_single_factor

# Deflated cross-products smaller than this (relative to M) count as exhausted.
EXHAUSTED_RTOL = 1e-10


@dataclass
class RplsModel:
    """Fitted loadings V, factors Z and projection weights R.

    ``Z = X_std V`` (or ``X_std Q V`` when a quadratic operator is used),
    where ``X_std`` is X standardized with the stored means and scales.
    """

    V: np.ndarray
    Z: np.ndarray
    R: np.ndarray
    lambdas: np.ndarray
    penalty: PenaltySpec
    x_mean: np.ndarray
    x_scale: np.ndarray
    y_mean: np.ndarray
    y_scale: np.ndarray
    Q: object = None
    diagnostics: list = field(default_factory=list)
    selections: list = field(default_factory=list)
    stop_reason: str | None = None
    requested_K: int = 0

    @property
    def K(self):
        return self.V.shape[1]

    @property
    def p(self):
        return self.V.shape[0]

    @property
    def stopped_early(self):
        return self.K < self.requested_K

    @property
    def projection(self):
        """Matrix W with factors = X_std @ W (QV when structured)."""
        return qapply(self.Q, self.V) if self.Q is not None else self.V

    def support(self):
        """Union of loading supports across factors."""
        return np.flatnonzero(np.any(self.V != 0, axis=1))

    def standardize_x(self, X_new):
        X_new = as_matrix(X_new, "X_new")
        if X_new.shape[1] != self.p:
            raise DimensionMismatch(f"X_new has {X_new.shape[1]} columns, model expects {self.p}")
        return (X_new - self.x_mean) / self.x_scale


def fit(data, K, penalty=None, Q=None, opts=None):
    """Extract up to K regularized PLS factors from standardized data.

    `penalty` is either a fixed :class:`PenaltySpec` (the same lambda for
    every factor) or a selector: a callable ``(M_k, Q, opts) -> (spec,
    FactorResult, report)`` choosing lambda_k on the deflated matrix.
    Extraction stops early, with fewer factors, when a loading collapses to
    zero or the deflated cross-product is exhausted.
    """
    if not isinstance(data, StandardizedData):
        raise TypeError("fit expects StandardizedData; see linalg.standardize")
    n, p = data.X.shape
    cap = min(n - 1, p)
    if not 1 <= K <= cap:
        raise DimensionMismatch(f"K must be in [1, {cap}] for n={n}, p={p}; got {K}")
    if Q is not None and qmatrix(Q).shape[0] != p:
        raise DimensionMismatch("operator dimension does not match X")
    penalty = PenaltySpec("none") if penalty is None else penalty
    opts = SolverOptions() if opts is None else opts
    X = data.X

    M = cross_product(data)
    norm0 = np.linalg.norm(M.M)
    if norm0 == 0:
        raise ZeroMatrix("X'Y is zero")
    state = ProjectionState(p)
    V, Z, lambdas, diags, reports = [], [], [], [], []
    spec_used = penalty if isinstance(penalty, PenaltySpec) else None
    stop = None
    for k in range(K):
        if k > 0:
            if np.linalg.norm(M.M) <= EXHAUSTED_RTOL * norm0:
                stop = f"deflated cross-product exhausted at factor {k + 1}"
                break
        if isinstance(penalty, PenaltySpec):
            spec, res, report = penalty, solve_single_factor(M, penalty, Q, opts), None
        else:
            try:
                spec, res, report = penalty(M, Q, opts)
            except Exception as exc:  # noqa: BLE001 - selector failure ends extraction
                if k == 0:
                    raise DegenerateFactor(f"no usable lambda for factor 1: {exc}") from exc
                stop = f"lambda selection failed at factor {k + 1}: {exc}"
                break
            spec_used = spec
        if res.degenerate:
            if k == 0:
                raise DegenerateFactor("first loading is zero; lambda too large")
            stop = f"degenerate loading at factor {k + 1}"
            break
        v = res.v
        z = X @ qapply(Q, v)
        zz = float(z @ z)
        if zz <= 0:
            if k == 0:
                raise DegenerateFactor("first factor is identically zero")
            stop = f"zero factor at factor {k + 1}"
            break
        r = X.T @ z / zz
        try:
            state = state.append(r, Q)
        except DegenerateFactor as exc:
            if k == 0:
                raise
            stop = f"projection became singular at factor {k + 1}: {exc}"
            break
        V.append(v)
        Z.append(z)
        lambdas.append(spec.lam)
        diags.append(res)
        reports.append(report)
        M = project_out(M, state, Q)

    return RplsModel(
        V=np.column_stack(V),
        Z=np.column_stack(Z),
        R=state.R,
        lambdas=np.asarray(lambdas),
        penalty=spec_used if spec_used is not None else PenaltySpec("none"),
        x_mean=data.x_mean,
        x_scale=data.x_scale,
        y_mean=data.y_mean,
        y_scale=data.y_scale,
        Q=Q,
        diagnostics=diags,
        selections=reports,
        stop_reason=stop,
        requested_K=K,
    )


def transform(model, X_new):
    """Factor scores of new samples: standardize with the training metadata, project."""
    return model.standardize_x(X_new) @ model.projection
