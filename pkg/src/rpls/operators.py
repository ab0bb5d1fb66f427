"""Quadratic operators Q encoding structure among the variables.

The main construction is a graph Laplacian over variable positions (e.g.
chemical shifts in ppm) with Epanechnikov kernel weights.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import (
    BadBandwidth,
    DegenerateOperator,
    DimensionMismatch,
    NotPSD,
    NotSymmetric,
)
from .penalties import PenaltySpec
from .solver import solve_single_factor

PSD_TOL = 1e-8
SYM_TOL = 1e-12
DENSE_EIG_LIMIT = 2000


@dataclass(frozen=True, eq=False)
class QuadraticOperator:
    """Symmetric PSD p x p matrix plus a record of how it was built."""

    matrix: np.ndarray
    kind: str = "custom"
    positions: np.ndarray | None = None
    bandwidth: float | None = None
    is_identity: bool = False
    min_eigenvalue: float | None = None
    _csr: sp.csr_matrix | None = field(default=None, repr=False)

    @property
    def p(self):
        return self.matrix.shape[0]

    @property
    def csr(self):
        if self._csr is None:
            object.__setattr__(self, "_csr", sp.csr_matrix(self.matrix))
        return self._csr

    @property
    def is_sparse(self):
        return self.csr.nnz < 0.25 * self.p * self.p

    def apply(self, a):
        if self.is_identity:
            return np.array(a, dtype=float)
        if self.is_sparse:
            return self.csr @ a
        return self.matrix @ a

    def is_zero(self):
        return not np.any(self.matrix)

    def record(self):
        """JSON-friendly construction record."""
        return {
            "kind": self.kind,
            "p": self.p,
            "bandwidth": self.bandwidth,
            "positions": None if self.positions is None else self.positions.tolist(),
            "is_identity": self.is_identity,
            "min_eigenvalue": self.min_eigenvalue,
        }


def identity_operator(p):
    return QuadraticOperator(np.eye(p), kind="identity", is_identity=True, min_eigenvalue=1.0)


def epanechnikov_weights(positions, bandwidth):
    """W_ij = 0.75 (1 - (d_ij / h)^2) for 0 <= d_ij < h, i != j; zero diagonal."""
    x = np.asarray(positions, dtype=float).reshape(-1)
    if not np.all(np.isfinite(x)):
        raise ValueError("positions must be finite")
    if not (np.isfinite(bandwidth) and bandwidth > 0):
        raise BadBandwidth(f"bandwidth must be positive, got {bandwidth}")
    t = np.abs(x[:, None] - x[None, :]) / bandwidth
    W = np.where(t < 1.0, 0.75 * (1.0 - t * t), 0.0)
    np.fill_diagonal(W, 0.0)
    return W


def weighted_laplacian(W, positions=None, bandwidth=None, allow_zero=False):
    """Q = D - W with D the diagonal of row sums."""
    W = np.asarray(W, dtype=float)
    if W.ndim != 2 or W.shape[0] != W.shape[1]:
        raise DimensionMismatch(f"weight matrix must be square, got {W.shape}")
    if not np.allclose(W, W.T, rtol=0, atol=SYM_TOL * max(1.0, np.abs(W).max())):
        raise NotSymmetric("weight matrix is not symmetric")
    if np.any(W < 0):
        raise ValueError("weights must be nonnegative")
    if np.any(np.diag(W) != 0):
        raise ValueError("weight matrix must have a zero diagonal")
    Q = np.diag(W.sum(axis=1)) - W
    if not allow_zero and not np.any(Q):
        raise DegenerateOperator("empty graph: the Laplacian is identically zero")
    return QuadraticOperator(
        Q,
        kind="laplacian",
        positions=None if positions is None else np.asarray(positions, dtype=float),
        bandwidth=bandwidth,
        min_eigenvalue=0.0,
    )


def epanechnikov_laplacian(positions, bandwidth):
    return weighted_laplacian(epanechnikov_weights(positions, bandwidth), positions, bandwidth)


def validate_psd(Q, kind="custom", rng=None):
    """Check symmetry and positive semi-definiteness and wrap as an operator.

    Eigenvalues in [-1e-8, 0) are clamped to zero by symmetric
    reconstruction. Above p = 2000 the PSD check uses random quadratic
    forms instead of a full eigendecomposition.
    """
    Q = np.asarray(Q, dtype=float)
    if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
        raise DimensionMismatch(f"operator must be square, got {Q.shape}")
    if not np.all(np.isfinite(Q)):
        raise ValueError("operator has non-finite entries")
    scale = max(1.0, np.abs(Q).max())
    if np.abs(Q - Q.T).max() > SYM_TOL * scale:
        raise NotSymmetric("operator is not symmetric")
    Q = 0.5 * (Q + Q.T)
    p = Q.shape[0]
    if np.array_equal(Q, np.eye(p)):
        return identity_operator(p)
    if p <= DENSE_EIG_LIMIT:
        w, U = np.linalg.eigh(Q)
        if w[0] < -PSD_TOL * scale:
            raise NotPSD(f"smallest eigenvalue {w[0]:.3e} < 0")
        if w[0] < 0:
            w = np.maximum(w, 0.0)
            Q = (U * w) @ U.T
            Q = 0.5 * (Q + Q.T)
        lo = float(max(w[0], 0.0))
    else:
        rng = np.random.default_rng(0) if rng is None else rng
        V = rng.standard_normal((p, 32))
        quad = np.einsum("ij,ij->j", V, Q @ V)
        if np.any(quad < -PSD_TOL * np.einsum("ij,ij->j", V, V)):
            raise NotPSD("negative quadratic form found on random probe")
        lo = None
    if not np.any(Q):
        raise DegenerateOperator("operator is identically zero")
    return QuadraticOperator(Q, kind=kind, min_eigenvalue=lo)


def explained_variance(X, Q):
    """||XQv1||^2 / ||X||_F^2 for the first generalized component at lambda = 0."""
    X = np.asarray(X, dtype=float)
    Xc = X - X.mean(axis=0)
    # Unsupervised criterion: first GPCA direction of X, i.e. M = X'.
    res = solve_single_factor(Xc.T, PenaltySpec("none"), Q)
    if res.degenerate:
        return 0.0
    z = Xc @ Q.apply(res.v)
    return float(z @ z / np.sum(Xc * Xc))


def operator_bandwidth_search(X, positions, candidates):
    """Pick the Epanechnikov-Laplacian bandwidth maximizing explained variance.

    Returns ``(operator, scores)`` where scores maps each candidate to its
    explained variance (0 for candidates giving an empty graph). Ties go to
    the smaller bandwidth.
    """
    candidates = [float(h) for h in candidates]
    if not candidates:
        raise ValueError("empty bandwidth candidate list")
    scores = {}
    best = None
    for h in sorted(set(candidates)):
        try:
            Q = epanechnikov_laplacian(positions, h)
        except DegenerateOperator:
            scores[h] = 0.0
            continue
        s = explained_variance(X, Q)
        scores[h] = s
        if best is None or s > best[0]:
            best = (s, Q)
    if best is None:
        raise DegenerateOperator("every candidate bandwidth gives an empty graph")
    return best[1], scores
