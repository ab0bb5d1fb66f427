"""Dense matrix plumbing shared by the solvers.

Standardization, cross-products, Q-weighted norms and the Gram-Schmidt
projection state used for SIMPLS-style deflation.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateColumnWarning,
    DegenerateFactor,
    DimensionMismatch,
    NegativeQuadraticForm,
)

GRAM_COND_LIMIT = 1e12


def as_matrix(a, name="matrix", min_rows=1):
    """Return `a` as a finite 2-D float array (vectors become columns)."""
    arr = np.asarray(a, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise DimensionMismatch(f"{name} must be 2-D, got shape {arr.shape}")
    if arr.shape[0] < min_rows or arr.shape[1] < 1:
        raise DimensionMismatch(f"{name} has shape {arr.shape}; need >= {min_rows} rows")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def qmatrix(Q):
    """Dense array behind `Q`, or None for the identity."""
    if Q is None:
        return None
    return np.asarray(getattr(Q, "matrix", Q), dtype=float)


def qapply(Q, a):
    """Compute Q @ a, treating None as the identity."""
    if Q is None:
        return a
    apply = getattr(Q, "apply", None)
    if apply is not None:
        return apply(a)
    return np.asarray(Q, dtype=float) @ a


@dataclass(frozen=True)
class StandardizedData:
    """Centered (and optionally scaled) X and Y with the metadata to undo it."""

    X: np.ndarray
    Y: np.ndarray
    x_mean: np.ndarray
    x_scale: np.ndarray
    y_mean: np.ndarray
    y_scale: np.ndarray
    degenerate: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=bool))

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def p(self):
        return self.X.shape[1]

    @property
    def q(self):
        return self.Y.shape[1]

    def transform_x(self, X_new):
        X_new = as_matrix(X_new, "X_new")
        if X_new.shape[1] != self.p:
            raise DimensionMismatch(f"expected {self.p} columns, got {X_new.shape[1]}")
        return (X_new - self.x_mean) / self.x_scale

    def transform_y(self, Y_new):
        Y_new = as_matrix(Y_new, "Y_new")
        if Y_new.shape[1] != self.q:
            raise DimensionMismatch(f"expected {self.q} response columns, got {Y_new.shape[1]}")
        return (Y_new - self.y_mean) / self.y_scale

    def inverse_x(self, Xs):
        return np.asarray(Xs) * self.x_scale + self.x_mean

    def inverse_y(self, Ys):
        return np.asarray(Ys) * self.y_scale + self.y_mean


def _center_scale(A, scale):
    mean = A.mean(axis=0)
    C = A - mean
    sd = C.std(axis=0, ddof=1)
    tiny = sd <= 1e-12 * np.maximum(1.0, np.abs(mean))
    if not scale:
        return C, mean, np.ones(A.shape[1]), tiny
    div = np.where(tiny, 1.0, sd)
    C = C / div
    return C, mean, div, tiny


def standardize(X, Y, scale_x=True, scale_y=False):
    """Center the columns of X and Y; scale X columns to unit sample SD.

    Zero-variance columns of X are left centered and unscaled, flagged in
    ``degenerate`` and reported through a :class:`DegenerateColumnWarning`.
    """
    X = as_matrix(X, "X")
    Y = as_matrix(Y, "Y")
    if X.shape[0] != Y.shape[0]:
        raise DimensionMismatch(f"X has {X.shape[0]} rows, Y has {Y.shape[0]}")
    if X.shape[0] < 2:
        raise DimensionMismatch("need at least 2 samples")
    Xs, xm, xs, tiny = _center_scale(X, scale_x)
    Ys, ym, ys, _ = _center_scale(Y, scale_y)
    if scale_x and tiny.any():
        warnings.warn(
            f"{int(tiny.sum())} zero-variance column(s) left unscaled: "
            f"{np.flatnonzero(tiny)[:10].tolist()}",
            DegenerateColumnWarning,
            stacklevel=2,
        )
    return StandardizedData(Xs, Ys, xm, xs, ym, ys, tiny)


@dataclass(frozen=True)
class CrossProduct:
    """The p x q cross-product X'Y, or one of its deflated successors."""

    M: np.ndarray
    level: int = 0

    @property
    def shape(self):
        return self.M.shape

    def __array__(self, dtype=None, copy=None):
        return self.M if dtype is None else self.M.astype(dtype)


def as_array(M):
    return M.M if isinstance(M, CrossProduct) else np.asarray(M, dtype=float)


def cross_product(data, Y=None):
    """M = X'Y from standardized data (or from an explicit X, Y pair)."""
    if Y is None:
        X, Y = data.X, data.Y
    else:
        X, Y = as_matrix(data, "X"), as_matrix(Y, "Y")
    if X.shape[0] != Y.shape[0]:
        raise DimensionMismatch(f"X has {X.shape[0]} rows, Y has {Y.shape[0]}")
    return CrossProduct(X.T @ Y, 0)


def q_norm(v, Q=None):
    """sqrt(v'Qv); the Euclidean norm when Q is None."""
    v = np.asarray(v, dtype=float)
    if Q is None:
        return float(np.linalg.norm(v))
    Qv = qapply(Q, v)
    if Qv.shape != v.shape:
        raise DimensionMismatch(f"vector of length {v.shape[0]} vs operator {Qv.shape}")
    quad = float(v @ Qv)
    if quad < 0.0:
        if quad < -1e-10:
            raise NegativeQuadraticForm(f"v'Qv = {quad:.3e} < 0; Q is not PSD")
        quad = 0.0
    return float(np.sqrt(quad))


class ProjectionState:
    """Projection weights R and the inverse of their (Q-)Gram matrix.

    The Gram inverse is grown one column at a time through the Schur
    complement, so appending a factor costs O(pk) rather than a
    refactorization.
    """

    def __init__(self, p, R=None, gram=None, gram_inv=None):
        self.p = p
        self.R = np.zeros((p, 0)) if R is None else R
        self.gram = np.zeros((0, 0)) if gram is None else gram
        self.gram_inv = np.zeros((0, 0)) if gram_inv is None else gram_inv

    @property
    def k(self):
        return self.R.shape[1]

    def append(self, r, Q=None):
        """New state with column `r` appended."""
        r = np.asarray(r, dtype=float).reshape(-1)
        if r.shape[0] != self.p:
            raise DimensionMismatch(f"weight of length {r.shape[0]}, expected {self.p}")
        Qr = qapply(Q, r)
        b = self.R.T @ Qr
        c = float(r @ Qr)
        Gb = self.gram_inv @ b
        schur = c - float(b @ Gb)
        if not schur > 0.0:
            raise DegenerateFactor(f"Gram Schur complement {schur:.3e} is not positive")
        k = self.k
        gram = np.empty((k + 1, k + 1))
        gram[:k, :k] = self.gram
        gram[:k, k] = b
        gram[k, :k] = b
        gram[k, k] = c
        _check_conditioning(gram)
        inv = np.empty_like(gram)
        inv[:k, :k] = self.gram_inv + np.outer(Gb, Gb) / schur
        inv[:k, k] = -Gb / schur
        inv[k, :k] = -Gb / schur
        inv[k, k] = 1.0 / schur
        return ProjectionState(self.p, np.column_stack([self.R, r]), gram, inv)

    @classmethod
    def from_weights(cls, R, Q=None):
        """Refactorize from scratch (debug path for the incremental update)."""
        R = as_matrix(R, "R")
        gram = R.T @ qapply(Q, R)
        gram = 0.5 * (gram + gram.T)
        _check_conditioning(gram)
        return cls(R.shape[0], R.copy(), gram, np.linalg.inv(gram))


def _check_conditioning(gram):
    # Column scales of R are arbitrary; judge conditioning of the normalized Gram.
    d = np.sqrt(np.clip(np.diag(gram), 1e-300, None))
    eig = np.linalg.eigvalsh(gram / np.outer(d, d))
    if eig[0] <= 0 or eig[-1] / eig[0] > GRAM_COND_LIMIT:
        raise DegenerateFactor(
            f"projection Gram matrix is numerically singular (eigenvalues {eig[0]:.3e}..{eig[-1]:.3e})"
        )


def project_out(M, state, Q=None):
    """Deflate M against the weights in `state`.

    Returns (I - R (R'QR)^{-1} R'Q) M, so that R'QM = 0 afterwards; with
    Q = None this is the orthogonal projector I - R(R'R)^{-1}R'.
    """
    level = M.level if isinstance(M, CrossProduct) else 0
    A = as_array(M)
    if state.k == 0:
        return CrossProduct(A.copy(), level)
    if A.shape[0] != state.p:
        raise DimensionMismatch(f"M has {A.shape[0]} rows, state has p={state.p}")
    coef = state.gram_inv @ (state.R.T @ qapply(Q, A))
    return CrossProduct(A - state.R @ coef, level + 1)
