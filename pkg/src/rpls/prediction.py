"""Prediction on top of fitted factors: least squares regression, class coding
for discriminant PLS, linear discriminant analysis, and error metrics."""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .errors import (
    ClassCodingError,
    DimensionMismatch,
    EmptyInput,
    SingletonClassWarning,
    SingularCovariance,
    SingularFactors,
)
from .linalg import as_matrix
from .pipeline import transform


@dataclass
class RegressionFit:
    """Responses regressed on factors.

    ``B`` (K x q) acts on the standardized-response scale; ``coef`` (p x q)
    and ``intercept`` give the same predictor on the raw X scale.
    """

    B: np.ndarray
    coef: np.ndarray
    intercept: np.ndarray
    y_mean: np.ndarray
    y_scale: np.ndarray

    def predict_factors(self, Z):
        return (np.asarray(Z) @ self.B) * self.y_scale + self.y_mean


def compose_regression(model, B):
    """RegressionFit for factor coefficients B on the standardized-response scale."""
    coef = (model.projection / model.x_scale[:, None]) @ B * model.y_scale
    intercept = model.y_mean - model.x_mean @ coef
    return RegressionFit(B, coef, intercept, model.y_mean, model.y_scale)


def fit_regression(model, Y, coefficients=None):
    """Least squares of Y on the model's factors.

    Y is on the original response scale and is standardized with the
    model's stored response metadata. Passing `coefficients` (K x q, on the
    raw-factor scale) wraps externally chosen ones instead, e.g. the
    shrunken coefficients from :func:`rpls.selection.select_k_sparse`.
    """
    if coefficients is not None:
        B = np.asarray(coefficients, dtype=float).reshape(model.K, -1)
        return compose_regression(model, B)
    Y = as_matrix(Y, "Y")
    if Y.shape[0] != model.Z.shape[0]:
        raise DimensionMismatch(f"Y has {Y.shape[0]} rows, model was fit on {model.Z.shape[0]}")
    if Y.shape[1] != np.size(model.y_mean):
        raise DimensionMismatch(f"Y has {Y.shape[1]} columns, model was fit on {np.size(model.y_mean)}")
    Ys = (Y - model.y_mean) / model.y_scale
    Z = model.Z
    G = Z.T @ Z
    try:
        c, low = cho_factor(G)
    except np.linalg.LinAlgError as exc:
        raise SingularFactors("factor Gram matrix is singular") from exc
    B = cho_solve((c, low), Z.T @ Ys)
    return compose_regression(model, B)


def predict(fit, model, X_new):
    """transform(model, X_new) @ B, mapped back to the response scale."""
    return fit.predict_factors(transform(model, X_new))


@dataclass
class ClassCoding:
    classes: np.ndarray
    Y: np.ndarray
    sizes: np.ndarray
    index: np.ndarray


def encode_classes(labels):
    """Indicator matrix with entry 1/n_g in the column of each sample's class."""
    labels = np.asarray(labels)
    if labels.size == 0:
        raise EmptyInput("no labels")
    classes, index, sizes = np.unique(labels, return_inverse=True, return_counts=True)
    if classes.size < 2:
        raise ClassCodingError("need at least two classes")
    if np.any(sizes == 1):
        warnings.warn(
            f"singleton class(es): {classes[sizes == 1].tolist()}", SingletonClassWarning, stacklevel=2
        )
    Y = np.zeros((labels.size, classes.size))
    Y[np.arange(labels.size), index] = 1.0 / sizes[index]
    return ClassCoding(classes, Y, sizes, index)


@dataclass
class LdaModel:
    classes: np.ndarray
    means: np.ndarray
    cov: np.ndarray
    priors: np.ndarray
    ridge: float
    _chol: tuple = None

    def scores(self, Z):
        """Discriminant scores z'S^-1 mu_g - mu_g'S^-1 mu_g / 2 + log pi_g."""
        Z = as_matrix(Z, "Z", min_rows=1)
        if Z.shape[1] != self.means.shape[1]:
            raise DimensionMismatch(f"expected {self.means.shape[1]} factors, got {Z.shape[1]}")
        A = cho_solve(self._chol, self.means.T)  # K x G
        return Z @ A - 0.5 * np.einsum("gk,kg->g", self.means, A) + np.log(self.priors)


def lda_fit(Z, labels, priors=None):
    Z = as_matrix(Z, "Z")
    labels = np.asarray(labels)
    if labels.shape[0] != Z.shape[0]:
        raise DimensionMismatch("labels and factors differ in length")
    classes, index, counts = np.unique(labels, return_inverse=True, return_counts=True)
    G, (n, K) = classes.size, Z.shape
    means = np.vstack([Z[index == g].mean(axis=0) for g in range(G)])
    resid = Z - means[index]
    cov = resid.T @ resid / max(n - G, 1)
    if priors is None:
        priors = counts / n
    priors = np.asarray(priors, dtype=float)
    priors = priors / priors.sum()
    ridge = 0.0
    try:
        chol = cho_factor(cov)
        if np.linalg.cond(cov) > 1e12:
            raise np.linalg.LinAlgError
    except np.linalg.LinAlgError:
        ridge = 1e-8 * max(np.trace(cov), 1e-300) / K
        try:
            chol = cho_factor(cov + ridge * np.eye(K))
        except np.linalg.LinAlgError as exc:
            raise SingularCovariance("pooled covariance is singular even after ridge") from exc
    return LdaModel(classes, means, cov, priors, ridge, chol)


def lda_predict(model, Z_new):
    s = model.scores(Z_new)
    # argmax takes the first maximum: ties go to the lower class index.
    return model.classes[np.argmax(s, axis=1)]


def mspe(pred, truth):
    """Mean over samples of the squared error summed across response columns."""
    pred = np.asarray(pred, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if truth.size == 0:
        raise EmptyInput("empty truth")
    pred = pred.reshape(truth.shape[0], -1)
    truth = truth.reshape(truth.shape[0], -1)
    if pred.shape != truth.shape:
        raise DimensionMismatch(f"prediction shape {pred.shape} vs truth {truth.shape}")
    d = pred - truth
    return float(np.mean(np.sum(d * d, axis=1)))


def misclassification(pred, truth):
    pred, truth = np.asarray(pred), np.asarray(truth)
    if truth.size == 0:
        raise EmptyInput("empty truth")
    if pred.shape != truth.shape:
        raise DimensionMismatch("label vectors differ in length")
    return float(np.mean(pred != truth))


def tpr_fpr(support, truth_support, p):
    """True and false positive rates of a selected variable set."""
    sel = np.zeros(p, dtype=bool)
    sel[np.asarray(support, dtype=int)] = True
    true = np.zeros(p, dtype=bool)
    true[np.asarray(truth_support, dtype=int)] = True
    if not true.any():
        raise EmptyInput("empty true support")
    tpr = float(sel[true].mean())
    fpr = float(sel[~true].mean()) if (~true).any() else 0.0
    return tpr, fpr


def confusion(pred, truth, classes=None):
    """Confusion counts: rows are true classes, columns predicted."""
    pred, truth = np.asarray(pred), np.asarray(truth)
    classes = np.unique(np.concatenate([truth, pred])) if classes is None else np.asarray(classes)
    pos = {c: i for i, c in enumerate(classes.tolist())}
    C = np.zeros((classes.size, classes.size), dtype=int)
    for t, p_ in zip(truth.tolist(), pred.tolist()):
        C[pos[t], pos[p_]] += 1
    return classes, C
