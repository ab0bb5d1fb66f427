"""Compiled coordinate descent for the Q-metric penalized regression.

Solves  min_v 1/2 (v - z)'Q(v - z) + lam * ||v||_1  (optionally v >= 0)
with Q given in CSR form. Q is symmetric, so row j doubles as column j.
"""
import numpy as np
from numba import njit


@njit(cache=True)
def cd_lasso_csr(indptr, indices, data, diag, z, v, lam, nonneg, tol, max_sweeps):
    p = z.shape[0]
    g = np.zeros(p)
    for j in range(p):
        acc = 0.0
        for k in range(indptr[j], indptr[j + 1]):
            acc += data[k] * (v[indices[k]] - z[indices[k]])
        g[j] = acc
    sweeps = 0
    for sweep in range(max_sweeps):
        sweeps = sweep + 1
        max_delta = 0.0
        max_v = 0.0
        for j in range(p):
            d = diag[j]
            if d <= 0.0:
                # Zero row of a PSD matrix: only the penalty sees v_j.
                new = z[j] if lam == 0.0 else 0.0
                if nonneg and new < 0.0:
                    new = 0.0
            else:
                w = v[j] - g[j] / d
                t = lam / d
                if nonneg:
                    new = w - t if w > t else 0.0
                elif w > t:
                    new = w - t
                elif w < -t:
                    new = w + t
                else:
                    new = 0.0
            delta = new - v[j]
            if delta != 0.0:
                for k in range(indptr[j], indptr[j + 1]):
                    g[indices[k]] += data[k] * delta
                v[j] = new
                if abs(delta) > max_delta:
                    max_delta = abs(delta)
            if abs(v[j]) > max_v:
                max_v = abs(v[j])
        if max_delta <= tol * max(1.0, max_v):
            break
    return v, sweeps


@njit(cache=True)
def cd_lasso_gram(G, c, lam, b, tol, max_sweeps):
    """min_b 1/2 b'Gb - c'b + lam ||b||_1 for a dense PSD Gram matrix G."""
    p = c.shape[0]
    grad = c - G @ b
    sweeps = 0
    converged = False
    for sweep in range(max_sweeps):
        sweeps = sweep + 1
        max_delta = 0.0
        max_b = 0.0
        for i in range(p):
            d = G[i, i]
            if d <= 0.0:
                continue
            w = b[i] + grad[i] / d
            t = lam / d
            if w > t:
                new = w - t
            elif w < -t:
                new = w + t
            else:
                new = 0.0
            delta = new - b[i]
            if delta != 0.0:
                for k in range(p):
                    grad[k] -= delta * G[k, i]
                b[i] = new
                if abs(delta) > max_delta:
                    max_delta = abs(delta)
            if abs(b[i]) > max_b:
                max_b = abs(b[i])
        if max_delta <= tol * max(1.0, max_b):
            converged = True
            break
    return b, sweeps, converged
