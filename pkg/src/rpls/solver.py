"""Single-factor RPLS and generalized (Q-norm) RPLS.

Maximizes  v'QMu - lam P(v)  subject to  v'Qv <= 1, u'u = 1  by alternating
closed-form updates: u is the normalized M'Qv, v is a normalized penalized
regression fit to Mu. With Q = None the problem is the plain RPLS one.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solveh_banded

from . import _cd
from .errors import DegenerateDirection, ZeroMatrix
from .linalg import as_array, q_norm, qapply
from .penalties import PenaltySpec, group_shrink, prox

DIRECTION_EPS = 1e-14


@dataclass(frozen=True)
class SolverOptions:
    """Convergence controls for the alternating updates.

    A run has converged once the relative objective change drops below
    ``tol`` and the u iterate moves by less than ``step_tol``.
    """

    tol: float = 1e-9
    max_iter: int = 500
    step_tol: float = 1e-8
    init: str = "svd"
    u0: np.ndarray | None = None
    v0: np.ndarray | None = None
    inner_tol: float = 1e-10
    inner_max_sweeps: int = 100_000
    seed: int = 0

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.init not in ("svd", "given"):
            raise ValueError(f"unknown init {self.init!r}")


@dataclass
class FactorResult:
    u: np.ndarray
    v: np.ndarray
    vhat: np.ndarray
    objective: list = field(default_factory=list)
    converged: bool = False
    iterations: int = 0
    degenerate: bool = False
    restarted: bool = False
    lam: float = 0.0

    @property
    def value(self):
        return self.objective[-1] if self.objective else 0.0

    @property
    def support(self):
        return np.flatnonzero(self.v)


def _as_2d(M):
    A = as_array(M)
    return A[:, None] if A.ndim == 1 else A


def update_u(M, v, Q=None):
    """u = M'Qv / ||M'Qv||."""
    A = _as_2d(M)
    w = A.T @ qapply(Q, np.asarray(v, dtype=float))
    norm = np.linalg.norm(w)
    if norm < DIRECTION_EPS:
        raise DegenerateDirection(f"||M'Qv|| = {norm:.3e}")
    return w / norm


def penalized_regression(z, spec, Q=None, start=None, tol=1e-10, max_sweeps=100_000):
    """v_hat = argmin 1/2 ||z - v||_Q^2 + lam P(v)  (v >= 0 if flagged).

    Q = None gives the closed-form prox. A general Q is handled by cyclic
    coordinate descent (lasso) or block proximal-gradient sweeps (group
    lasso); neither needs Q^{-1}.
    """
    z = np.asarray(z, dtype=float)
    if Q is None:
        return prox(spec, z)
    if spec.family == "none" and not spec.nonnegative:
        return z.copy()
    v = np.array(z if start is None else start, dtype=float)
    if spec.family == "group":
        return _block_prox_grad(z, spec, Q, v, tol, max_sweeps)
    csr = Q.csr if hasattr(Q, "csr") else _csr_of(Q)
    lam = spec.lam if spec.family == "lasso" else 0.0
    return _structured_lasso(csr, z, v, float(lam), bool(spec.nonnegative), tol, max_sweeps)


# Coordinate descent crawls along the near-null directions of graph
# Laplacians, so sweeps run in bursts; between bursts the current support
# and signs are tried as an exact solve, accepted if sign-consistent and
# KKT-feasible everywhere.
SWEEP_BURST = 10


def _structured_lasso(csr, z, v, lam, nonneg, tol, max_sweeps):
    indptr = csr.indptr.astype(np.int64)
    indices = csr.indices.astype(np.int64)
    diag = csr.diagonal()
    Qz = csr @ z
    done = 0
    while done < max_sweeps:
        burst = min(SWEEP_BURST, max_sweeps - done)
        v, sweeps = _cd.cd_lasso_csr(indptr, indices, csr.data, diag, z, v, lam, nonneg, float(tol), burst)
        done += sweeps
        if sweeps < burst:
            return v
        exact = _support_solve(csr, Qz, z, v, lam, nonneg)
        if exact is not None:
            return exact
    return v


def _support_solve(csr, Qz, z, v, lam, nonneg):
    S = np.flatnonzero(v)
    if S.size == 0:
        return None
    sgn = np.sign(v[S])
    xS = _spd_solve(csr[S][:, S], Qz[S] - lam * sgn)
    if xS is None:
        return None
    if not np.all(np.isfinite(xS)) or np.any(xS * sgn <= 0):
        return None
    x = np.zeros_like(v)
    x[S] = xS
    g = csr @ (x - z)
    slack = 1e-9 * max(1.0, lam, float(np.abs(Qz).max()))
    off = np.ones(v.size, dtype=bool)
    off[S] = False
    if nonneg:
        ok = np.all(g[off] >= -lam - slack)
    else:
        ok = np.all(np.abs(g[off]) <= lam + slack)
    if not ok or np.abs(g[S] + lam * sgn).max() > slack:
        return None
    return x


def _spd_solve(A, b):
    """Solve A x = b for sparse symmetric A, banded Cholesky when A is narrow."""
    coo = A.tocoo()
    m = A.shape[0]
    width = int(np.abs(coo.row - coo.col).max()) if coo.nnz else 0
    try:
        if width < m // 4:
            ab = np.zeros((width + 1, m))
            keep = coo.col >= coo.row
            ab[width + coo.row[keep] - coo.col[keep], coo.col[keep]] = coo.data[keep]
            return solveh_banded(ab, b)
        return np.linalg.solve(A.toarray(), b)
    except np.linalg.LinAlgError:
        return None


def _csr_of(Q):
    import scipy.sparse as sp

    return sp.csr_matrix(np.asarray(getattr(Q, "matrix", Q), dtype=float))


def _block_prox_grad(z, spec, Q, v, tol, max_sweeps):
    Qm = np.asarray(getattr(Q, "matrix", Q), dtype=float)
    lips = [max(np.linalg.eigvalsh(Qm[np.ix_(g, g)])[-1], 0.0) for g in spec.groups]
    g_full = Qm @ (v - z)
    for _ in range(max_sweeps):
        max_delta = 0.0
        for g, L in zip(spec.groups, lips):
            if L <= 0.0:
                new = np.zeros(len(g)) if spec.lam > 0 else z[g].copy()
            else:
                w = v[g] - g_full[g] / L
                if spec.nonnegative:
                    w = np.maximum(w, 0.0)
                new = group_shrink(w, (np.arange(len(g)),), spec.lam / L)
            delta = new - v[g]
            if np.any(delta):
                g_full += Qm[:, g] @ delta
                v[g] = new
                max_delta = max(max_delta, np.abs(delta).max())
        if max_delta <= tol * max(1.0, np.abs(v).max()):
            break
    return v


def update_v(M, u, spec, Q=None, start=None, tol=1e-10):
    """Normalized penalized regression update; returns ``(v, v_hat)``.

    v = v_hat / ||v_hat||_Q, or the zero vector when v_hat vanishes.
    """
    z = _as_2d(M) @ np.asarray(u, dtype=float)
    vhat = penalized_regression(z, spec, Q, start=start, tol=tol)
    norm = q_norm(vhat, Q)
    if norm <= 0.0 or not np.any(vhat):
        return np.zeros_like(vhat), vhat
    return vhat / norm, vhat


def objective(M, u, v, spec, Q=None):
    """v'QMu - lam P(v)."""
    A = _as_2d(M)
    v = np.asarray(v, dtype=float)
    return float(qapply(Q, v) @ (A @ np.asarray(u, dtype=float)) - spec.lam * spec.value(v))


def _svd_init(A):
    U, s, Vt = np.linalg.svd(A, full_matrices=False)
    return U[:, 0], Vt[0]


def _flip_needed(v):
    return v[int(np.argmax(np.abs(v)))] < 0


def solve_single_factor(M, spec=None, Q=None, opts=None, warm=None):
    """Alternating maximization from the leading singular pair of M.

    `warm` may carry a previous :class:`FactorResult` (e.g. from the next
    larger lambda on a path) whose u seeds the iteration.
    """
    spec = PenaltySpec("none") if spec is None else spec
    opts = SolverOptions() if opts is None else opts
    A = _as_2d(M)
    if not np.any(A):
        raise ZeroMatrix("cross-product matrix is zero")
    spec.check(A.shape[0])

    if opts.init == "given" and opts.u0 is not None:
        starts = [np.asarray(opts.u0, dtype=float)]
    elif warm is not None and not warm.degenerate:
        starts = [warm.u]
    else:
        _, u_svd = _svd_init(A)
        starts = [u_svd]
        if spec.nonnegative:
            # Non-negativity breaks the joint sign symmetry.
            starts.append(-u_svd)

    best = None
    for u0 in starts:
        res = _alternate(A, spec, Q, opts, u0 / np.linalg.norm(u0))
        if best is None or res.value > best.value + 1e-12 * max(1.0, abs(best.value)):
            best = res
    return best


def _alternate(A, spec, Q, opts, u, restarted=False):
    v, vhat = update_v(A, u, spec, Q, tol=opts.inner_tol)
    trace = [objective(A, u, v, spec, Q)]
    res = FactorResult(u, v, vhat, trace, lam=spec.lam, restarted=restarted)
    if not np.any(v):
        res.degenerate = True
        res.converged = True
        return res
    for it in range(1, opts.max_iter + 1):
        try:
            u_new = update_u(A, v, Q)
        except DegenerateDirection:
            if restarted:
                res.degenerate = True
                return res
            rng = np.random.default_rng(opts.seed)
            _, u0 = _svd_init(A)
            u0 = u0 + 1e-3 * rng.standard_normal(u0.shape)
            return _alternate(A, spec, Q, opts, u0 / np.linalg.norm(u0), restarted=True)
        v_new, vhat = update_v(A, u_new, spec, Q, start=vhat, tol=opts.inner_tol)
        f = objective(A, u_new, v_new, spec, Q)
        trace.append(f)
        du = np.linalg.norm(u_new - u)
        u, v = u_new, v_new
        res.iterations = it
        if not np.any(v):
            res.u, res.v, res.vhat = u, v, vhat
            res.degenerate = True
            res.converged = True
            return res
        rel = abs(f - trace[-2]) / max(abs(f), 1e-300)
        if rel < opts.tol and du < opts.step_tol:
            res.converged = True
            break
    if not spec.nonnegative and _flip_needed(v):
        u, v, vhat = -u, -v, -vhat
    res.u, res.v, res.vhat = u, v, vhat
    return res
