"""Simulation designs and the Monte-Carlo harness for the regression studies.

Two designs: a univariate response driven by three hidden Gaussian factors
with 75% of the predictors relevant, and a multivariate (q = 10) response
driven by eight binary hidden factors. Each scenario compares PLS
(lambda = 0), RPLS with lasso loadings, and a plain lasso baseline.
"""
from __future__ import annotations

import logging
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import _cd
from .errors import BadShape, DegenerateFactor, NotConvergedWarning
from .linalg import standardize
from .penalties import PenaltySpec, lambda_grid
from .pipeline import fit, transform
from .prediction import mspe, tpr_fpr
from .selection import BicSelector, cross_validate, select_k_sparse

log = logging.getLogger(__name__)

HIDDEN_VAR = 25.0
# Variance of 3 H1 - 4 H2; the response noise is this over the SNR.
SIGNAL_VAR = (3.0**2 + 4.0**2) * HIDDEN_VAR


def substreams(seed, count):
    """Independent Philox generators, one per replicate."""
    children = np.random.SeedSequence(seed).spawn(count)
    return [np.random.Generator(np.random.Philox(c)) for c in children]


def make_rng(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


def _univariate_draw(rng, n, p, snr):
    H = rng.normal(0.0, np.sqrt(HIDDEN_VAR), size=(n, 3))
    b1, b2 = 3 * p // 8, 3 * p // 4
    which = np.empty(p, dtype=int)
    which[:b1], which[b1:b2], which[b2:] = 0, 1, 2
    X = H[:, which] + rng.standard_normal((n, p))
    f = rng.normal(0.0, np.sqrt(SIGNAL_VAR / snr), size=n)
    Y = (3 * H[:, 0] - 4 * H[:, 1] + f)[:, None]
    return X, Y


def gen_univariate(n, p, snr, seed, n_test=None):
    """Correlated-predictor design with one response.

    Columns 1..3p/8 load on H1, 3p/8+1..3p/4 on H2 and the rest on H3,
    each plus N(0, 1) noise, with H_i ~ N(0, 25). Y = 3 H1 - 4 H2 + f and
    Var(f) = Var(3 H1 - 4 H2) / snr, so snr is a variance ratio. Training
    and test sets are independent draws. Returns
    ``(X_train, Y_train, X_test, Y_test, truth_support)``.
    """
    if p % 8 != 0 or p < 8:
        raise BadShape(f"p must be a positive multiple of 8, got {p}")
    if n < 2:
        raise BadShape("n must be >= 2")
    if not snr > 0:
        raise BadShape("snr must be positive")
    rng = make_rng(seed)
    Xtr, Ytr = _univariate_draw(rng, n, p, snr)
    Xte, Yte = _univariate_draw(rng, n if n_test is None else n_test, p, snr)
    return Xtr, Ytr, Xte, Yte, np.arange(3 * p // 4)


def gen_multivariate(n, p, q, p_true, snr, seed, n_test=None):
    """Binary-hidden-factor design with q responses.

    H (n x 8) is Bernoulli(0.5); A (8 x p) is standard normal on the first
    p_true columns and zero elsewhere; X = HA + E with E ~ N(0, 0.1^2);
    B (8 x q) ~ N(0, snr n q / tr(HH')); Y = HB + F with F standard normal.
    A and B are shared by the training and test sets.
    """
    if not 1 <= p_true <= p or q < 1 or n < 2:
        raise BadShape(f"bad shape n={n}, p={p}, q={q}, p_true={p_true}")
    if not snr > 0:
        raise BadShape("snr must be positive")
    rng = make_rng(seed)
    H = rng.binomial(1, 0.5, size=(n, 8)).astype(float)
    A = np.zeros((8, p))
    A[:, :p_true] = rng.standard_normal((8, p_true))
    tr = float(np.trace(H @ H.T))
    B = rng.normal(0.0, np.sqrt(snr * n * q / tr), size=(8, q))

    def draw(H):
        X = H @ A + rng.normal(0.0, 0.1, size=(H.shape[0], p))
        Y = H @ B + rng.standard_normal((H.shape[0], q))
        return X, Y

    Xtr, Ytr = draw(H)
    Hte = rng.binomial(1, 0.5, size=(n if n_test is None else n_test, 8)).astype(float)
    Xte, Yte = draw(Hte)
    return Xtr, Ytr, Xte, Yte, np.arange(p_true)


def oracle_lasso(X, Y, lam, beta=None, tol=1e-10, max_sweeps=100_000):
    """Coordinate-descent lasso: argmin (1/2n)||Y - X b||^2 + lam ||b||_1.

    Returns a p x q coefficient matrix, one independent lasso per response
    column. Emits NotConvergedWarning if the sweep cap is hit.
    """
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    Y = Y[:, None] if Y.ndim == 1 else Y
    n, p = X.shape
    G = X.T @ X / n
    C = X.T @ Y / n
    out = np.zeros((p, Y.shape[1])) if beta is None else np.array(beta, dtype=float).reshape(p, -1)
    for j in range(Y.shape[1]):
        b, _, ok = _cd.cd_lasso_gram(G, C[:, j].copy(), float(lam), out[:, j].copy(), tol, max_sweeps)
        if not ok:
            warnings.warn(f"lasso did not converge at lambda={lam:.3g}", NotConvergedWarning, stacklevel=2)
        out[:, j] = b
    return out


def gen_spectra_demo(seed=0, n_per_class=(6, 6, 5, 5, 5), p=600, ppm=(0.5, 4.5), noise=0.02):
    """Synthetic classed NMR-like spectra (27 samples, 5 classes by default).

    Each class has 3-5 Gaussian peaks at its own positions on a ppm axis on
    top of a shared baseline of broad peaks; samples get multiplicative
    intensity jitter plus small nonnegative noise. Returns a dict with
    ``X``, ``labels``, ``positions`` and ``peaks`` (class -> peak indices).
    """
    rng = make_rng(seed)
    positions = np.linspace(ppm[0], ppm[1], p)
    width = 0.02
    n_classes = len(n_per_class)

    def bump(center, w):
        return np.exp(-0.5 * ((positions - center) / w) ** 2)

    baseline = sum(bump(c, 0.15) * a for c, a in zip(rng.uniform(*ppm, 6), rng.uniform(0.2, 0.5, 6)))
    margin = int(0.05 * p)
    free = np.arange(margin, p - margin)
    # Peaks keep at least two widths apart so class signatures do not merge.
    gap = max(1, int(np.ceil(2 * width / (positions[1] - positions[0]))))
    peaks, taken = {}, np.zeros(p, dtype=bool)
    for g in range(n_classes):
        k = int(rng.integers(3, 6))
        chosen = []
        for _ in range(100 * p):
            if len(chosen) == k:
                break
            i = int(rng.choice(free))
            lo, hi = max(0, i - gap), min(p, i + gap + 1)
            if taken[lo:hi].any():
                continue
            taken[lo:hi] = True
            chosen.append(i)
        if len(chosen) < k:
            raise BadShape(f"cannot place {k} separated peaks on {p} positions")
        peaks[g] = np.sort(np.array(chosen))
    X, labels = [], []
    for g, n_g in enumerate(n_per_class):
        signature = sum(bump(positions[i], width) * rng.uniform(0.6, 1.0) for i in peaks[g])
        for _ in range(n_g):
            s = baseline * rng.uniform(0.9, 1.1) + signature * rng.uniform(0.8, 1.2)
            s = s + np.abs(rng.normal(0.0, noise, p))
            X.append(s)
            labels.append(g)
    return {
        "X": np.vstack(X),
        "labels": np.asarray(labels),
        "positions": positions,
        "peaks": peaks,
        "noise": noise,
    }


@dataclass
class SimConfig:
    scenario: str
    design: str  # "univariate" | "multivariate"
    n: int
    p: int
    snr: float
    q: int = 1
    p_true: int | None = None
    replicates: int = 30
    seed: int = 0
    methods: tuple = ("pls", "rpls", "lasso")
    grid_size: int = 25
    grid_floor: float = 1e-5
    cv_folds: int = 10
    selection: str = "cv"  # "cv" (univariate protocol) | "bic" (multivariate)
    k_max: int = 10
    threads: int = 1

    def __post_init__(self):
        if self.n < 2 or self.p < 2:
            raise BadShape("n and p must be >= 2")
        if self.replicates < 1:
            raise BadShape("replicates must be >= 1")
        if not self.snr > 0:
            raise BadShape("snr must be positive")
        if self.design not in ("univariate", "multivariate"):
            raise ValueError(f"unknown design {self.design!r}")
        if self.selection not in ("cv", "bic"):
            raise ValueError(f"unknown selection {self.selection!r}")


def _scenarios():
    out = {}
    for i, (n, p, snr) in enumerate([(400, 40, 10), (400, 40, 5), (40, 80, 10), (40, 80, 5)], 1):
        out[f"u{i}"] = SimConfig(f"u{i}", "univariate", n, p, snr, selection="cv")
    for i, (n, p, pt, snr) in enumerate([(400, 40, 5, 2), (400, 40, 5, 1), (40, 80, 10, 2), (40, 80, 10, 1)], 1):
        out[f"m{i}"] = SimConfig(
            f"m{i}", "multivariate", n, p, snr, q=10, p_true=pt, selection="bic", methods=("pls", "rpls")
        )
    out["smoke"] = SimConfig("smoke", "univariate", 20, 8, 10, replicates=1, cv_folds=5, grid_size=8, k_max=3)
    return out


SCENARIOS = _scenarios()


def scenario(name, **overrides):
    if name not in SCENARIOS:
        raise KeyError(f"unknown scenario {name!r}; choose from {sorted(SCENARIOS)}")
    base = asdict(SCENARIOS[name])
    base.update({k: v for k, v in overrides.items() if v is not None})
    return SimConfig(**base)


# --------------------------------------------------------------------------
# per-method fitting


def _log_grid(M, count, floor):
    top = float(np.abs(M).max())
    return lambda_grid(top, count, min(floor, 0.5 * top)).values


def _path_models(train, lams, k_max):
    """RPLS fits with a common lasso lambda per grid point (None if degenerate)."""
    K = min(k_max, train.n - 1, train.p)
    models = []
    for lam in lams:
        try:
            models.append(fit(train, K, PenaltySpec("lasso", lam)))
        except DegenerateFactor:
            models.append(None)
    return models


def _factor_predict(model, sel_coef, scales, X_new):
    Z = transform(model, X_new)
    return (Z @ (sel_coef / scales[:, None])) * model.y_scale + model.y_mean


def _rpls_cv_procedure(lams, gammas, k_max):
    def procedure(train, X_test):
        preds = {}
        for lam, model in zip(lams, _path_models(train, lams, k_max)):
            if model is None:
                for g in gammas:
                    preds[(lam, g)] = np.repeat(train.y_mean[None, :], X_test.shape[0], axis=0)
                continue
            ks = select_k_sparse(model.Z, train.Y, gammas, strict=False)
            for g, beta in zip(ks.gammas, ks.coefs):
                preds[(lam, g)] = _factor_predict(model, beta, ks.scales, X_test)
        return preds

    return procedure


@dataclass
class MethodResult:
    mspe: float
    tpr: float = float("nan")
    fpr: float = float("nan")
    K: int = 0
    lam: float = float("nan")
    gamma: float = float("nan")


def _used_support(model, beta):
    if model is None:
        return np.zeros(0, dtype=int)
    used = np.any(beta != 0, axis=1)
    return np.flatnonzero(np.any(model.V[:, used] != 0, axis=1))


def _fit_factor_method(cfg, X, Y, Xte, Yte, truth, lams_grid, penalized, rng_seed):
    train = standardize(X, Y, scale_x=True, scale_y=True)
    if cfg.selection == "cv":
        lams = lams_grid if penalized else np.array([0.0])
        gammas = lams_grid
        cv = cross_validate(
            _rpls_cv_procedure(lams, gammas, cfg.k_max), X, Y, cfg.cv_folds, seed=rng_seed, scale_y=True
        )
        lam, gamma = cv.best
        (model,) = _path_models(train, [lam], cfg.k_max)
        if model is None:
            pred = np.repeat(train.y_mean[None, :], Xte.shape[0], axis=0)
            return MethodResult(mspe(pred, Yte), 0.0, 0.0, 0, lam, gamma)
        ks = select_k_sparse(model.Z, train.Y, [gamma], strict=False)
        beta = ks.coefs[0]
    else:
        K = min(cfg.k_max, train.n - 1, train.p)
        selector = BicSelector(PenaltySpec("lasso"), grid=lams_grid) if penalized else PenaltySpec("none")
        model = fit(train, K, selector)
        ks = select_k_sparse(model.Z, train.Y, lams_grid, strict=False)
        beta, lam, gamma = ks.beta, float(np.mean(model.lambdas)), ks.gamma
    pred = _factor_predict(model, beta, ks.scales, Xte)
    tpr, fpr = tpr_fpr(_used_support(model, beta), truth, X.shape[1])
    return MethodResult(mspe(pred, Yte), tpr, fpr, int(np.any(beta != 0, axis=1).sum()), lam, gamma)


def _fit_lasso(cfg, X, Y, Xte, Yte, truth, rng_seed):
    train = standardize(X, Y, scale_x=True, scale_y=True)
    n = train.n
    top = float(np.abs(train.X.T @ train.Y).max()) / n
    lams = lambda_grid(top, cfg.grid_size, min(cfg.grid_floor, 0.5 * top)).values

    def procedure(tr, X_test):
        Xs = tr.transform_x(X_test)
        preds, beta = {}, None
        for lam in lams:
            beta = oracle_lasso(tr.X, tr.Y, lam, beta=beta)
            preds[lam] = tr.inverse_y(Xs @ beta)
        return preds

    cv = cross_validate(procedure, X, Y, cfg.cv_folds, seed=rng_seed, scale_y=True)
    beta = oracle_lasso(train.X, train.Y, cv.best)
    pred = train.inverse_y(train.transform_x(Xte) @ beta)
    support = np.flatnonzero(np.any(beta != 0, axis=1))
    tpr, fpr = tpr_fpr(support, truth, X.shape[1])
    return MethodResult(mspe(pred, Yte), tpr, fpr, int(support.size), float(cv.best))


def run_replicate(cfg, index, rng):
    """All methods on one simulated train/test pair; returns {method: MethodResult}."""
    if cfg.design == "univariate":
        X, Y, Xte, Yte, truth = gen_univariate(cfg.n, cfg.p, cfg.snr, rng)
    else:
        X, Y, Xte, Yte, truth = gen_multivariate(cfg.n, cfg.p, cfg.q, cfg.p_true, cfg.snr, rng)
    cv_seed = int(rng.integers(2**31))
    train = standardize(X, Y, scale_x=True, scale_y=True)
    M = train.X.T @ train.Y
    if cfg.selection == "cv":
        grid = _log_grid(M, cfg.grid_size, cfg.grid_floor)
    else:
        # exp(-5) .. max|X'Y| on the log scale.
        grid = lambda_grid(float(np.abs(M).max()), cfg.grid_size, np.exp(-5.0)).values
    out = {}
    for method in cfg.methods:
        t0 = time.perf_counter()
        if method == "pls":
            out[method] = _fit_factor_method(cfg, X, Y, Xte, Yte, truth, grid, False, cv_seed)
        elif method == "rpls":
            out[method] = _fit_factor_method(cfg, X, Y, Xte, Yte, truth, grid, True, cv_seed)
        elif method == "lasso":
            out[method] = _fit_lasso(cfg, X, Y, Xte, Yte, truth, cv_seed)
        else:
            raise ValueError(f"unknown method {method!r}")
        log.debug("%s rep %d %s: %.2fs", cfg.scenario, index, method, time.perf_counter() - t0)
    return out


@dataclass
class SimMetrics:
    config: SimConfig
    per_replicate: list = field(default_factory=list)
    failures: list = field(default_factory=list)
    seconds: float = 0.0

    def values(self, method, metric):
        return np.array(
            [getattr(r[method], metric) for r in self.per_replicate if r is not None and method in r]
        )

    def summary(self):
        """{method: {metric: (mean, sd)}} with SD taken across replicates."""
        table = {}
        for method in self.config.methods:
            row = {}
            for metric in ("mspe", "tpr", "fpr", "K"):
                vals = self.values(method, metric).astype(float)
                if vals.size == 0 or np.all(np.isnan(vals)):
                    continue
                sd = float(np.std(vals, ddof=1)) if vals.size > 1 else 0.0
                row[metric] = (float(np.mean(vals)), sd)
            table[method] = row
        return table


def run_scenario(config, progress=None):
    """Run every replicate of a scenario; replicate failures are recorded, not raised."""
    streams = substreams(config.seed, config.replicates)
    t0 = time.perf_counter()

    def one(i):
        try:
            return run_replicate(config, i, streams[i]), None
        except Exception as exc:  # noqa: BLE001 - recorded per replicate
            log.warning("replicate %d failed: %s", i, exc)
            return None, f"{i}: {type(exc).__name__}: {exc}"

    if config.threads > 1:
        with ThreadPoolExecutor(config.threads) as pool:
            results = list(pool.map(one, range(config.replicates)))
    else:
        results = []
        for i in range(config.replicates):
            results.append(one(i))
            if progress:
                progress(i)
    return SimMetrics(
        config,
        [r for r, _ in results],
        [e for _, e in results if e is not None],
        time.perf_counter() - t0,
    )
