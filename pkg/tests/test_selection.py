import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import lasso_cd_naive, soft
from rpls.errors import AllDegenerate, NonOrthogonalFactors, TooFewSamples
from rpls.linalg import standardize
from rpls.penalties import PenaltySpec, lambda_grid, lambda_max
from rpls.selection import (
    BicSelector,
    bic_select_lambda,
    bic_value,
    cross_validate,
    fold_indices,
    lasso_cd,
    select_k_sparse,
)
from rpls.solver import solve_single_factor

LASSO = PenaltySpec("lasso")
seeds = st.integers(0, 2**31 - 1)


def _orthonormal(rng, n, K):
    return np.linalg.qr(rng.standard_normal((n, K)))[0]


def test_singleton_zero_grid(rng):
    M = rng.standard_normal((6, 2))
    out = bic_select_lambda(M, LASSO, [0.0])
    assert out.lam == 0.0 and out.df[0] == 6


def test_all_degenerate(rng):
    M = rng.standard_normal((6, 2))
    lmax = lambda_max(M, LASSO)
    with pytest.raises(AllDegenerate):
        bic_select_lambda(M, LASSO, [2 * lmax, 1.5 * lmax])


def test_planted_support_matches_exhaustive_bic():
    rng = np.random.default_rng(11)
    p, q = 20, 3
    M = 0.05 * rng.standard_normal((p, q))
    M[0] += 5.0 * np.array([0.6, 0.0, 0.8])
    grid = lambda_grid(lambda_max(M, LASSO), 25, 1e-5).values
    out = bic_select_lambda(M, LASSO, grid)
    direct = []
    for lam in grid:
        res = solve_single_factor(M, LASSO.with_lambda(lam))
        direct.append(np.inf if res.degenerate else bic_value(M, res, LASSO.with_lambda(lam)))
    assert out.chosen == int(np.argmin(direct))
    np.testing.assert_allclose(out.bic, direct, rtol=1e-8)
    np.testing.assert_array_equal(np.flatnonzero(out.result.v), [0])


def test_bic_ties_go_to_larger_lambda(rng):
    M = rng.standard_normal((6, 2))
    # ascending input is sorted descending; equal BIC keeps the first, larger lambda
    out = bic_select_lambda(M, LASSO, [0.1, 0.3, 0.3])
    assert list(out.lambdas) == [0.3, 0.3, 0.1]
    assert out.bic[0] == pytest.approx(out.bic[1], abs=1e-9)
    assert out.chosen != 1


def test_selector_rows_and_grid(rng):
    M = rng.standard_normal((10, 3))
    sel = BicSelector(LASSO, count=7)
    spec, res, report = sel(M)
    assert len(report.rows()) == 7
    assert report.lambdas[0] == pytest.approx(lambda_max(M, LASSO))
    assert spec.lam == report.lam


def test_warm_start_path_matches_cold_q1(rng):
    m = rng.standard_normal((15, 1))
    grid = lambda_grid(lambda_max(m, LASSO), 25, 1e-5).values
    out = bic_select_lambda(m, LASSO, grid)
    for lam, warm in zip(grid, out.results):
        cold = solve_single_factor(m, LASSO.with_lambda(lam))
        assert warm.value == pytest.approx(cold.value, abs=1e-6)


def test_warm_start_path_matches_cold_multi(rng):
    M = rng.standard_normal((15, 3))
    grid = lambda_grid(lambda_max(M, LASSO), 10, 1e-3).values
    out = bic_select_lambda(M, LASSO, grid)
    for lam, warm in zip(grid, out.results):
        cold = solve_single_factor(M, LASSO.with_lambda(lam))
        # a warm start can only settle at an equal or better local optimum
        assert warm.value >= cold.value - 1e-6 or warm.degenerate


# post-selection of K ------------------------------------------------------

def test_gamma_zero_is_least_squares(rng):
    Z = _orthonormal(rng, 30, 5) * rng.uniform(1, 3, 5)
    Y = rng.standard_normal((30, 2))
    sel = select_k_sparse(Z, Y, gammas=[0.0])
    np.testing.assert_allclose(sel.B, np.linalg.lstsq(Z, Y, rcond=None)[0], atol=1e-12)
    assert sel.K == 5


def test_large_gamma_is_degenerate(rng):
    Z = _orthonormal(rng, 30, 4)
    Y = rng.standard_normal((30, 1))
    top = np.abs(Z.T @ Y).max()
    sel = select_k_sparse(Z, Y, gammas=[top * 1.01])
    assert sel.K == 0 and sel.degenerate


@settings(max_examples=20)
@given(seeds)
def test_closed_form_matches_cd_lasso(seed):
    rng = np.random.default_rng(seed)
    Z = _orthonormal(rng, 25, 4)
    y = rng.standard_normal(25)
    ZtY = Z.T @ y
    gammas = np.abs(ZtY).max() * np.array([0.9, 0.5, 0.2, 0.0])
    sel = select_k_sparse(Z, y, gammas=gammas)
    for g, beta in zip(sel.gammas, sel.coefs):
        np.testing.assert_allclose(beta[:, 0], lasso_cd_naive(Z, y, g), atol=1e-8)
        np.testing.assert_allclose(beta[:, 0], soft(ZtY, g), atol=1e-12)


def test_bic_formula_for_gamma(rng):
    Z = _orthonormal(rng, 20, 3)
    Y = rng.standard_normal((20, 2))
    sel = select_k_sparse(Z, Y, count=5)
    N = Y.size
    for g, beta, b in zip(sel.gammas, sel.coefs, sel.bic):
        rss = np.sum((Y - Z @ beta) ** 2)
        assert b == pytest.approx(N * np.log(rss / N) + np.log(N) * np.count_nonzero(beta))
    assert sel.chosen == int(np.argmin(sel.bic))


def test_non_orthogonal_factors(rng):
    Z = rng.standard_normal((20, 3))
    y = rng.standard_normal(20)
    with pytest.raises(NonOrthogonalFactors):
        select_k_sparse(Z, y)
    sel = select_k_sparse(Z, y, gammas=[0.5], strict=False)
    assert sel.method == "coordinate-descent"
    Zn = Z / np.linalg.norm(Z, axis=0)
    np.testing.assert_allclose(sel.beta[:, 0], lasso_cd_naive(Zn, y, 0.5), atol=1e-8)


@given(seeds, st.floats(0.0, 5.0))
def test_lasso_cd_matches_naive(seed, gamma):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((15, 6))
    y = rng.standard_normal(15)
    np.testing.assert_allclose(lasso_cd(X, y, gamma), lasso_cd_naive(X, y, gamma), atol=1e-8)


# cross-validation ---------------------------------------------------------

def test_loo_folds():
    folds = fold_indices(3, "loo")
    assert [f.tolist() for f in folds] == [[0], [1], [2]]


def test_fold_determinism_and_partition():
    a, b = fold_indices(23, 10, seed=5), fold_indices(23, 10, seed=5)
    assert all(np.array_equal(x, y) for x, y in zip(a, b))
    assert sorted(np.concatenate(a).tolist()) == list(range(23))
    assert len(a) == 10
    with pytest.raises(TooFewSamples):
        fold_indices(5, 10)
    with pytest.raises(TooFewSamples):
        fold_indices(5, 1)


def test_constant_model_cv_by_hand():
    X = np.arange(4.0)[:, None]
    y = np.array([1.0, 2.0, 4.0, 7.0])

    def mean_model(train, X_test):
        return {"mean": np.full((X_test.shape[0], 1), train.y_mean[0])}

    out = cross_validate(mean_model, X, y, folds="loo")
    # leave-one-out mean of the rest, squared error per held-out point
    errs = [(y[i] - (y.sum() - y[i]) / 3) ** 2 for i in range(4)]
    assert out.mean[0] == pytest.approx(np.mean(errs))
    assert out.se[0] == pytest.approx(np.std(errs, ddof=1) / 2)


def test_standardization_is_refit_per_fold():
    rng = np.random.default_rng(0)
    X = rng.standard_normal((10, 2))
    X[9] = 1e6
    y = rng.standard_normal(10)
    seen = []

    def spy(train, X_test):
        seen.append((train.x_mean.copy(), train.n))
        return {"m": np.zeros((X_test.shape[0], 1))}

    folds = fold_indices(10, 5, seed=1)
    cross_validate(spy, X, y, folds=5, seed=1)
    for (mean, n), te in zip(seen, folds):
        tr = np.setdiff1d(np.arange(10), te)
        np.testing.assert_allclose(mean, X[tr].mean(axis=0))
        assert n == 8
        if 9 in te:
            assert np.abs(mean).max() < 10


def test_cv_selects_sensible_lambda():
    rng = np.random.default_rng(4)
    X = rng.standard_normal((60, 10))
    y = X[:, 0] * 3 + rng.standard_normal(60)
    from rpls.pipeline import fit, transform

    def proc(train, X_test):
        out = {}
        for lam in (50.0, 1.0):
            m = fit(train, 1, PenaltySpec("lasso", lam))
            B = np.linalg.lstsq(m.Z, train.Y, rcond=None)[0]
            out[lam] = transform(m, X_test) @ B * train.y_scale + train.y_mean
        return out

    res = cross_validate(proc, X, y, folds=5)
    # lambda = 50 keeps only the true predictor; lambda = 1 lets the noise in
    assert res.best == 50.0
    assert standardize(X, y).n == 60
