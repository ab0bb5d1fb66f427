import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import closed_form_q1, path_laplacian, random_psd, sym_sqrt
from rpls.errors import DegenerateDirection, ZeroMatrix
from rpls.operators import validate_psd
from rpls.penalties import PenaltySpec, groups_from_boundaries, lambda_grid, lambda_max
from rpls.solver import SolverOptions, objective, solve_single_factor, update_u, update_v

seeds = st.integers(0, 2**31 - 1)


def lasso(lam, nonneg=False):
    return PenaltySpec("lasso", lam, nonnegative=nonneg)


# update_u ---------------------------------------------------------------

def test_update_u_examples():
    np.testing.assert_allclose(update_u(np.array([[3.0]]), [1.0]), [1.0])
    np.testing.assert_allclose(update_u(np.eye(2), [0.6, 0.8]), [0.6, 0.8])
    with pytest.raises(DegenerateDirection):
        update_u(np.array([[1.0], [-1.0]]), [1.0, 1.0])


def test_update_u_beats_random_unit_vectors(rng):
    M = rng.standard_normal((6, 3))
    v = rng.standard_normal(6)
    u = update_u(M, v)
    assert np.linalg.norm(u) == pytest.approx(1.0, abs=1e-12)
    cand = rng.standard_normal((10_000, 3))
    cand /= np.linalg.norm(cand, axis=1, keepdims=True)
    assert v @ M @ u >= (cand @ (M.T @ v)).max() - 1e-6


# update_v ---------------------------------------------------------------

def test_update_v_examples():
    M = np.array([[3.0], [4.0]])
    v, vhat = update_v(M, [1.0], lasso(1.0))
    np.testing.assert_allclose(vhat, [2.0, 3.0])
    np.testing.assert_allclose(v, np.array([2.0, 3.0]) / np.sqrt(13))
    v, _ = update_v(M, [1.0], PenaltySpec("none"))
    np.testing.assert_allclose(v, [0.6, 0.8])
    v, _ = update_v(M, [1.0], lasso(4.0))
    assert not np.any(v)


def test_update_v_structured_lambda_zero_is_q_normalized(rng):
    Q = random_psd(rng, 5, ridge=0.1)
    M = rng.standard_normal((5, 2))
    u = np.array([0.6, 0.8])
    v, _ = update_v(M, u, PenaltySpec("none"), Q)
    z = M @ u
    np.testing.assert_allclose(v, z / np.sqrt(z @ Q @ z), atol=1e-12)


# objective --------------------------------------------------------------

def test_objective_examples(rng):
    M = rng.standard_normal((5, 3))
    assert objective(M, [1.0, 0, 0], np.zeros(5), lasso(2.0)) == 0.0
    U, s, Vt = np.linalg.svd(M)
    assert objective(M, Vt[0], U[:, 0], PenaltySpec("none")) == pytest.approx(s[0])


def test_objective_matches_loop(rng):
    M = rng.standard_normal((5, 3))
    Q = random_psd(rng, 5)
    u, v, lam = rng.standard_normal(3), rng.standard_normal(5), 0.7
    total = 0.0
    for i in range(5):
        for j in range(5):
            for k in range(3):
                total += v[i] * Q[i, j] * M[j, k] * u[k]
    total -= lam * sum(abs(x) for x in v)
    assert objective(M, u, v, lasso(lam), Q) == pytest.approx(total, rel=1e-12)


# solve_single_factor ----------------------------------------------------

def test_closed_form_example():
    res = solve_single_factor(np.array([[3.0], [-4.0], [1.0]]), lasso(1.0))
    # the sign convention flips (u, v) jointly so the largest |v| is positive
    np.testing.assert_allclose(res.v * res.u[0], np.array([2.0, -3.0, 0.0]) / np.sqrt(13), atol=1e-8)
    assert res.v[1] > 0


def test_zero_matrix_raises():
    with pytest.raises(ZeroMatrix):
        solve_single_factor(np.zeros((3, 2)), lasso(1.0))


def test_q1_matches_closed_form_on_100_instances(rng):
    for _ in range(100):
        p = int(rng.integers(2, 30))
        m = rng.standard_normal(p) * rng.uniform(0.1, 10)
        grid = lambda_grid(lambda_max(m[:, None], lasso(0)), 25, 1e-5).values
        lam = float(rng.choice(grid[1:]))
        res = solve_single_factor(m[:, None], lasso(lam))
        ref = closed_form_q1(m, lam)
        # joint sign: u = +-1 pairs with +-ref
        np.testing.assert_allclose(res.v * res.u[0], ref, atol=1e-8)


def test_q1_global_on_whole_grid(rng):
    m = rng.standard_normal(12)
    for lam in lambda_grid(lambda_max(m[:, None], lasso(0)), 25, 1e-5).values[1:]:
        res = solve_single_factor(m[:, None], lasso(lam))
        np.testing.assert_allclose(res.v * res.u[0], closed_form_q1(m, lam), atol=1e-8)


@given(seeds)
def test_lambda_zero_is_leading_singular_pair(seed):
    rng = np.random.default_rng(seed)
    M = rng.standard_normal((int(rng.integers(2, 9)), int(rng.integers(1, 5))))
    res = solve_single_factor(M, PenaltySpec("none"))
    U, s, Vt = np.linalg.svd(M)
    if s.size > 1 and s[0] - s[1] < 1e-3 * s[0]:
        return
    assert res.value == pytest.approx(s[0], rel=1e-9)
    sign = np.sign(res.v @ U[:, 0])
    np.testing.assert_allclose(res.v, sign * U[:, 0], atol=1e-6)
    np.testing.assert_allclose(res.u, sign * Vt[0], atol=1e-6)
    assert res.v[np.argmax(np.abs(res.v))] > 0


def test_beats_random_feasible_pairs(rng):
    M = rng.standard_normal((8, 2))
    lam = 0.5 * lambda_max(M, lasso(0))
    spec = lasso(lam)
    res = solve_single_factor(M, spec)
    best = -np.inf
    for _ in range(1000):
        u = rng.standard_normal(2)
        u /= np.linalg.norm(u)
        v = rng.standard_normal(8) * (rng.random(8) < 0.5)
        nv = np.linalg.norm(v)
        v = v / nv * rng.uniform(0, 1) if nv else v
        best = max(best, objective(M, u, v, spec))
    assert res.value >= best


def _check_ascent(res):
    assert np.all(np.diff(res.objective) >= -1e-10)


def _kkt_residual(M, res, lam):
    """Stationarity residual of the v-block and of the u-block."""
    z = M @ res.u
    S = res.v != 0
    scale = np.linalg.norm(res.vhat)
    r_on = np.abs(z[S] - lam * np.sign(res.v[S]) - scale * res.v[S])
    r_off = np.clip(np.abs(z[~S]) - lam, 0.0, None)
    w = M.T @ res.v
    r_u = np.abs(w - np.linalg.norm(w) * res.u)
    return max(r_on.max(initial=0), r_off.max(initial=0), r_u.max())


@settings(max_examples=30)
@given(seeds, st.floats(0.05, 0.95))
def test_invariants_lasso(seed, frac):
    rng = np.random.default_rng(seed)
    M = rng.standard_normal((int(rng.integers(3, 15)), int(rng.integers(1, 4))))
    lam = frac * lambda_max(M, lasso(0))
    res = solve_single_factor(M, lasso(lam))
    _check_ascent(res)
    if res.degenerate:
        return
    assert np.linalg.norm(res.u) == pytest.approx(1.0, abs=1e-10)
    assert res.v @ res.v <= 1 + 1e-10
    if res.converged:
        assert _kkt_residual(M, res, lam) <= 1e-6


@settings(max_examples=30)
@given(seeds, st.floats(0.0, 0.9))
def test_nonnegative_loadings_exactly_nonnegative(seed, frac):
    rng = np.random.default_rng(seed)
    M = rng.standard_normal((10, 3))
    lam = frac * lambda_max(M, lasso(0, True))
    res = solve_single_factor(M, lasso(lam, True))
    assert np.all(res.v >= 0)
    _check_ascent(res)
    Q = validate_psd(path_laplacian(10) + 0.1 * np.eye(10))
    res = solve_single_factor(M, lasso(lam, True), Q)
    assert np.all(res.v >= 0)
    _check_ascent(res)


@settings(max_examples=30)
@given(seeds, st.floats(0.05, 0.9))
def test_structured_ascent_and_norm(seed, frac):
    rng = np.random.default_rng(seed)
    p = int(rng.integers(3, 12))
    M = rng.standard_normal((p, 2))
    Q = validate_psd(random_psd(rng, p, ridge=0.05))
    lam = frac * lambda_max(M, lasso(0))
    res = solve_single_factor(M, lasso(lam), Q)
    _check_ascent(res)
    if not res.degenerate:
        assert res.v @ Q.matrix @ res.v <= 1 + 1e-10


@settings(max_examples=25)
@given(seeds, st.floats(0.0, 0.9), st.sampled_from(["none", "lasso", "group"]))
def test_identity_operator_matches_unstructured(seed, frac, family):
    rng = np.random.default_rng(seed)
    M = rng.standard_normal((8, 3))
    groups = groups_from_boundaries([0, 3, 5], 8) if family == "group" else None
    spec = PenaltySpec(family, 0.0, groups=groups)
    lam = frac * lambda_max(M, spec) if family != "none" else 0.0
    spec = spec.with_lambda(lam)
    a = solve_single_factor(M, spec)
    b = solve_single_factor(M, spec, np.eye(8))
    assert a.degenerate == b.degenerate
    np.testing.assert_allclose(b.v, a.v, atol=1e-10)
    np.testing.assert_allclose(b.u, a.u, atol=1e-10)


@given(seeds)
def test_square_root_equivalence(seed):
    rng = np.random.default_rng(seed)
    p = int(rng.integers(2, 11))
    M = rng.standard_normal((p, int(rng.integers(1, 4))))
    Q = random_psd(rng, p, ridge=0.2)
    root = sym_sqrt(Q)
    Mt = root @ M
    s = np.linalg.svd(Mt, compute_uv=False)
    if s.size > 1 and s[0] - s[1] < 1e-3 * s[0]:
        return
    # both fixed points are reached to well below the compared tolerance
    tight = SolverOptions(tol=1e-14, step_tol=1e-12, max_iter=5000)
    structured = solve_single_factor(M, PenaltySpec("none"), validate_psd(Q), tight)
    plain = solve_single_factor(Mt, PenaltySpec("none"), opts=tight)
    v = np.linalg.pinv(root) @ plain.v
    sign = np.sign(v @ Q @ structured.v)
    np.testing.assert_allclose(structured.v, sign * v, atol=1e-8)


def test_group_lasso_structured_runs(rng):
    M = rng.standard_normal((9, 2))
    g = groups_from_boundaries([0, 3, 6], 9)
    spec = PenaltySpec("group", 0.5 * lambda_max(M, PenaltySpec("group", groups=g)), groups=g)
    res = solve_single_factor(M, spec, validate_psd(path_laplacian(9) + np.eye(9)))
    _check_ascent(res)
    for grp in g:
        blk = res.v[grp]
        assert np.all(blk == 0) or np.all(blk != 0)


def test_given_initialization_and_warm_start(rng):
    M = rng.standard_normal((7, 2))
    base = solve_single_factor(M, lasso(0.2))
    opts = SolverOptions(init="given", u0=base.u)
    again = solve_single_factor(M, lasso(0.2), opts=opts)
    np.testing.assert_allclose(again.v, base.v, atol=1e-9)
    warm = solve_single_factor(M, lasso(0.1), warm=base)
    cold = solve_single_factor(M, lasso(0.1))
    assert warm.value == pytest.approx(cold.value, rel=1e-8)


def test_options_validation():
    with pytest.raises(ValueError):
        SolverOptions(tol=0)
    with pytest.raises(ValueError):
        SolverOptions(max_iter=0)
