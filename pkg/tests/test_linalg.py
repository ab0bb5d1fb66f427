import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from oracles import naive_cross_product, path_laplacian
from rpls.errors import DegenerateColumnWarning, DegenerateFactor, DimensionMismatch, NegativeQuadraticForm
from rpls.linalg import ProjectionState, cross_product, project_out, q_norm, standardize
from rpls.operators import validate_psd


def test_two_point_standardization():
    d = standardize([[1.0], [3.0]], [[0.0], [1.0]])
    np.testing.assert_allclose(d.X, [[-1 / np.sqrt(2)], [1 / np.sqrt(2)]], atol=1e-12)
    np.testing.assert_allclose(d.x_scale, [np.sqrt(2)])


def test_constant_column_is_flagged_not_divided():
    with pytest.warns(DegenerateColumnWarning):
        d = standardize([[5.0, 1.0], [5.0, 2.0]], [[1.0], [2.0]])
    np.testing.assert_array_equal(d.X[:, 0], [0.0, 0.0])
    assert d.degenerate.tolist() == [True, False]


def test_response_is_centered_only():
    d = standardize([[1.0], [2.0], [4.0]], [[2.0], [4.0], [6.0]])
    np.testing.assert_allclose(d.Y, [[-2.0], [0.0], [2.0]])


def test_row_count_mismatch():
    with pytest.raises(DimensionMismatch):
        standardize(np.ones((3, 2)), np.ones((4, 1)))


finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


@given(arrays(np.float64, st.tuples(st.integers(2, 12), st.integers(1, 5)), elements=finite))
def test_standardize_invariants(X):
    Y = X[:, :1] * 2.0 + 1.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        d = standardize(X, Y)
    assert np.all(np.abs(d.X.mean(axis=0)) <= 1e-10 * np.maximum(1.0, np.abs(X).max()))
    live = ~d.degenerate
    if live.any():
        np.testing.assert_allclose(d.X[:, live].std(axis=0, ddof=1), 1.0, atol=1e-8)
    np.testing.assert_allclose(d.inverse_x(d.X), X, atol=1e-9 * max(1.0, np.abs(X).max()))


def test_cross_product_examples(rng):
    M = cross_product(np.eye(2), np.array([[1.0], [2.0]]))
    np.testing.assert_array_equal(M.M, [[1.0], [2.0]])
    M = cross_product(np.array([[1.0, 0.0], [-1.0, 0.0]]), np.array([[1.0], [-1.0]]))
    np.testing.assert_array_equal(M.M, [[2.0], [0.0]])
    X, Y = rng.standard_normal((6, 4)), rng.standard_normal((6, 2))
    M = cross_product(X, Y)
    assert M.level == 0
    np.testing.assert_allclose(M.M, naive_cross_product(X, Y), atol=1e-12)


def test_q_norm_examples():
    L = path_laplacian(2)
    assert q_norm([3.0, 4.0]) == pytest.approx(5.0)
    assert q_norm([1.0, -1.0], L) == pytest.approx(2.0)
    assert q_norm([1.0, 1.0], L) == 0.0


def test_q_norm_rejects_indefinite():
    with pytest.raises(NegativeQuadraticForm):
        q_norm([1.0, -1.0], np.array([[1.0, 2.0], [2.0, 1.0]]))


def test_q_norm_clamps_roundoff():
    Q = np.array([[1.0, 0.0], [0.0, -1e-12]])
    assert q_norm([0.0, 1.0], Q) == 0.0


def test_projection_removes_weight_directions(rng):
    p = 7
    A = rng.standard_normal((p, p))
    Q = validate_psd(A @ A.T + np.eye(p))
    M = rng.standard_normal((p, 3))
    state = ProjectionState(p)
    for _ in range(3):
        state = state.append(rng.standard_normal(p), Q)
    for Qx in (None, Q):
        st_ = ProjectionState.from_weights(state.R, Qx)
        out = project_out(M, st_, Qx).M
        QR = state.R if Qx is None else Qx.matrix @ state.R
        assert np.abs(QR.T @ out).max() <= 1e-10 * np.abs(M).max()


def test_incremental_inverse_matches_explicit(rng):
    p = 9
    Qm = rng.standard_normal((p, p))
    Qm = Qm @ Qm.T
    state = ProjectionState(p)
    for _ in range(4):
        state = state.append(rng.standard_normal(p), Qm)
    G = state.R.T @ Qm @ state.R
    np.testing.assert_allclose(state.gram_inv, np.linalg.inv(G), rtol=1e-9, atol=1e-12)
    M = rng.standard_normal((p, 2))
    P = np.eye(p) - state.R @ np.linalg.inv(G) @ state.R.T @ Qm
    np.testing.assert_allclose(project_out(M, state, Qm).M, P @ M, atol=1e-10)


def test_dependent_weight_is_degenerate(rng):
    r = rng.standard_normal(5)
    state = ProjectionState(5).append(r)
    with pytest.raises(DegenerateFactor):
        state.append(2.0 * r)
