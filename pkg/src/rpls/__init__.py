"""Regularized and generalized partial least squares.

Sparse, group-sparse and non-negative PLS loadings from penalized rank-one
approximations of the deflated cross-product X'Y, with an optional
quadratic operator Q encoding structure among the variables.
"""
from .errors import RplsError
from .linalg import StandardizedData, cross_product, q_norm, standardize
from .operators import (
    QuadraticOperator,
    epanechnikov_laplacian,
    epanechnikov_weights,
    identity_operator,
    operator_bandwidth_search,
    validate_psd,
    weighted_laplacian,
)
from .penalties import PenaltySpec, lambda_grid, lambda_max, prox, soft_threshold
from .pipeline import RplsModel, fit, transform
from .prediction import (
    encode_classes,
    fit_regression,
    lda_fit,
    lda_predict,
    misclassification,
    mspe,
    predict,
    tpr_fpr,
)
from .selection import BicSelector, bic_select_lambda, cross_validate, select_k_sparse
from .solver import SolverOptions, solve_single_factor

__version__ = "0.1.0"
