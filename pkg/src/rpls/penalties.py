"""Penalties on the loadings and their proximal operators."""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import BadGroups, BadRange, ZeroMatrix
from .linalg import as_array

FAMILIES = ("none", "lasso", "group")


def make_groups(groups, p):
    """Validate a list of index lists as a partition of range(p)."""
    if groups is None:
        raise BadGroups("group lasso needs a partition")
    groups = tuple(np.asarray(g, dtype=int).reshape(-1) for g in groups)
    if any(len(g) == 0 for g in groups):
        raise BadGroups("empty group")
    seen = np.concatenate(groups) if groups else np.zeros(0, dtype=int)
    if len(seen) != p or not np.array_equal(np.sort(seen), np.arange(p)):
        raise BadGroups(f"groups must cover 0..{p - 1} exactly once")
    return groups


def groups_from_boundaries(bounds, p):
    """Contiguous groups from start offsets, e.g. ``[0, 10, 25]`` for p = 40."""
    bounds = [int(b) for b in bounds]
    if not bounds or bounds[0] != 0:
        bounds = [0] + bounds
    if bounds[-1] != p:
        bounds = bounds + [p]
    if any(b1 <= b0 for b0, b1 in zip(bounds, bounds[1:])):
        raise BadGroups(f"group boundaries must be strictly increasing within [0, {p}]")
    return tuple(np.arange(b0, b1) for b0, b1 in zip(bounds, bounds[1:]))


def groups_from_labels(labels):
    labels = np.asarray(labels)
    return tuple(np.flatnonzero(labels == g) for g in dict.fromkeys(labels.tolist()))


@dataclass(frozen=True)
class PenaltySpec:
    """Penalty family, non-negativity flag and level lambda."""

    family: str = "lasso"
    lam: float = 0.0
    nonnegative: bool = False
    groups: tuple | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown penalty family {self.family!r}; expected one of {FAMILIES}")
        if not self.lam >= 0:
            raise ValueError(f"lambda must be >= 0, got {self.lam}")
        if self.family == "group" and self.groups is None:
            raise BadGroups("group lasso needs a partition")

    def with_lambda(self, lam):
        return replace(self, lam=float(lam))

    def check(self, p):
        if self.family == "group":
            make_groups(self.groups, p)

    def value(self, v):
        """P(v): the l1 norm, the sum of group l2 norms, or 0."""
        v = np.asarray(v, dtype=float)
        if self.family == "lasso":
            return float(np.abs(v).sum())
        if self.family == "group":
            return float(sum(np.linalg.norm(v[g]) for g in self.groups))
        return 0.0

    def df(self, v):
        """Degrees of freedom of a fitted loading: support size, or active group sizes."""
        v = np.asarray(v)
        if self.family == "group":
            return int(sum(len(g) for g in self.groups if np.any(v[g] != 0)))
        return int(np.count_nonzero(v))


def soft_threshold(z, lam):
    z = np.asarray(z, dtype=float)
    return np.sign(z) * np.maximum(np.abs(z) - lam, 0.0)


def group_shrink(z, groups, lam):
    out = np.zeros_like(z)
    for g in groups:
        zg = z[g]
        norm = np.linalg.norm(zg)
        if norm > lam:
            out[g] = zg * (1.0 - lam / norm)
    return out


def prox(spec, z, step=1.0):
    """argmin_v 1/2 ||z - v||^2 + step * lam * P(v)  (subject to v >= 0 if flagged)."""
    z = np.asarray(z, dtype=float)
    t = step * spec.lam
    if spec.nonnegative:
        z = np.maximum(z, 0.0)
    if spec.family == "lasso":
        return np.maximum(z - t, 0.0) if spec.nonnegative else soft_threshold(z, t)
    if spec.family == "group":
        if sum(len(g) for g in spec.groups) != z.shape[0]:
            raise BadGroups(f"partition does not match vector length {z.shape[0]}")
        return group_shrink(z, spec.groups, t)
    return z.copy()


def lambda_max(M, spec):
    """Smallest lambda at which the single-factor loading is zero.

    Exact for q = 1. For q > 1 the returned value bounds |(Mu)_i| over unit
    u and is a heuristic upper end for a grid.
    """
    A = as_array(M)
    if A.ndim == 1:
        A = A[:, None]
    if not np.any(A):
        raise ZeroMatrix("cross-product matrix is zero")
    if spec.family == "group":
        return float(max(np.linalg.norm(A[g]) for g in spec.groups))
    if A.shape[1] == 1:
        return float(np.abs(A).max())
    return float(np.linalg.norm(A, axis=1).max())


@dataclass(frozen=True)
class LambdaGrid:
    values: np.ndarray
    lam_max: float
    floor: float

    def __len__(self):
        return len(self.values)

    def __iter__(self):
        return iter(self.values)

    @property
    def count(self):
        return len(self.values)


def lambda_grid(lam_max, count=25, floor=1e-5):
    """`count` values log-equispaced from lam_max down to floor."""
    if not (floor > 0 and lam_max > floor):
        raise BadRange(f"need lam_max > floor > 0 (got {lam_max}, {floor})")
    if count < 2:
        raise BadRange("grid needs at least 2 points")
    vals = np.exp(np.linspace(np.log(lam_max), np.log(floor), count))
    vals[0], vals[-1] = lam_max, floor
    return LambdaGrid(vals, float(lam_max), float(floor))
