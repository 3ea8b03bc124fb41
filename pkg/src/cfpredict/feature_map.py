"""Additive regressor vectors: one-hot categoricals and quantile-knot hinges.

A continuous covariate with knots ``c_1 <= ... <= c_m`` and upper bound
``c_{m+1}`` (its pooled maximum) maps to ``m`` hinge features

    (x - c_k)_+                                 k = 1..m-1
    min((x - c_m)_+, c_{m+1} - c_m)             k = m

so the last segment stops extrapolating beyond the observed range.  The
``literal_cap=True`` switch instead uses ``c_{m+1}`` as the value beyond the
bound, which is discontinuous unless ``c_m = 0``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .data import ColumnSchema, DataError, Dataset


def empirical_quantile(values, q: float) -> float:
    """Left-continuous inverse ECDF: the ceil(q*n)-th order statistic (min at q=0)."""
    v = np.sort(np.asarray(values, dtype=float).ravel())
    if v.size == 0:
        raise ValueError("empty sample")
    if not 0.0 <= q <= 1.0:
        raise ValueError(f"quantile level {q} outside [0, 1]")
    k = math.ceil(q * v.size)
    return float(v[max(k, 1) - 1])


def knot_cap(n: int, d_prime: int, d_dprime: int) -> int | None:
    """Largest sensible knot count, max(round((n - d') / d''), 1).

    Returns None (unbounded) when there are no continuous covariates.
    """
    if d_dprime < 1:
        return None
    return max(math.floor((n - d_prime) / d_dprime + 0.5), 1)


@dataclass(frozen=True)
class ColumnPlan:
    column: ColumnSchema
    knots: tuple[float, ...] = ()
    upper: float = math.nan

    @property
    def width(self) -> int:
        if self.column.kind == "continuous":
            return len(self.knots)
        return self.column.categories - 1

    def to_json(self) -> dict:
        out = self.column.to_json()
        if self.column.kind == "continuous":
            out["knots"] = list(self.knots)
            out["upper"] = self.upper
        return out


@dataclass(frozen=True)
class FeatureMapSpec:
    columns: tuple[ColumnPlan, ...]
    m: int
    literal_cap: bool = False

    @property
    def p(self) -> int:
        return sum(c.width for c in self.columns)

    def feature_names(self) -> list[str]:
        names = []
        for plan in self.columns:
            col = plan.column
            if col.kind == "binary":
                names.append(col.name)
            elif col.kind == "categorical":
                names.extend(f"{col.name}={k}" for k in range(1, col.categories))
            else:
                names.extend(f"{col.name}>{c:.6g}" for c in plan.knots)
        return names

    def to_json(self) -> dict:
        return {
            "m": self.m,
            "p": self.p,
            "literal_cap": self.literal_cap,
            "columns": [c.to_json() for c in self.columns],
        }


def _continuous_knots(values: np.ndarray, m: int) -> tuple[tuple[float, ...], float]:
    upper = float(np.max(values))
    raw = [empirical_quantile(values, (k - 1) / m) for k in range(1, m + 1)]
    # Tied knots give identical columns; a knot at the upper bound gives a zero column.
    knots = sorted({c for c in raw if c < upper})
    return tuple(knots), upper


def build_spec(data: Dataset, m: int, literal_cap: bool = False) -> FeatureMapSpec:
    """Place ``m`` quantile knots per continuous column using the pooled data."""
    if m < 1:
        raise ValueError("knot count m must be >= 1")
    plans = []
    for j, col in enumerate(data.schema):
        if col.kind == "continuous":
            knots, upper = _continuous_knots(data.X[:, j], m)
            plans.append(ColumnPlan(col, knots, upper))
        else:
            plans.append(ColumnPlan(col))

    d_prime = sum(c.kind != "continuous" for c in data.schema)
    d_dprime = len(data.schema) - d_prime
    n_min = int(np.bincount(data.z).min())
    cap = knot_cap(n_min, d_prime, d_dprime)
    if cap is not None and m > cap:
        warnings.warn(f"m={m} exceeds the suggested knot cap {cap} for n={n_min}", stacklevel=2)
    return FeatureMapSpec(tuple(plans), m, literal_cap)


def _hinges(plan: ColumnPlan, x: np.ndarray, literal_cap: bool) -> np.ndarray:
    c = np.asarray(plan.knots)
    if c.size == 0:
        return np.zeros((x.size, 0))
    H = np.maximum(x[:, None] - c[None, :], 0.0)
    above = x > plan.upper
    if literal_cap:
        H[above, -1] = plan.upper
    else:
        H[above, -1] = plan.upper - c[-1]
    return H


def encode_matrix(spec: FeatureMapSpec, X) -> np.ndarray:
    """Regressor matrix (n, p) for raw covariate rows; no intercept column."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != len(spec.columns):
        raise DataError(f"expected {len(spec.columns)} covariates, got {X.shape[1]}")
    blocks = []
    for j, plan in enumerate(spec.columns):
        col = plan.column
        x = X[:, j]
        if col.kind == "continuous":
            if not np.all(np.isfinite(x)):
                raise DataError(f"column {col.name!r}: non-finite value")
            blocks.append(_hinges(plan, x, spec.literal_cap))
            continue
        codes = np.round(x)
        if np.any(codes != x) or np.any(codes < 0) or np.any(codes >= col.categories):
            raise DataError(f"column {col.name!r}: category code out of range")
        onehot = codes[:, None] == np.arange(1, col.categories)[None, :]
        blocks.append(onehot.astype(float))
    if not blocks:
        return np.zeros((X.shape[0], 0))
    return np.hstack(blocks)


def encode(spec: FeatureMapSpec, x) -> np.ndarray:
    """Regressor values phi_1(x)..phi_p(x) for a single raw row."""
    return encode_matrix(spec, np.asarray(x, dtype=float).reshape(1, -1))[0]


def with_intercept(Phi: np.ndarray) -> np.ndarray:
    Phi = np.atleast_2d(Phi)
    return np.hstack([np.ones((Phi.shape[0], 1)), Phi])
