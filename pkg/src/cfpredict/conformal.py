"""Full conformal prediction sets over an outcome grid.

For a covariate point ``x`` and each trial outcome ``y'`` on the grid, the
sample ``(x, y')`` is appended to the exposure's data, the square-root lasso
is refitted (warm-started from the base fit) and ``y'`` is ranked by its
absolute residual among the ``n`` fitted residuals:

    pi(y') = (1 + #{i : r_i <= |y' - phi(x)'w(y')|}) / (n + 1)

The grid point joins the level-``beta`` set when
``(n+1) pi(y') <= ceil(beta (n+1))``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .solver import BASE_TOL, WARM_MAX_SWEEPS, SuffStats, descend

GRID_SIZE = 200
GRID_MARGIN = 0.25
# Absorbs rounding in beta*(n+1) when it should be an exact integer.
_RANK_EPS = 1e-9


@dataclass(frozen=True, eq=False)
class OutcomeGrid:
    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 1 or pts.size < 1 or np.any(np.diff(pts) <= 0):
            raise ValueError("grid points must be a strictly increasing 1-d array")
        object.__setattr__(self, "points", pts)

    @property
    def lo(self) -> float:
        return float(self.points[0])

    @property
    def hi(self) -> float:
        return float(self.points[-1])

    @property
    def step(self) -> float:
        return float(self.points[1] - self.points[0]) if self.points.size > 1 else 0.0

    def __len__(self):
        return self.points.size

    def __eq__(self, other):
        return isinstance(other, OutcomeGrid) and np.array_equal(self.points, other.points)

    def to_json(self) -> dict:
        return {"lo": self.lo, "hi": self.hi, "size": len(self)}


def make_grid(y, size: int = GRID_SIZE, margin: float = GRID_MARGIN) -> OutcomeGrid:
    """Uniform grid over the observed outcome range widened by ``margin`` times the range."""
    y = np.asarray(getattr(y, "y", y), dtype=float)
    if y.size == 0:
        raise ValueError("cannot build a grid from no outcomes")
    if size < 2:
        raise ValueError("grid needs at least 2 points")
    lo, hi = float(y.min()), float(y.max())
    span = hi - lo
    if span == 0:
        lo, hi = lo - 1.0, hi + 1.0
    else:
        lo, hi = lo - margin * span, hi + margin * span
    return OutcomeGrid(np.linspace(lo, hi, size))


@dataclass(frozen=True, eq=False)
class ConformalScores:
    grid: OutcomeGrid
    ranks: np.ndarray  # (n+1) * pi, integers in 1..n+1
    n: int
    prediction_at: np.ndarray

    @property
    def pi(self) -> np.ndarray:
        return self.ranks / (self.n + 1)

    def write_csv(self, path, exposure=None) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            _write_rows(csv.writer(fh), [(exposure, self)])


def _write_rows(writer, labelled) -> None:
    with_label = labelled and labelled[0][0] is not None
    header = ["y_grid", "pi", "prediction_at"]
    writer.writerow((["exposure"] if with_label else []) + header)
    for label, s in labelled:
        for y, p, m in zip(s.grid.points, s.pi, s.prediction_at):
            row = [repr(float(y)), repr(float(p)), repr(float(m))]
            writer.writerow(([label] if with_label else []) + row)


def write_scores_csv(path, labelled_scores) -> None:
    """Long-format CSV of several score curves: ``exposure,y_grid,pi,prediction_at``."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        _write_rows(csv.writer(fh), list(labelled_scores))


def residual_ranks(Phi1, y, W, x_phi1, trial_y) -> tuple[np.ndarray, np.ndarray]:
    """Rank counts 1 + #{r_i <= trial residual} for each weight row of ``W``.

    Ties between a fitted and the trial residual count towards the rank.
    """
    fitted = Phi1 @ W.T  # (n, B)
    resid = np.abs(np.asarray(y)[:, None] - fitted)
    pred = W @ x_phi1
    trial = np.abs(np.asarray(trial_y) - pred)
    ranks = 1 + np.count_nonzero(resid <= trial[None, :], axis=0)
    return ranks, pred


def trial_ranks(
    base_stats: SuffStats,
    base_w,
    Phi1: np.ndarray,
    y: np.ndarray,
    x_phi1,
    trial_y,
    tol: float = BASE_TOL,
    max_sweeps: int = WARM_MAX_SWEEPS,
) -> tuple[np.ndarray, np.ndarray]:
    """Rank counts (n+1) pi(y') and refitted predictions for arbitrary trial outcomes.

    ``Phi1``/``y`` are the exposure's encoded rows (intercept included) that
    produced ``base_stats``; ``base_w`` is its converged fit.  The augmented
    gram matrix and penalties are shared by every trial outcome, so only the
    cross-moments and energy vary with ``y'``.
    """
    x_phi1 = np.asarray(x_phi1, dtype=float)
    if x_phi1.shape != (base_stats.dim,) or Phi1.shape[1] != base_stats.dim:
        raise ValueError("regressor dimension does not match the sufficient statistics")
    ys = np.atleast_1d(np.asarray(trial_y, dtype=float))
    n = base_stats.n
    gram = base_stats.gram + np.outer(x_phi1, x_phi1)
    lam = np.sqrt(np.maximum(np.diag(gram), 0.0)) / (n + 1)
    lam[0] = 0.0
    cross = base_stats.cross[None, :] + ys[:, None] * x_phi1[None, :]
    energy = base_stats.energy + ys * ys
    W, _, _, _ = descend(gram, cross, energy, n + 1, lam, np.asarray(base_w)[None, :], tol, max_sweeps)
    return residual_ranks(Phi1, y, W, x_phi1, ys)


def conformal_scores(base_stats, base_w, Phi1, y, x_phi1, grid: OutcomeGrid, **kw) -> ConformalScores:
    """Score curve over ``grid`` for one exposure at covariate point ``x_phi1``."""
    ranks, pred = trial_ranks(base_stats, base_w, Phi1, y, x_phi1, grid.points, **kw)
    return ConformalScores(grid, ranks, base_stats.n, pred)


def rank_threshold(beta: float, n: int) -> int:
    return math.ceil(beta * (n + 1) - _RANK_EPS)


@dataclass(frozen=True, eq=False)
class PredictionSet:
    beta: float
    included: np.ndarray
    intervals: list[tuple[float, float]]
    point: float

    @property
    def empty(self) -> bool:
        return not self.included.any()

    def width(self, step: float) -> float:
        """Included grid cells times the grid step."""
        return float(self.included.sum()) * step

    def contains(self, value: float) -> bool:
        return any(lo <= value <= hi for lo, hi in self.intervals)


def runs(mask: np.ndarray) -> list[tuple[int, int]]:
    """Maximal runs of True as inclusive (start, stop) index pairs."""
    mask = np.asarray(mask, dtype=bool)
    edges = np.diff(np.concatenate([[0], mask.astype(np.int8), [0]]))
    starts = np.flatnonzero(edges == 1)
    stops = np.flatnonzero(edges == -1) - 1
    return list(zip(starts.tolist(), stops.tolist()))


def included(scores: ConformalScores, beta: float) -> np.ndarray:
    if not 0.0 < beta < 1.0:
        raise ValueError("coverage level beta must lie in (0, 1)")
    return scores.ranks <= rank_threshold(beta, scores.n)


def prediction_set(scores: ConformalScores, beta: float) -> PredictionSet:
    mask = included(scores, beta)
    pts = scores.grid.points
    intervals = [(float(pts[a]), float(pts[b])) for a, b in runs(mask)]
    return PredictionSet(beta, mask, intervals, point_prediction(scores))


def point_prediction(scores: ConformalScores) -> float:
    """Midpoint of the argmin plateau holding the first global minimiser of pi."""
    r = scores.ranks
    first = int(np.argmin(r))
    last = first
    while last + 1 < r.size and r[last + 1] == r[first]:
        last += 1
    pts = scores.grid.points
    return 0.5 * (float(pts[first]) + float(pts[last]))


def min_beta_curve(scores: ConformalScores) -> np.ndarray:
    """Per-point infimum level b(y') = pi(y') - 1/(n+1): y' is in the set iff beta > b."""
    return np.clip((scores.ranks - 1) / (scores.n + 1), 0.0, 1.0)
