"""Per-exposure conformal analysis of one unit and pairwise counterfactual confidence.

The confidence between exposures g and h is the largest level beta at which
their prediction sets share no grid point.  A grid point y' is in the set
at level beta iff beta > b(y'), so the sets are disjoint exactly when
beta <= max(b_g(y'), b_h(y')) for every y', i.e. up to

    min over y' of max(b_g(y'), b_h(y')).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import conformal
from .conformal import ConformalScores, OutcomeGrid, PredictionSet
from .data import DataError, Dataset, ExposureData
from .feature_map import FeatureMapSpec, build_spec, encode, encode_matrix, with_intercept
from .solver import SuffStats, fit, predict_mean


def split_by_exposure(data: Dataset) -> list[ExposureData]:
    groups = []
    for k in range(data.K):
        mask = data.z == k
        if not mask.any():
            raise DataError(f"exposure {k} has no samples")
        groups.append(ExposureData(k, data.y[mask], data.X[mask]))
    return groups


@dataclass(frozen=True, eq=False)
class ExposureAnalysis:
    exposure: int
    n: int
    weights: np.ndarray
    scores: ConformalScores
    point: float
    mean: float  # phi(x)'w of the base fit
    converged: bool = True

    def prediction_set(self, beta: float) -> PredictionSet:
        return conformal.prediction_set(self.scores, beta)


def fit_exposure(spec: FeatureMapSpec, group: ExposureData):
    Phi1 = with_intercept(encode_matrix(spec, group.X))
    stats = SuffStats.from_data(Phi1, group.y)
    return Phi1, stats, fit(stats)


def analyze_exposure(spec, group: ExposureData, x, grid: OutcomeGrid) -> ExposureAnalysis:
    Phi1, stats, base = fit_exposure(spec, group)
    x_phi1 = np.concatenate([[1.0], encode(spec, x)])
    scores = conformal.conformal_scores(stats, base.w, Phi1, group.y, x_phi1, grid)
    return ExposureAnalysis(
        exposure=group.exposure,
        n=group.n,
        weights=base.w,
        scores=scores,
        point=conformal.point_prediction(scores),
        mean=predict_mean(base.w, x_phi1),
        converged=base.converged,
    )


def analyze_unit(
    data: Dataset,
    x,
    m: int,
    grid_size: int = conformal.GRID_SIZE,
    margin: float = conformal.GRID_MARGIN,
    spec: FeatureMapSpec | None = None,
    grid: OutcomeGrid | None = None,
) -> list[ExposureAnalysis]:
    """Fit every exposure and score covariate row ``x`` on one shared outcome grid."""
    if spec is None:
        spec = build_spec(data, m)
    if grid is None:
        grid = conformal.make_grid(data.y, grid_size, margin)
    return [analyze_exposure(spec, g, x, grid) for g in split_by_exposure(data)]


def confidence(scores_g: ConformalScores, scores_h: ConformalScores) -> float:
    if scores_g.grid != scores_h.grid:
        raise ValueError("confidence needs both score curves on the same grid")
    b = np.maximum(conformal.min_beta_curve(scores_g), conformal.min_beta_curve(scores_h))
    return float(np.clip(b.min(), 0.0, 1.0))


def disjoint(scores_g: ConformalScores, scores_h: ConformalScores, beta: float) -> bool:
    both = conformal.included(scores_g, beta) & conformal.included(scores_h, beta)
    return not both.any()


@dataclass(frozen=True, eq=False)
class ConfidenceTable:
    exposures: tuple
    confidence: np.ndarray  # symmetric, NaN diagonal
    effects: np.ndarray  # effects[g, h] = point_g - point_h
    x: object = field(default=None)

    def lower(self) -> list[list[float]]:
        return [[float(self.confidence[g, h]) for h in range(g)] for g in range(len(self.exposures))]

    def format(self) -> str:
        """Lower-triangular percentage table, one row per exposure g >= 1."""
        labels = [str(e) for e in self.exposures]
        width = max(6, *(len(s) for s in labels))
        head = " " * width + " |" + "".join(f"{s:>{width}}" for s in labels[:-1])
        lines = [head, "-" * len(head)]
        for g in range(1, len(labels)):
            cells = []
            for h in range(len(labels) - 1):
                cell = f"{round(100 * self.confidence[g, h]):d}%" if h < g else "--"
                cells.append(f"{cell:>{width}}")
            lines.append(f"{labels[g]:>{width}} |" + "".join(cells))
        return "\n".join(lines)


def pairwise_table(analyses: list[ExposureAnalysis], x=None) -> ConfidenceTable:
    K = len(analyses)
    if K < 2:
        raise ValueError("a confidence table needs at least two exposures")
    conf = np.full((K, K), np.nan)
    eff = np.zeros((K, K))
    for g in range(K):
        for h in range(g):
            c = confidence(analyses[g].scores, analyses[h].scores)
            conf[g, h] = conf[h, g] = c
        for h in range(K):
            eff[g, h] = analyses[g].point - analyses[h].point
    return ConfidenceTable(tuple(a.exposure for a in analyses), conf, eff, x)


def analysis_json(
    analyses: list[ExposureAnalysis],
    beta: float,
    spec: FeatureMapSpec,
    labels=None,
    table: ConfidenceTable | None = None,
) -> dict:
    """Serialisable analysis result with intervals, confidences, effects and knots."""
    grid = analyses[0].scores.grid
    labels = labels or tuple(range(len(analyses)))
    out = {"grid": grid.to_json(), "beta": beta, "exposures": []}
    for a in analyses:
        ps = a.prediction_set(beta)
        out["exposures"].append({
            "z": labels[a.exposure],
            "n": a.n,
            "point": a.point,
            "mean": a.mean,
            "beta": beta,
            "intervals": [list(iv) for iv in ps.intervals],
            "converged": a.converged,
        })
    if len(analyses) >= 2:
        table = table or pairwise_table(analyses)
        K = len(analyses)
        out["confidence_table"] = [
            [None if g == h else float(table.confidence[g, h]) for h in range(K)] for g in range(K)
        ]
        out["effects"] = table.effects.tolist()
    else:
        out["confidence_table"] = []
        out["effects"] = []
    out["knots"] = spec.to_json()
    return out
