"""Counterfactual prediction intervals from sparse additive square-root lasso fits."""

from .conformal import (
    ConformalScores,
    OutcomeGrid,
    PredictionSet,
    conformal_scores,
    make_grid,
    min_beta_curve,
    point_prediction,
    prediction_set,
)
from .counterfactual import (
    ConfidenceTable,
    ExposureAnalysis,
    analyze_unit,
    confidence,
    pairwise_table,
    split_by_exposure,
)
from .data import ColumnSchema, DataError, Dataset, load_csv, save_csv
from .feature_map import FeatureMapSpec, build_spec, empirical_quantile, encode, knot_cap
from .solver import SuffStats, cost, fit, predict_mean, reg_weights, stats_add, stats_remove

__version__ = "0.1.0"
