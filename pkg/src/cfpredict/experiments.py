"""Synthetic counterfactual worlds and the Monte Carlo coverage harness.

Two data-generating processes with K = 2 exposures:

* ``nonlinear`` - scalar x, x|z=0 ~ N(40, 10^2), x|z=1 ~ N(20, 10^2),
  y(0) ~ N(72 + 3 sqrt|x|, 1), y(1) ~ N(90 + exp(0.06 x), 1), z ~ Bernoulli(1/2).
* ``highdim`` - x|z ~ N(0, S_z) in d = 200 dimensions with random unit-trace
  covariances of rank 150, y(0) ~ N(x1 + 5 x10 + 5 x20 + 0.5, 0.5^2),
  y(1) ~ N(x1 + x10 - x30, 0.5^2), P(z=1) = 0.4.

Every replicate draws from ``numpy.random.default_rng([seed, replicate])`` so
results do not depend on how replicates are scheduled across workers.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import conformal
from .conformal import rank_threshold
from .counterfactual import fit_exposure, split_by_exposure
from .data import Dataset, binary, continuous
from .feature_map import build_spec, encode, knot_cap

EXPERIMENTS = ("nonlinear", "highdim")
DEFAULTS = {
    "nonlinear": {"n": 120, "m": 10},
    "highdim": {"n": 100, "m": 1, "d": 200, "rank": 150},
}


@dataclass(frozen=True, eq=False)
class SyntheticUnits:
    """Covariates, exposures and both potential outcomes; evaluation only."""

    x: np.ndarray
    z: np.ndarray
    y: np.ndarray
    y0: np.ndarray
    y1: np.ndarray


class NonlinearWorld:
    d = 1
    p_treated = 0.5

    def schema(self):
        return (continuous("x"),)

    def covariates(self, z: np.ndarray, rng) -> np.ndarray:
        g = rng.standard_normal(z.size)
        return np.where(z == 0, 40.0, 20.0)[:, None] + 10.0 * g[:, None]

    def mean0(self, X):
        return 72.0 + 3.0 * np.sqrt(np.abs(X[:, 0]))

    def mean1(self, X):
        return 90.0 + np.exp(0.06 * X[:, 0])

    noise0 = noise1 = 1.0


@dataclass
class HighDimWorld:
    """Random-covariance world; ``factors[z]`` satisfies S_z = F F' with tr(S_z) = 1."""

    factors: tuple
    p_treated: float = 0.4
    noise0: float = 0.5
    noise1: float = 0.5

    @classmethod
    def draw(cls, d: int, rank: int, rng) -> "HighDimWorld":
        if d < 30:
            raise ValueError("the high-dimensional world needs d >= 30")
        if not 1 <= rank <= d:
            raise ValueError("rank must lie in 1..d")
        factors = []
        for _ in range(2):
            A = rng.standard_normal((d, rank))
            factors.append(A / np.linalg.norm(A))  # Frobenius norm^2 = tr(AA')
        return cls(tuple(factors))

    @property
    def d(self) -> int:
        return self.factors[0].shape[0]

    def covariance(self, z: int) -> np.ndarray:
        F = self.factors[z]
        return F @ F.T

    def schema(self):
        return tuple(continuous(f"x{j}") for j in range(1, self.d + 1))

    def covariates(self, z: np.ndarray, rng) -> np.ndarray:
        rank = self.factors[0].shape[1]
        G = rng.standard_normal((z.size, rank))
        X = np.empty((z.size, self.d))
        for k in (0, 1):
            rows = z == k
            X[rows] = G[rows] @ self.factors[k].T
        return X

    def mean0(self, X):
        return X[:, 0] + 5.0 * X[:, 9] + 5.0 * X[:, 19] + 0.5

    def mean1(self, X):
        return X[:, 0] + X[:, 9] - X[:, 29]


def _draw_units(world, z: np.ndarray, rng) -> SyntheticUnits:
    X = world.covariates(z, rng)
    y0 = world.mean0(X) + world.noise0 * rng.standard_normal(z.size)
    y1 = world.mean1(X) + world.noise1 * rng.standard_normal(z.size)
    return SyntheticUnits(X, z, np.where(z == 1, y1, y0), y0, y1)


def sample(world, n: int, rng) -> tuple[Dataset, SyntheticUnits]:
    if n < 2:
        raise ValueError("need at least 2 units")
    z = (rng.random(n) < world.p_treated).astype(np.int64)
    units = _draw_units(world, z, rng)
    return Dataset(z, units.y, units.x, world.schema(), n_exposures=2), units


def gen_nonlinear(n: int = 120, seed=0) -> tuple[Dataset, SyntheticUnits]:
    return sample(NonlinearWorld(), n, np.random.default_rng(seed))


def gen_highdim(n: int = 100, d: int = 200, rank: int = 150, seed=0):
    """Returns (dataset, units, world); the world carries the drawn covariances."""
    rng = np.random.default_rng(seed)
    world = HighDimWorld.draw(d, rank, rng)
    data, units = sample(world, n, rng)
    return data, units, world


@dataclass
class CoverageConfig:
    experiment: str = "nonlinear"
    runs: int = 1000
    beta: float = 0.9
    seed: int = 0
    n: int | None = None
    m: int | None = None
    d: int = 200
    rank: int = 150
    grid_size: int = conformal.GRID_SIZE
    margin: float = conformal.GRID_MARGIN
    fixed_covariances: bool = False

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"unknown experiment {self.experiment!r}")
        if self.runs < 1:
            raise ValueError("runs must be >= 1")
        if not 0 < self.beta < 1:
            raise ValueError("beta must lie in (0, 1)")
        defaults = DEFAULTS[self.experiment]
        if self.n is None:
            self.n = defaults["n"]
        if self.m is None:
            self.m = defaults["m"]


@dataclass
class CoverageReport:
    experiment: str
    beta: float
    runs: int
    seed: int
    coverage: tuple[float, ...]
    covered: tuple[int, ...]
    mean_width: tuple[float, ...]
    empty_sets: tuple[int, ...] = field(default=(0, 0))

    def table(self) -> str:
        lines = [
            f"experiment {self.experiment}  beta {self.beta:.3f}  runs {self.runs}  seed {self.seed}",
            f"{'exposure':>8} {'covered':>8} {'coverage':>9} {'width':>10}",
        ]
        for k, (c, f, w) in enumerate(zip(self.covered, self.coverage, self.mean_width)):
            lines.append(f"{k:>8d} {c:>8d} {f:>9.3f} {w:>10.4f}")
        return "\n".join(lines)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)


def make_world(cfg: CoverageConfig, rng):
    if cfg.experiment == "nonlinear":
        return NonlinearWorld()
    if cfg.fixed_covariances:
        return HighDimWorld.draw(cfg.d, cfg.rank, np.random.default_rng([cfg.seed, 2**31]))
    return HighDimWorld.draw(cfg.d, cfg.rank, rng)


def replicate(cfg: CoverageConfig, r: int):
    """One replicate: fresh data, one fresh unit per exposure, exact set membership.

    Returns per-exposure (covered, width, empty) lists.  Membership of the
    true outcome is decided by scoring it directly, in the same batch as the
    grid, rather than by snapping it to the grid.
    """
    rng = np.random.default_rng([cfg.seed, r])
    world = make_world(cfg, rng)
    data, _ = sample(world, cfg.n, rng)
    spec = build_spec(data, cfg.m)
    grid = conformal.make_grid(data.y, cfg.grid_size, cfg.margin)
    covered, widths, empty = [], [], []
    for group in split_by_exposure(data):
        unit = _draw_units(world, np.array([group.exposure]), rng)
        Phi1, stats, base = fit_exposure(spec, group)
        x_phi1 = np.concatenate([[1.0], encode(spec, unit.x[0])])
        trials = np.append(grid.points, unit.y[0])
        ranks, _ = conformal.trial_ranks(stats, base.w, Phi1, group.y, x_phi1, trials)
        threshold = rank_threshold(cfg.beta, group.n)
        inside = ranks[:-1] <= threshold
        covered.append(bool(ranks[-1] <= threshold))
        widths.append(float(inside.sum()) * grid.step)
        empty.append(not inside.any())
    return covered, widths, empty


def _replicate_star(args):
    return replicate(*args)


def resolve_threads(threads: int | None = None) -> int:
    env = os.environ.get("CF_THREADS")
    if env:
        return max(int(env), 1)
    return max(threads or 1, 1)


def coverage_run(cfg: CoverageConfig, threads: int | None = None, progress=None) -> CoverageReport:
    """Monte Carlo coverage of the level-beta sets for both exposures."""
    threads = resolve_threads(threads)
    jobs = [(cfg, r) for r in range(cfg.runs)]
    if threads == 1:
        results = []
        for job in jobs:
            results.append(_replicate_star(job))
            if progress:
                progress(len(results))
    else:
        with ProcessPoolExecutor(threads) as pool:
            results = list(pool.map(_replicate_star, jobs, chunksize=max(1, cfg.runs // (4 * threads))))
    cov = np.array([c for c, _, _ in results], dtype=bool)
    width = np.array([w for _, w, _ in results])
    empty = np.array([e for _, _, e in results], dtype=bool)
    hits = cov.sum(axis=0)
    return CoverageReport(
        experiment=cfg.experiment,
        beta=cfg.beta,
        runs=cfg.runs,
        seed=cfg.seed,
        coverage=tuple(float(h) / cfg.runs for h in hits),
        covered=tuple(int(h) for h in hits),
        mean_width=tuple(float(w) for w in width.mean(axis=0)),
        empty_sets=tuple(int(e) for e in empty.sum(axis=0)),
    )


def schooling_standin(n: int = 10_000, seed=0) -> Dataset:
    """Synthetic stand-in shaped like a 26-binary-covariate earnings study.

    Ten birth-year indicators, eight region indicators and eight further
    demographic flags; exposure is a schooling threshold and the outcome a
    log-earnings-like quantity.  Not calibrated to any real dataset.
    """
    rng = np.random.default_rng(seed)
    year = rng.integers(0, 10, n)
    region = rng.integers(0, 8, n)
    flags = (rng.random((n, 8)) < np.linspace(0.15, 0.6, 8)).astype(float)
    X = np.hstack([
        (year[:, None] == np.arange(10)).astype(float),
        (region[:, None] == np.arange(8)).astype(float),
        flags,
    ])
    logit = -0.3 + 0.8 * flags[:, 0] - 0.6 * flags[:, 1] + 0.05 * year
    z = (rng.random(n) < 1.0 / (1.0 + np.exp(-logit))).astype(np.int64)
    base = 5.2 + 0.02 * year + 0.05 * region - 0.25 * flags[:, 1] + 0.15 * flags[:, 2] + 0.1 * flags[:, 3]
    gain = 0.35 - 0.12 * flags[:, 2] + 0.05 * flags[:, 1]
    y = base + z * gain + 0.6 * rng.standard_normal(n)
    names = [f"yob{1930 + k}" for k in range(10)] + [f"region{k}" for k in range(8)]
    names += ["black", "married", "smsa", "flag3", "flag4", "flag5", "flag6", "flag7"]
    return Dataset(z, y, X, tuple(binary(s) for s in names), n_exposures=2)


def suggested_knots(data: Dataset) -> int | None:
    d_prime = sum(c.kind != "continuous" for c in data.schema)
    return knot_cap(int(np.bincount(data.z, minlength=data.K).min()), d_prime, len(data.schema) - d_prime)
