"""Tuning-free square-root lasso fitted from sufficient statistics.

The objective for weights ``w`` (intercept first) over ``n`` samples is

    V(w) = sqrt((energy - 2 w'cross + w'gram w) / n) + sum_j lam_j |w_j|

with ``lam_0 = 0`` and ``lam_j = sqrt(gram_jj) / n``.  Everything the solver
needs is in ``SuffStats``, so adding or removing a sample costs O(p^2).

Coordinate step
---------------
Holding all but ``w_j`` fixed, the residual energy is ``c - 2 b w + a w^2``
with ``a = gram_jj``, ``b`` the partial-residual correlation and ``c`` the
residual energy at ``w_j = 0``.  Minimising

    f(w) = sqrt((c - 2 b w + a w^2) / n) + lam |w|

gives zero when ``|b| <= lam sqrt(n c)`` (the subgradient at 0 contains 0).
Otherwise the stationarity condition ``b - a w = n lam s sign(w)`` with
``s = sqrt(f_quad / n)``, squared and solved for ``u = b - a w``, yields

    u^2 = n lam^2 (a c - b^2) / (a - n lam^2)
    w   = sign(b) (|b| - lam sqrt(n (a c - b^2) / (a - n lam^2))) / a

which needs ``a > n lam^2``.  When ``a <= n lam^2`` Cauchy-Schwarz
(``c >= b^2 / a``) forces ``|b| <= lam sqrt(n c)``, so the step is zero.

Support solve
-------------
Coordinate descent on strongly correlated hinge columns converges slowly.
Once a sweep leaves the support ``A`` and the signs ``s`` unchanged, the
optimum restricted to that pattern is found in closed form: stationarity
``gram_AA w = cross_A - h lam_A s`` with ``h = sqrt(n q(w))`` gives
``w = u - h v`` (``u = gram_AA^-1 cross_A``, ``v = gram_AA^-1 lam_A s``) and

    q = R0 + kappa h^2,   R0 = energy - cross_A'u,   kappa = (lam_A s)'v
    h^2 = n R0 / (1 - n kappa).

The candidate is kept only if its signs match ``s`` and the inactive
coordinates satisfy ``|cross_j - (gram w)_j| <= lam_j h``; then it is the
exact minimiser and descent stops.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numba
import numpy as np

BASE_TOL = 1e-8
BASE_MAX_SWEEPS = 1000
WARM_MAX_SWEEPS = 50
_FLOOR = 1e-300


@dataclass(frozen=True, eq=False)
class SuffStats:
    gram: np.ndarray
    cross: np.ndarray
    energy: float
    n: int

    @classmethod
    def empty(cls, p: int) -> "SuffStats":
        return cls(np.zeros((p + 1, p + 1)), np.zeros(p + 1), 0.0, 0)

    @classmethod
    def from_data(cls, Phi1: np.ndarray, y: np.ndarray) -> "SuffStats":
        """Batch build from a regressor matrix that already holds the intercept column."""
        Phi1 = np.atleast_2d(np.asarray(Phi1, dtype=float))
        y = np.asarray(y, dtype=float)
        return cls(Phi1.T @ Phi1, Phi1.T @ y, float(y @ y), len(y))

    @property
    def dim(self) -> int:
        return len(self.cross)

    def _check(self, phi1: np.ndarray) -> np.ndarray:
        phi1 = np.asarray(phi1, dtype=float)
        if phi1.shape != (self.dim,):
            raise ValueError(f"regressor of length {phi1.shape} does not match stats dim {self.dim}")
        return phi1


def stats_add(stats: SuffStats, phi1, y: float) -> SuffStats:
    phi1 = stats._check(phi1)
    return SuffStats(
        stats.gram + np.outer(phi1, phi1),
        stats.cross + phi1 * y,
        stats.energy + y * y,
        stats.n + 1,
    )


def stats_remove(stats: SuffStats, phi1, y: float) -> SuffStats:
    if stats.n < 1:
        raise ValueError("cannot remove a sample from empty statistics")
    phi1 = stats._check(phi1)
    return SuffStats(
        stats.gram - np.outer(phi1, phi1),
        stats.cross - phi1 * y,
        stats.energy - y * y,
        stats.n - 1,
    )


def reg_weights(stats: SuffStats) -> np.ndarray:
    """Penalty levels sqrt(E[phi_j^2] / n) = sqrt(gram_jj) / n; intercept unpenalised."""
    if stats.n < 1:
        raise ValueError("penalty weights need at least one sample")
    lam = np.sqrt(np.maximum(np.diag(stats.gram), 0.0)) / stats.n
    lam[0] = 0.0
    return lam


def cost(stats: SuffStats, lam: np.ndarray, w: np.ndarray) -> float:
    w = np.asarray(w, dtype=float)
    q = stats.energy - 2.0 * w @ stats.cross + w @ stats.gram @ w
    return float(np.sqrt(max(q, 0.0) / stats.n) + np.sum(lam * np.abs(w)))


def _step(alpha, beta, c, lam, n):
    if alpha <= 0.0:
        return 0.0
    if c < 0.0:
        c = 0.0
    if abs(beta) <= lam * np.sqrt(n * c):
        return 0.0
    slack = alpha - n * lam * lam
    if slack <= 0.0:
        return 0.0
    disc = alpha * c - beta * beta
    if disc < 0.0:
        disc = 0.0
    shrink = lam * np.sqrt(n * disc / slack)
    return np.sign(beta) * (abs(beta) - shrink) / alpha


_step_jit = numba.njit(cache=True)(_step)

coordinate_update = numba.vectorize(
    ["float64(float64, float64, float64, float64, float64)"], cache=True
)(_step)
coordinate_update.__doc__ = """Exact minimiser of sqrt((c - 2 beta w + alpha w^2)/n) + lam |w|.

Elementwise over arrays; ``alpha <= 0`` (an all-zero column) gives 0.
"""


@dataclass(frozen=True, eq=False)
class FitResult:
    w: np.ndarray
    cost: float
    sweeps: int
    converged: bool

    def to_json(self) -> str:
        return json.dumps({
            "w": self.w.tolist(), "cost": self.cost,
            "sweeps": self.sweeps, "converged": self.converged,
        })


@numba.njit(cache=True)
def _anchor(gram, cross, energy, n, lam, w, g):
    """Recompute g = gram @ w from the nonzero weights; return (q, cost)."""
    P = w.size
    g[:] = 0.0
    wc = 0.0
    pen = 0.0
    for j in range(P):
        if w[j] != 0.0:
            wc += w[j] * cross[j]
            pen += lam[j] * abs(w[j])
            for k in range(P):
                g[k] += w[j] * gram[j, k]
    wg = 0.0
    for j in range(P):
        wg += w[j] * g[j]
    q = max(energy - 2.0 * wc + wg, 0.0)
    return q, np.sqrt(q / n) + pen


@numba.njit(cache=True)
def _pattern(gram, lam, w):
    P = w.size
    m = 0
    for j in range(P):
        if gram[j, j] > 0.0 and (w[j] != 0.0 or lam[j] == 0.0):
            m += 1
    A = np.empty(m, dtype=np.int64)
    m = 0
    for j in range(P):
        if gram[j, j] > 0.0 and (w[j] != 0.0 or lam[j] == 0.0):
            A[m] = j
            m += 1
    return A


@numba.njit(cache=True)
def _step_to_zero(w, d, lam, A):
    """Largest t in (0, 1] keeping signs of w + t d on penalised coords; index hit or -1."""
    t = 1.0
    hit = -1
    for a in range(A.size):
        j = A[a]
        if lam[j] > 0.0 and d[a] != 0.0 and np.sign(d[a]) != np.sign(w[j]):
            tj = -w[j] / d[a]
            if tj < t:
                t = tj
                hit = j
    return t, hit


@numba.njit(cache=True)
def _kkt_inactive(gram, cross, energy, n, lam, w, h, A):
    scale = np.sqrt(max(energy, _FLOOR))
    for j in range(w.size):
        if w[j] != 0.0 or lam[j] == 0.0 or gram[j, j] <= 0.0:
            continue
        r = cross[j]
        for a in range(A.size):
            r -= gram[j, A[a]] * w[A[a]]
        if abs(r) > lam[j] * h + 1e-9 * np.sqrt(gram[j, j]) * scale:
            return False
    return True


@numba.njit(cache=True)
def _support_solve(gram, cross, energy, n, lam, w):
    """Active-set descent from ``w`` (modified in place); True once ``w`` is optimal.

    Each pass either lands on the exact optimum for the current sign pattern,
    steps toward it until a weight reaches zero, or (singular pattern) slides
    along a null direction of the active columns, which leaves the residual
    unchanged and lowers the penalty, until a weight reaches zero.
    """
    for _ in range(w.size + 1):
        A = _pattern(gram, lam, w)
        m = A.size
        s = np.empty(m)
        GA = np.empty((m, m))
        for a in range(m):
            s[a] = np.sign(w[A[a]]) if lam[A[a]] > 0.0 else 0.0
            for b in range(m):
                GA[a, b] = gram[A[a], A[b]]
        if m == 0:
            return _kkt_inactive(gram, cross, energy, n, lam, w, np.sqrt(n * max(energy, 0.0)), A)
        evals, evecs = np.linalg.eigh(GA)
        top = max(evals[m - 1], _FLOOR)
        if evals[0] <= 1e-11 * top:
            d = evecs[:, 0].copy()
            rate = 0.0
            for a in range(m):
                rate += lam[A[a]] * s[a] * d[a]
            if rate > 0.0:
                d = -d
            # Rescale so the step to the first zero is <= 1 in the search below.
            big = 0.0
            for a in range(m):
                j = A[a]
                if lam[j] > 0.0 and d[a] != 0.0 and np.sign(d[a]) != np.sign(w[j]):
                    big = max(big, abs(d[a]) / abs(w[j]))
            if big == 0.0:
                return False
            d = d / big
            t, hit = _step_to_zero(w, d, lam, A)
            for a in range(m):
                w[A[a]] += t * d[a]
            w[hit] = 0.0
            continue
        rhs = np.empty((m, 2))
        for a in range(m):
            rhs[a, 0] = cross[A[a]]
            rhs[a, 1] = lam[A[a]] * s[a]
        sol = evecs @ ((evecs.T @ rhs) / evals.reshape(m, 1))
        r0 = energy
        kappa = 0.0
        for a in range(m):
            r0 -= rhs[a, 0] * sol[a, 0]
            kappa += rhs[a, 1] * sol[a, 1]
        denom = 1.0 - n * kappa
        if denom <= 0.0:
            return False
        h = np.sqrt(n * max(r0, 0.0) / denom)
        d = np.empty(m)
        for a in range(m):
            d[a] = sol[a, 0] - h * sol[a, 1] - w[A[a]]
        t, hit = _step_to_zero(w, d, lam, A)
        for a in range(m):
            w[A[a]] += t * d[a]
        if hit >= 0:
            w[hit] = 0.0
            continue
        return _kkt_inactive(gram, cross, energy, n, lam, w, h, A)
    return False


@numba.njit(cache=True)
def _descend_row(gram, diag, cross, energy, n, lam, w, tol, max_sweeps):
    P = w.size
    g = np.zeros(P)
    q, cost = _anchor(gram, cross, energy, n, lam, w, g)
    if q < _FLOOR:
        return cost, 0, True
    prev = np.sign(w)
    cand = np.empty(P)
    for sweep in range(1, max_sweeps + 1):
        for j in range(P):
            a = diag[j]
            if a <= 0.0:
                continue
            wj = w[j]
            b = cross[j] - g[j] + a * wj
            q0 = q + 2.0 * wj * b - a * wj * wj
            wn = _step_jit(a, b, q0, lam[j], n)
            if wn != wj:
                d = wn - wj
                w[j] = wn
                for k in range(P):
                    g[k] += d * gram[j, k]
            q = max(q0 - 2.0 * wn * b + a * wn * wn, 0.0)
        # Re-anchor the running quadratic form once per sweep to stop drift.
        q, new_cost = _anchor(gram, cross, energy, n, lam, w, g)
        signs = np.sign(w)
        if q >= _FLOOR and np.all(signs == prev):
            cand[:] = w
            exact = _support_solve(gram, cross, energy, n, lam, cand)
            gc = np.zeros(P)
            qc, cand_cost = _anchor(gram, cross, energy, n, lam, cand, gc)
            if cand_cost <= new_cost:
                w[:] = cand
                g[:] = gc
                q, new_cost = qc, cand_cost
                if exact:
                    return new_cost, sweep, True
            signs = np.sign(w)
        prev = signs
        decrease = cost - new_cost
        cost = new_cost
        if q < _FLOOR or decrease < tol * max(abs(cost + decrease), _FLOOR):
            return cost, sweep, True
    return cost, max_sweeps, False


@numba.njit(cache=True)
def _descend(gram, cross, energy, n, lam, W, tol, max_sweeps, costs, sweeps, converged):
    diag = np.diag(gram).copy()
    for j in range(diag.size):
        if diag[j] <= 0.0:
            W[:, j] = 0.0
    for i in range(W.shape[0]):
        c, s, ok = _descend_row(gram, diag, cross[i], energy[i], n, lam, W[i], tol, max_sweeps)
        costs[i] = c
        sweeps[i] = s
        converged[i] = ok


def descend(gram, cross, energy, n, lam, w0, tol=BASE_TOL, max_sweeps=BASE_MAX_SWEEPS):
    """Cyclic coordinate descent on a batch of problems sharing gram and penalties.

    ``cross`` is (B, P), ``energy`` (B,), ``w0`` broadcastable to (B, P).  Rows
    are solved independently; each stops once a full sweep lowers its cost by
    less than ``tol`` relative, or after ``max_sweeps``.

    Returns (W, costs, sweeps_per_row, converged_per_row).
    """
    gram = np.ascontiguousarray(gram, dtype=float)
    cross = np.ascontiguousarray(np.atleast_2d(cross), dtype=float)
    energy = np.ascontiguousarray(np.atleast_1d(energy), dtype=float)
    lam = np.ascontiguousarray(lam, dtype=float)
    W = np.array(np.broadcast_to(w0, cross.shape), dtype=float)
    B = W.shape[0]
    costs = np.empty(B)
    sweeps = np.zeros(B, dtype=np.int64)
    converged = np.zeros(B, dtype=np.bool_)
    _descend(gram, cross, energy, float(n), lam, W, float(tol), int(max_sweeps), costs, sweeps, converged)
    return W, costs, sweeps, converged


def fit(stats: SuffStats, lam=None, w_init=None, tol=BASE_TOL, max_sweeps=BASE_MAX_SWEEPS) -> FitResult:
    """Square-root lasso weights for ``stats``; zero start by default."""
    if stats.n < 1:
        raise ValueError("cannot fit with no samples")
    if lam is None:
        lam = reg_weights(stats)
    w0 = np.zeros(stats.dim) if w_init is None else np.asarray(w_init, dtype=float)
    W, costs, sweeps, conv = descend(
        stats.gram, stats.cross[None, :], np.array([stats.energy]), stats.n,
        lam, w0[None, :], tol, max_sweeps,
    )
    w = W[0]
    # Rounding in the final sweep can nudge the cost above the start.
    if cost(stats, lam, w) > cost(stats, lam, w0):
        w = w0.copy()
    return FitResult(w, cost(stats, lam, w), int(sweeps[0]), bool(conv[0]))


def predict_mean(w, phi1) -> float:
    w = np.asarray(w, dtype=float)
    phi1 = np.asarray(phi1, dtype=float)
    if w.shape != phi1.shape:
        raise ValueError(f"weights {w.shape} and regressors {phi1.shape} differ in length")
    return float(phi1 @ w)
