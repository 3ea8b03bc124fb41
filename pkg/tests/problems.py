"""Random problem generators shared by the solver and acceptance tests."""

import numpy as np


def random_problem(rng, n=None, p=None):
    n = n or int(rng.integers(5, 51))
    p = p or int(rng.integers(1, 11))
    X = rng.standard_normal((n, p)) * rng.uniform(0.2, 5, p)
    coef = rng.standard_normal(p) * (rng.random(p) < 0.5) * 3
    y = rng.normal() * 5 + X @ coef + rng.uniform(0.1, 3) * rng.standard_normal(n)
    Phi1 = np.hstack([np.ones((n, 1)), X])
    return Phi1, y


def random_tuple(rng):
    n = int(rng.integers(2, 101))
    alpha = float(np.exp(rng.uniform(np.log(0.05), np.log(20))))
    lam = float(np.sqrt(alpha / n) * rng.uniform(0, 1.2))
    beta = float(rng.uniform(-5, 5))
    c = beta * beta / alpha + float(np.exp(rng.uniform(np.log(1e-6), np.log(20))))
    return alpha, beta, c, lam, n
