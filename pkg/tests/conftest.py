import numpy as np
import pytest

from cfpredict import conformal
from cfpredict.solver import SuffStats, fit

_ACCEPTANCE = []


@pytest.fixture
def acceptance():
    """Record one acceptance line: acceptance(id, passed, detail)."""

    def record(cid, passed, detail):
        _ACCEPTANCE.append((cid, bool(passed), detail))
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for cid, passed, detail in sorted(_ACCEPTANCE, key=lambda r: int(r[0][1:])):
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'} {cid}: {detail}")


class Instance:
    """A random regression problem in regressor space plus a query point."""

    def __init__(self, seed, n=None, p=None):
        rng = np.random.default_rng(seed)
        self.n = n or int(rng.integers(8, 31))
        p = p or int(rng.integers(1, 6))
        X = rng.standard_normal((self.n, p)) * rng.uniform(0.5, 3, p)
        coef = rng.standard_normal(p) * (rng.random(p) < 0.6)
        self.y = 2.0 + X @ coef + rng.uniform(0.3, 2.0) * rng.standard_normal(self.n)
        self.Phi1 = np.hstack([np.ones((self.n, 1)), X])
        self.x_phi1 = np.concatenate([[1.0], rng.standard_normal(p)])
        self.stats = SuffStats.from_data(self.Phi1, self.y)
        self.base = fit(self.stats)
        self.grid = conformal.make_grid(self.y, 60, 0.25)

    def scores(self, grid=None):
        return conformal.conformal_scores(
            self.stats, self.base.w, self.Phi1, self.y, self.x_phi1, grid or self.grid
        )


@pytest.fixture
def instance():
    return Instance
