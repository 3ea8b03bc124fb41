import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cfpredict.solver import (
    FitResult,
    SuffStats,
    coordinate_update,
    cost,
    descend,
    fit,
    predict_mean,
    reg_weights,
    stats_add,
    stats_remove,
)
from oracles import cvx_sqrt_lasso, golden_section_1d, subgradient_oracle
from problems import random_problem, random_tuple


class TestSuffStats:
    def test_single_sample(self):
        s = stats_add(SuffStats.empty(0), np.array([1.0]), 3.0)
        assert s.gram.tolist() == [[1.0]]
        assert s.cross.tolist() == [3.0]
        assert s.energy == 9.0 and s.n == 1

    def test_add_remove_roundtrip(self):
        rng = np.random.default_rng(1)
        Phi1, y = random_problem(rng, 20, 4)
        s = SuffStats.from_data(Phi1, y)
        phi, yy = np.r_[1.0, rng.standard_normal(4)], 2.5
        back = stats_remove(stats_add(s, phi, yy), phi, yy)
        assert back.n == s.n
        np.testing.assert_allclose(back.gram, s.gram, rtol=1e-12, atol=1e-12 * np.abs(s.gram).max())
        np.testing.assert_allclose(back.cross, s.cross, rtol=1e-12, atol=1e-12 * np.abs(s.cross).max())
        assert back.energy == pytest.approx(s.energy, rel=1e-12)
        again = stats_add(stats_remove(s, Phi1[0], y[0]), Phi1[0], y[0])
        np.testing.assert_allclose(again.gram, s.gram, rtol=1e-12)

    def test_remove_only_sample(self):
        s = stats_add(SuffStats.empty(2), np.array([1.0, 2.0, -1.0]), 4.0)
        e = stats_remove(s, np.array([1.0, 2.0, -1.0]), 4.0)
        assert e.n == 0 and e.energy == 0 and not e.gram.any() and not e.cross.any()

    def test_remove_from_empty(self):
        with pytest.raises(ValueError):
            stats_remove(SuffStats.empty(1), np.ones(2), 1.0)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            stats_add(SuffStats.empty(2), np.ones(2), 1.0)

    def test_sequential_equals_batch_and_permutation(self):
        rng = np.random.default_rng(2)
        Phi1, y = random_problem(rng, 30, 5)
        seq = SuffStats.empty(5)
        for phi, yy in zip(Phi1, y):
            seq = stats_add(seq, phi, yy)
        batch = SuffStats.from_data(Phi1, y)
        perm = rng.permutation(30)
        shuffled = SuffStats.from_data(Phi1[perm], y[perm])
        for other in (seq, shuffled):
            np.testing.assert_allclose(other.gram, batch.gram, rtol=1e-12)
            np.testing.assert_allclose(other.cross, batch.cross, rtol=1e-12)
            assert other.energy == pytest.approx(batch.energy, rel=1e-12)
        assert batch.gram[0, 0] == 30
        assert np.all(np.linalg.eigvalsh(batch.gram) > -1e-9 * batch.gram.max())


class TestRegWeights:
    def test_values(self):
        Phi1 = np.array([[1, 3.0], [1, 4.0]])
        lam = reg_weights(SuffStats.from_data(Phi1, np.zeros(2)))
        # sqrt(mean(phi^2) / n) = sqrt((9 + 16) / 2 / 2)
        assert lam[0] == 0
        assert lam[1] == pytest.approx(math.sqrt(25 / 4))


class TestCost:
    def test_zero_data(self):
        s = SuffStats.from_data(np.ones((3, 1)), np.zeros(3))
        assert cost(s, reg_weights(s), np.zeros(1)) == 0

    def test_hand_value(self):
        s = SuffStats.from_data(np.ones((2, 1)), np.array([1.0, 3.0]))
        # residuals -1 and +1: sqrt((10 - 2*2*4 + 2*2*2) / 2) = 1
        direct = math.sqrt(((1 - 2) ** 2 + (3 - 2) ** 2) / 2)
        assert cost(s, reg_weights(s), np.array([2.0])) == pytest.approx(direct) == 1.0

    def test_zero_weights(self):
        rng = np.random.default_rng(3)
        s = SuffStats.from_data(*random_problem(rng))
        assert cost(s, reg_weights(s), np.zeros(s.dim)) == pytest.approx(math.sqrt(s.energy / s.n))


class TestCoordinateUpdate:
    def test_zero_correlation(self):
        assert coordinate_update(2.0, 0.0, 3.0, 0.1, 5) == 0

    def test_unpenalised(self):
        assert coordinate_update(2.0, 6.0, 100.0, 0.0, 5) == pytest.approx(3.0)

    def test_dead_column(self):
        assert coordinate_update(0.0, 1.0, 1.0, 0.1, 5) == 0

    def test_golden_section_example(self):
        w = coordinate_update(1.0, 0.9, 1.0, 0.2, 4)
        assert abs(w - golden_section_1d(1.0, 0.9, 1.0, 0.2, 4)) <= 1e-8

    def test_vectorised(self):
        out = coordinate_update(np.array([2.0, 2.0]), np.array([6.0, 0.0]), 10.0, 0.0, 3)
        assert out.tolist() == [3.0, 0.0]

    def test_against_golden_section(self):
        rng = np.random.default_rng(4)
        for _ in range(300):
            a, b, c, lam, n = random_tuple(rng)
            assert abs(coordinate_update(a, b, c, lam, n) - golden_section_1d(a, b, c, lam, n)) <= 1e-8

    @given(
        st.floats(0.01, 50),
        st.floats(-10, 10).filter(lambda b: b == 0 or abs(b) > 1e-100),
        st.floats(0, 20),
        st.floats(0, 0.999),
        st.integers(1, 200),
    )
    def test_threshold(self, a, b, extra, frac, n):
        # frac < 1 keeps alpha > n * lam^2, the regime where the step is defined
        lam = frac * math.sqrt(a / n)
        c = b * b / a + extra
        w = coordinate_update(a, b, c, lam, n)
        assert (w == 0) == (abs(b) <= lam * math.sqrt(n * c))


class TestFit:
    def test_zero_outcomes(self):
        rng = np.random.default_rng(5)
        Phi1, _ = random_problem(rng, 10, 3)
        s = SuffStats.from_data(Phi1, np.zeros(10))
        res = fit(s)
        assert not res.w.any() and res.cost == 0

    def test_constant_outcomes(self):
        rng = np.random.default_rng(6)
        Phi1, _ = random_problem(rng, 25, 4)
        s = SuffStats.from_data(Phi1, np.full(25, 5.0))
        res = fit(s)
        assert res.w[0] == pytest.approx(5.0, abs=1e-9)
        np.testing.assert_allclose(res.w[1:], 0, atol=1e-9)
        assert res.cost <= 1e-9

    @pytest.mark.filterwarnings("ignore:Solution may be inaccurate")
    def test_against_conic_solver(self):
        rng = np.random.default_rng(7)
        for _ in range(25):
            Phi1, y = random_problem(rng)
            s = SuffStats.from_data(Phi1, y)
            lam = reg_weights(s)
            ref, _ = cvx_sqrt_lasso(Phi1, y, lam)
            got = fit(s, lam).cost
            assert got <= ref * (1 + 1e-7) + 1e-9
            assert got == pytest.approx(ref, rel=1e-6)

    def test_against_subgradient(self):
        rng = np.random.default_rng(8)
        for _ in range(5):
            Phi1, y = random_problem(rng)
            s = SuffStats.from_data(Phi1, y)
            lam = reg_weights(s)
            ref, _ = subgradient_oracle(s.gram, s.cross, s.energy, float(s.n), lam, 20_000)
            assert fit(s, lam).cost <= ref + 1e-6 * (1 + abs(ref))

    def test_never_worse_than_start(self):
        rng = np.random.default_rng(9)
        for _ in range(20):
            Phi1, y = random_problem(rng)
            s = SuffStats.from_data(Phi1, y)
            lam = reg_weights(s)
            w0 = rng.standard_normal(s.dim)
            assert fit(s, lam, w0).cost <= cost(s, lam, w0) + 1e-12

    def test_monotone_sweeps(self):
        rng = np.random.default_rng(10)
        Phi1, y = random_problem(rng, 40, 8)
        s = SuffStats.from_data(Phi1, y)
        lam = reg_weights(s)
        w = np.zeros(s.dim)
        prev = cost(s, lam, w)
        for _ in range(30):
            w = fit(s, lam, w, tol=0.0, max_sweeps=1).w
            now = cost(s, lam, w)
            assert now <= prev + 1e-12
            prev = now

    def test_max_sweeps_flag(self):
        # Collinear hinge-like columns keep plain sweeps from finishing in one pass.
        x = np.linspace(0, 10, 30)
        Phi1 = np.column_stack([np.ones(30), x, np.maximum(x - 3, 0), np.maximum(x - 6, 0)])
        s = SuffStats.from_data(Phi1, np.sqrt(x) + 0.1 * np.sin(7 * x))
        res = fit(s, max_sweeps=1)
        assert res.sweeps == 1 and not res.converged
        assert fit(s).converged

    def test_zero_column_skipped(self):
        rng = np.random.default_rng(11)
        Phi1, y = random_problem(rng, 20, 3)
        Phi1[:, 2] = 0
        assert fit(SuffStats.from_data(Phi1, y)).w[2] == 0

    def test_permutation_invariance(self):
        rng = np.random.default_rng(12)
        Phi1, y = random_problem(rng, 30, 6)
        perm = rng.permutation(30)
        a = fit(SuffStats.from_data(Phi1, y)).w
        b = fit(SuffStats.from_data(Phi1[perm], y[perm])).w
        np.testing.assert_allclose(a, b, rtol=1e-9, atol=1e-10)

    @pytest.mark.parametrize("scale", [0.01, 100.0])
    def test_column_scaling_invariance(self, scale):
        rng = np.random.default_rng(13)
        Phi1, y = random_problem(rng, 40, 6)
        base = Phi1 @ fit(SuffStats.from_data(Phi1, y)).w
        for j in range(1, Phi1.shape[1]):
            scaled = Phi1.copy()
            scaled[:, j] *= scale
            pred = scaled @ fit(SuffStats.from_data(scaled, y)).w
            assert np.sqrt(np.mean((pred - base) ** 2)) <= 1e-6

    def test_batch_rows_independent(self):
        rng = np.random.default_rng(14)
        Phi1, y = random_problem(rng, 25, 5)
        s = SuffStats.from_data(Phi1, y)
        lam = reg_weights(s)
        ys = np.stack([y, y + 1, 2 * y])
        cross = ys @ Phi1
        energy = (ys * ys).sum(axis=1)
        W, _, _, _ = descend(s.gram, cross, energy, s.n, lam, np.zeros(s.dim))
        for k in range(3):
            single = fit(SuffStats(s.gram, cross[k], energy[k], s.n), lam).w
            assert np.array_equal(W[k], single)

    def test_fit_result_json(self):
        res = fit(SuffStats.from_data(np.ones((2, 1)), np.array([1.0, 3.0])))
        doc = json.loads(res.to_json())
        assert doc["w"] == pytest.approx([2.0]) and doc["converged"] is True
        assert isinstance(res, FitResult)


class TestPredictMean:
    def test_zero_weights(self):
        assert predict_mean(np.zeros(3), np.array([1.0, 2.0, 3.0])) == 0

    def test_intercept_only(self):
        assert predict_mean(np.array([4.5, 0, 0]), np.array([1.0, 7.0, -2.0])) == 4.5

    def test_dot_product(self):
        rng = np.random.default_rng(15)
        w, phi = rng.standard_normal(6), rng.standard_normal(6)
        assert predict_mean(w, phi) == pytest.approx(sum(a * b for a, b in zip(w, phi)), rel=1e-12)

    def test_mismatch(self):
        with pytest.raises(ValueError):
            predict_mean(np.zeros(3), np.zeros(2))
