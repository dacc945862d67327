import numpy as np
import pytest
from hypothesis import given, strategies as st

from cvsvm.baselines import (
    L1_C_GRID,
    argmax_smallest,
    l1_svm_objective,
    soft_threshold,
    svm_rfe,
    train_l1_svm,
    train_l2_svm,
    tune_l1_svm,
)
from cvsvm.datagen import generate_dataset
from cvsvm.exceptions import InvalidParameterError


class TestSoftThreshold:
    @pytest.mark.parametrize("v,t,expected", [(3.0, 1.0, 2.0), (-3.0, 1.0, -2.0), (0.5, 1.0, 0.0),
                                              (-1.0, 1.0, 0.0), (0.0, 0.0, 0.0)])
    def test_values(self, v, t, expected):
        assert soft_threshold(v, t) == expected

    @given(st.floats(-100, 100), st.floats(0, 10))
    def test_is_prox_of_abs(self, v, t):
        # prox minimizes t|u| + (u - v)^2 / 2; compare against a dense grid
        u = float(soft_threshold(v, t))
        grid = np.linspace(v - t - 1, v + t + 1, 2001)
        vals = t * np.abs(grid) + 0.5 * (grid - v) ** 2
        assert t * abs(u) + 0.5 * (u - v) ** 2 <= vals.min() + 1e-9


class TestL1Svm:
    def setup_method(self):
        data = generate_dataset(20, 100, 1.0, seed=0)
        self.X, self.y = data.features, data.labels

    def test_tiny_C_zeroes_weights(self):
        keep = np.flatnonzero(self.y > 0).tolist() + np.flatnonzero(self.y < 0)[:20].tolist()
        X, y = self.X[keep], self.y[keep]
        model = train_l1_svm(X, y, 1e-4)
        assert np.all(model.weights == 0.0)
        assert model.bias > 0
        assert np.all(np.sign(X @ model.weights + model.bias) == 1.0)

    def test_separable_two_points(self):
        X = np.array([[1.0], [-1.0]])
        y = np.array([1.0, -1.0])
        model = train_l1_svm(X, y, 100.0, tol=1e-10)
        assert model.weights[0] > 0
        assert np.all(np.sign(X @ model.weights + model.bias) == y)
        w1, b = np.meshgrid(np.linspace(0, 2, 801), np.linspace(-0.5, 0.5, 401))
        grid = np.abs(w1) + 100.0 * (np.maximum(0, 1 - (w1 + b)) ** 2 + np.maximum(0, 1 - (w1 - b)) ** 2)
        ours = l1_svm_objective(model.weights, model.bias, X, y, 100.0)
        assert ours <= grid.min() + 1e-9
        assert model.weights[0] == pytest.approx(1 - 1 / 400, abs=1e-6)

    def test_objective_non_increasing(self):
        model = train_l1_svm(self.X, self.y, 10.0)
        hist = np.array(model.objective_history)
        assert np.all(np.diff(hist) <= 0)
        assert model.converged

    @pytest.mark.parametrize("C", [0.01, 1.0, 1000.0])
    def test_kkt_at_solution(self, C):
        model = train_l1_svm(self.X, self.y, C, tol=1e-9)
        Xa = np.column_stack([self.X, np.ones(len(self.y))])
        theta = np.append(model.weights, model.bias)
        slack = np.maximum(0, 1 - self.y * (Xa @ theta))
        grad = -2 * C * Xa.T @ (self.y * slack)
        w, g = model.weights, grad[:-1]
        scale = max(1.0, np.abs(grad).max())
        assert abs(grad[-1]) <= 1e-5 * scale
        assert np.all(np.abs(g[w == 0]) <= 1 + 1e-5 * scale)
        assert np.all(np.abs(g[w != 0] + np.sign(w[w != 0])) <= 1e-5 * scale)

    def test_max_iter_flags_nonconvergence(self):
        model = train_l1_svm(self.X, self.y, 100.0, max_iter=3)
        assert not model.converged
        assert np.all(np.isfinite(model.weights))

    def test_invalid_C(self):
        with pytest.raises(InvalidParameterError):
            train_l1_svm(self.X, self.y, 0.0)

    def test_sparsity_path_is_reported(self):
        counts = [int(np.count_nonzero(train_l1_svm(self.X, self.y, C).weights)) for C in L1_C_GRID]
        violations = sum(b < a for a, b in zip(counts, counts[1:]))
        print(f"nonzeros along C grid: {counts}; monotonicity violations: {violations}")
        assert counts[0] <= counts[-1]


class TestTuneL1:
    def test_single_C(self):
        data = generate_dataset(5, 50, 1.0, seed=1)
        C, model = tune_l1_svm(data.features, data.labels, [0.1])
        assert C == 0.1 and model.C == 0.1

    def test_tie_goes_to_smallest(self):
        assert argmax_smallest([10.0, 0.1, 1.0], [0.5, 0.5, 0.5]) == 0.1
        assert argmax_smallest([10.0, 0.1, 1.0], [0.7, 0.5, 0.7]) == 1.0

    def test_paper_grid(self):
        data = generate_dataset(20, 100, 4.0, seed=2)
        C, model = tune_l1_svm(data.features, data.labels, L1_C_GRID, K=5, seed=2)
        assert C in L1_C_GRID
        assert model.converged

    def test_empty_grid(self):
        with pytest.raises(InvalidParameterError):
            tune_l1_svm(np.ones((4, 1)), np.array([1.0, -1, 1, -1]), [])


class TestL2Svm:
    def test_gradient_zero_at_solution(self):
        data = generate_dataset(6, 60, 1.0, seed=3)
        X, y = data.features, data.labels
        model = train_l2_svm(X, y, 1.0)
        f = X @ model.weights + model.bias
        slack = np.maximum(0, 1 - y * f)
        gw = model.weights - 2 * X.T @ (y * slack)
        gb = -2 * np.sum(y * slack)
        assert np.max(np.abs(gw)) < 1e-7 and abs(gb) < 1e-7


class TestSvmRfe:
    def test_single_feature(self):
        X = np.array([[1.0], [2.0], [-1.0], [-2.0], [0.5], [-0.5]])
        y = np.array([1.0, 1, -1, -1, 1, -1])
        res = svm_rfe(X, y, K=3, seed=0)
        assert res.ranking.tolist() == [0]
        assert res.chosen_mask.to_string() in ("0", "1")

    def test_planted_feature_eliminated_last(self):
        rng = np.random.default_rng(0)
        X = rng.standard_normal((80, 5))
        y = np.where(X[:, 0] >= 0, 1.0, -1.0)
        res = svm_rfe(X, y, K=5, seed=0)
        assert res.ranking[-1] == 0
        # cross-check: feature 0 alone is the best singleton by training accuracy
        accs = []
        for j in range(5):
            m = train_l2_svm(X[:, [j]], y, 1.0)
            accs.append(np.mean(np.sign(X[:, j] * m.weights[0] + m.bias) == y))
        assert int(np.argmax(accs)) == 0

    def test_ranking_permutation_and_size_rule(self):
        data = generate_dataset(10, 80, 1.0, seed=4)
        res = svm_rfe(data.features, data.labels, K=5, seed=4)
        assert sorted(res.ranking.tolist()) == list(range(10))
        acc = res.inner_cv_accuracy_by_size
        assert len(acc) == 10
        size = res.chosen_mask.cardinality
        assert acc[size - 1] == acc.max()
        assert np.all(acc[: size - 1] < acc.max())
        assert set(res.chosen_mask.support) == set(res.ranking[10 - size:].tolist())

    def test_rerun_bit_identical(self):
        data = generate_dataset(8, 60, 1.0, seed=5)
        a = svm_rfe(data.features, data.labels, K=5, seed=5)
        b = svm_rfe(data.features, data.labels, K=5, seed=5)
        assert a.ranking.tobytes() == b.ranking.tobytes()
        assert a.model.weights.tobytes() == b.model.weights.tobytes()
        assert a.to_dict() == b.to_dict()
