import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cvsvm.datagen import (
    Dataset,
    FoldPartition,
    generate_dataset,
    make_covariance,
    make_true_coefficients,
    noise_variance,
    partition_folds,
)
from cvsvm.exceptions import InvalidParameterError

from oracles import PAPER_SIGNAL_VARIANCE


class TestCoefficientsAndCovariance:
    def test_alternating_true_coefficients(self):
        w = make_true_coefficients(6)
        np.testing.assert_array_equal(w, [1, 0, 1, 0, 1, 0])

    def test_covariance_powers(self):
        expected = [[1, 0.5, 0.25], [0.5, 1, 0.5], [0.25, 0.5, 1]]
        np.testing.assert_allclose(make_covariance(3, 0.5), expected, rtol=0, atol=0)

    def test_identity_noise_variance_counts_ones(self):
        w = np.array([1.0, 0, 1, 1, 0])
        assert noise_variance(w, np.eye(5), 1.0) == pytest.approx(3.0)

    def test_default_signal_variance(self):
        sigma = make_covariance(20, 0.35)
        w = make_true_coefficients(20)
        assert noise_variance(w, sigma, 1.0) == pytest.approx(PAPER_SIGNAL_VARIANCE, rel=1e-14)

    def test_snr_scaling_is_exact(self):
        sigma = make_covariance(20, 0.35)
        w = make_true_coefficients(20)
        assert noise_variance(w, sigma, 4.0) * 4.0 == pytest.approx(noise_variance(w, sigma, 1.0), rel=1e-15)

    @pytest.mark.parametrize("snr", [0.0, -1.0])
    def test_nonpositive_snr_rejected(self, snr):
        with pytest.raises(InvalidParameterError):
            noise_variance(np.ones(2), np.eye(2), snr)

    @given(st.floats(0.1, 10.0))
    def test_noise_variance_homogeneous(self, c):
        sigma = make_covariance(8, 0.35)
        w = make_true_coefficients(8)
        assert noise_variance(c * w, sigma, 2.0) == pytest.approx(c * c * noise_variance(w, sigma, 2.0), rel=1e-12)


class TestGenerateDataset:
    def test_deterministic(self):
        a = generate_dataset(20, 500, 1.0, seed=3)
        b = generate_dataset(20, 500, 1.0, seed=3)
        assert a.features.tobytes() == b.features.tobytes()
        assert a.labels.tobytes() == b.labels.tobytes()

    def test_seeds_differ(self):
        a = generate_dataset(5, 50, 1.0, seed=0)
        b = generate_dataset(5, 50, 1.0, seed=1)
        assert not np.array_equal(a.features, b.features)

    def test_huge_snr_gives_noiseless_labels(self):
        data = generate_dataset(20, 2000, 1e12, seed=7)
        t = data.features @ data.true_coefficients
        np.testing.assert_array_equal(data.labels, np.where(t >= 0, 1.0, -1.0))

    def test_sample_covariance(self):
        data = generate_dataset(6, 100_000, 1.0, seed=11)
        cov = np.cov(data.features, rowvar=False)
        assert np.max(np.abs(cov - make_covariance(6))) < 0.02

    def test_metadata(self):
        data = generate_dataset(4, 10, 2.0, seed=5)
        assert (data.n, data.p, data.seed, data.snr) == (10, 4, 5, 2.0)
        np.testing.assert_array_equal(data.true_support, [True, False, True, False])

    def test_split_takes_leading_rows(self):
        data = generate_dataset(20, 300, 1.0, seed=0)
        train, test = data.split(100)
        np.testing.assert_array_equal(train.features, data.features[:100])
        assert test.n == 200

    def test_split_bounds(self):
        data = generate_dataset(3, 10, 1.0, seed=0)
        with pytest.raises(InvalidParameterError):
            data.split(10)


class TestDatasetValidation:
    def test_rejects_non_pm_labels(self):
        with pytest.raises(InvalidParameterError):
            Dataset(np.zeros((2, 1)), [0, 1])

    def test_rejects_shape_mismatch(self):
        with pytest.raises(InvalidParameterError):
            Dataset(np.zeros((3, 1)), [1, -1])

    def test_rejects_nan(self):
        with pytest.raises(ArithmeticError):
            Dataset(np.array([[np.nan]]), [1])


class TestCsvRoundTrip:
    def test_exact_round_trip(self, tmp_path):
        data = generate_dataset(5, 40, 0.25, seed=2)
        path = tmp_path / "d.csv"
        data.to_csv(path)
        back = Dataset.from_csv(path)
        assert back.features.tobytes() == data.features.tobytes()
        np.testing.assert_array_equal(back.labels, data.labels)
        np.testing.assert_array_equal(back.true_coefficients, data.true_coefficients)
        assert (back.seed, back.snr) == (2, 0.25)

    def test_header_and_sidecar(self, tmp_path):
        data = generate_dataset(3, 4, 1.0, seed=0)
        path = tmp_path / "d.csv"
        data.to_csv(path)
        assert path.read_text().splitlines()[0] == "y,x1,x2,x3"
        meta = json.loads(path.with_suffix(".json").read_text())
        assert set(meta) == {"p", "n", "snr", "seed", "w_star"}
        assert meta["w_star"] == [1.0, 0.0, 1.0]

    def test_without_sidecar(self, tmp_path):
        data = generate_dataset(3, 4, 1.0, seed=0)
        path = tmp_path / "d.csv"
        data.to_csv(path, sidecar=False)
        back = Dataset.from_csv(path)
        assert back.true_coefficients is None


class TestPartitionFolds:
    def test_paper_folds(self):
        folds = partition_folds(100, 5, seed=0)
        np.testing.assert_array_equal(folds.sizes(), [20] * 5)

    def test_leave_one_out(self):
        folds = partition_folds(6, 6, seed=0)
        np.testing.assert_array_equal(folds.sizes(), [1] * 6)

    def test_uneven_sizes(self):
        assert sorted(partition_folds(7, 3, seed=0).sizes().tolist()) == [2, 2, 3]

    @pytest.mark.parametrize("n,K", [(3, 4), (3, 0)])
    def test_invalid_K(self, n, K):
        with pytest.raises(InvalidParameterError):
            partition_folds(n, K, seed=0)

    def test_deterministic(self):
        a = partition_folds(50, 5, seed=9)
        b = partition_folds(50, 5, seed=9)
        np.testing.assert_array_equal(a.fold_of_sample, b.fold_of_sample)

    @settings(max_examples=60, deadline=None)
    @given(n=st.integers(1, 200), data=st.data())
    def test_partition_invariants(self, n, data):
        K = data.draw(st.integers(1, n))
        seed = data.draw(st.integers(0, 2**32 - 1))
        folds = partition_folds(n, K, seed)
        members = np.concatenate([folds.validation_indices(k) for k in range(K)])
        np.testing.assert_array_equal(np.sort(members), np.arange(n))
        sizes = folds.sizes()
        assert sizes.max() - sizes.min() <= 1
        for k in range(K):
            assert np.intersect1d(folds.train_indices(k), folds.validation_indices(k)).size == 0

    def test_relabel_permutes_ids(self):
        folds = partition_folds(10, 3, seed=1)
        moved = folds.relabel([2, 0, 1])
        assert isinstance(moved, FoldPartition)
        for k in range(3):
            np.testing.assert_array_equal(folds.validation_indices(k), moved.validation_indices([2, 0, 1][k]))
