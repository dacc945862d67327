import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cvsvm.exceptions import InvalidParameterError, UndefinedMetricError
from cvsvm.lssvm import FeatureMask
from cvsvm.metrics import auc, feature_recovery, true_mask

import oracles


class TestAuc:
    def test_perfect_ranking(self):
        assert auc([0.1, 0.2, 0.8, 0.9], [-1, -1, 1, 1]) == 1.0

    def test_all_ties(self):
        assert auc(np.zeros(6), [1, -1, 1, -1, -1, 1]) == 0.5

    def test_three_point_example(self):
        assert auc([0.9, 0.6, 0.2], [1, -1, 1]) == 0.5
        assert oracles.pairwise_auc([0.9, 0.6, 0.2], [1, -1, 1]) == 0.5

    @pytest.mark.parametrize("labels", [[1, 1, 1], [-1, -1]])
    def test_single_class(self, labels):
        with pytest.raises(UndefinedMetricError):
            auc(np.arange(len(labels)), labels)

    def test_length_mismatch(self):
        with pytest.raises(InvalidParameterError):
            auc([0.1, 0.2], [1])

    @settings(max_examples=50, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 200))
    def test_matches_pairwise_oracle(self, seed, n):
        rng = np.random.default_rng(seed)
        scores = np.round(rng.standard_normal(n), 1)  # rounding forces ties
        labels = rng.choice([-1, 1], size=n)
        labels[0], labels[1] = 1, -1
        assert auc(scores, labels) == pytest.approx(oracles.pairwise_auc(scores, labels), abs=1e-12)

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1))
    def test_monotone_transform_invariance(self, seed):
        rng = np.random.default_rng(seed)
        scores = rng.standard_normal(50)
        labels = np.where(rng.random(50) < 0.5, 1, -1)
        labels[:2] = (1, -1)
        base = auc(scores, labels)
        assert auc(np.exp(scores), labels) == pytest.approx(base, abs=1e-12)
        assert auc(3.0 * scores - 7.0, labels) == pytest.approx(base, abs=1e-12)

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), tied=st.booleans())
    def test_negation_complements(self, seed, tied):
        rng = np.random.default_rng(seed)
        scores = rng.integers(0, 4, 40).astype(float) if tied else rng.standard_normal(40)
        labels = np.where(rng.random(40) < 0.5, 1, -1)
        labels[:2] = (1, -1)
        assert auc(scores, labels) + auc(-scores, labels) == pytest.approx(1.0, abs=1e-12)


class TestFeatureRecovery:
    def test_identity(self):
        z = FeatureMask.from_string("10101")
        r = feature_recovery(z, z)
        assert (r.precision, r.recall, r.f1, r.nonzeros) == (1.0, 1.0, 1.0, 3)

    def test_all_ones_against_alternating(self):
        z_star = true_mask(np.tile([1.0, 0.0], 10))
        r = feature_recovery(FeatureMask.full(20), z_star)
        assert r.precision == 0.5 and r.recall == 1.0
        assert r.f1 == pytest.approx(2 / 3, abs=1e-15)
        assert r.nonzeros == 20

    def test_empty_selection(self):
        r = feature_recovery(FeatureMask.empty(4), FeatureMask.from_string("1100"))
        assert (r.precision, r.recall, r.f1, r.nonzeros) == (0.0, 0.0, 0.0, 0)

    def test_disjoint(self):
        r = feature_recovery("0011", FeatureMask.from_string("1100"))
        assert r.f1 == 0.0

    def test_length_mismatch(self):
        with pytest.raises(InvalidParameterError):
            feature_recovery(FeatureMask.full(3), FeatureMask.full(4))

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.tuples(st.booleans(), st.booleans()), min_size=1, max_size=30))
    def test_matches_set_count_oracle(self, pairs):
        z_hat = np.array([a for a, _ in pairs])
        z_star = np.array([b for _, b in pairs])
        r = feature_recovery(z_hat, z_star)
        p, rc, f1, nz = oracles.set_recovery(z_hat, z_star)
        assert (r.precision, r.recall, r.nonzeros) == (pytest.approx(p), pytest.approx(rc), nz)
        assert r.f1 == pytest.approx(f1)
        if r.precision > 0 and r.recall > 0:
            assert min(r.precision, r.recall) - 1e-12 <= r.f1 <= max(r.precision, r.recall) + 1e-12
