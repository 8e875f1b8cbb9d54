import io

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from dane_sim.data import (gen_logistic, gen_ridge, logistic_link_probability,
                           normalize_rows, parse_libsvm, partition_even,
                           substream, write_libsvm)
from dane_sim.errors import ConfigError, ParseError
from dane_sim.model import LabeledDataset


class TestGenerators:
    def test_noiseless_ridge(self):
        data, w_bar = gen_ridge(50, 4, noise_sigma=0.0, seed=1)
        assert np.all(data.labels - data.features @ w_bar == 0.0)

    def test_deterministic(self):
        a, _ = gen_ridge(30, 3, seed=9)
        b, _ = gen_ridge(30, 3, seed=9)
        assert a.features.tobytes() == b.features.tobytes()
        assert a.labels.tobytes() == b.labels.tobytes()

    def test_covariance_concentrates(self):
        data, _ = gen_ridge(2000, 200, seed=0)
        ev = np.linalg.eigvalsh(data.features.T @ data.features / 2000)
        assert 0.3 <= ev[0] and ev[-1] <= 3.0

    def test_logistic_labels(self):
        data, _ = gen_logistic(500, 5, seed=2)
        assert set(np.unique(data.labels)) <= {-1.0, 1.0}

    def test_link_probabilities_sum_to_one(self, rng):
        w = rng.standard_normal(5)
        for _ in range(20):
            x = 3 * rng.standard_normal(5)
            total = logistic_link_probability(w, x, 1.0) + logistic_link_probability(w, x, -1.0)
            assert total == pytest.approx(1.0, abs=1e-15)

    def test_labels_follow_margin(self):
        data, w_bar = gen_logistic(10_000, 5, seed=3)
        agree = np.mean(np.sign(data.features @ w_bar) == data.labels)
        assert agree > 0.5

    def test_normalize_rows(self):
        data, _ = gen_ridge(40, 6, seed=1)
        assert np.max(normalize_rows(data).row_norms()) <= 1.0 + 1e-12


class TestLibsvm:
    def test_single_line(self):
        d = parse_libsvm("+1 1:0.5 3:2.0\n")
        assert d.n_samples == 1 and d.n_features >= 3
        np.testing.assert_array_equal(d.features[0, :3], [0.5, 0.0, 2.0])
        assert d.labels[0] == 1.0

    def test_zero_label_maps_to_minus_one(self):
        assert parse_libsvm(b"0 2:1\n").labels[0] == -1.0

    def test_decreasing_index_is_error(self):
        with pytest.raises(ParseError, match="line 1"):
            parse_libsvm("1 3:1 2:1\n")

    def test_reports_line_number(self):
        with pytest.raises(ParseError, match="line 3"):
            parse_libsvm("1 1:1\n# comment\n-1 1:x\n")

    @pytest.mark.parametrize("bad", ["1 0:1\n", "1 1:1:2\n", "2 1:1\n", "1 a:1\n",
                                     "1 1\n", "", "1 1:nan\n"])
    def test_rejects(self, bad):
        with pytest.raises(ParseError):
            parse_libsvm(bad)

    def test_sparse_storage(self):
        d = parse_libsvm("1 2:1\n-1 1:3\n", dense=False)
        assert sp.issparse(d.features)
        np.testing.assert_array_equal(d.features.toarray(), [[0, 1], [3, 0]])

    def test_round_trip(self):
        data, _ = gen_logistic(40, 7, seed=8)
        buf = io.StringIO()
        write_libsvm(data, buf)
        back = parse_libsvm(buf.getvalue(), n_features=7)
        np.testing.assert_allclose(back.features, data.features, atol=1e-12, rtol=0)
        np.testing.assert_array_equal(back.labels, data.labels)

    def test_round_trip_binary_stream(self):
        data, _ = gen_ridge(10, 3, seed=2)
        buf = io.BytesIO()
        write_libsvm(data, buf)
        back = parse_libsvm(buf.getvalue(), binary=False)
        np.testing.assert_array_equal(back.features, data.features)
        np.testing.assert_array_equal(back.labels, data.labels)


class TestPartition:
    def test_single_machine(self):
        parts = partition_even(10, 1, seed=0)
        assert sorted(parts[0].sample_indices) == list(range(10))

    def test_even_split(self):
        parts = partition_even(8, 4, seed=0)
        assert [len(p.sample_indices) for p in parts] == [2, 2, 2, 2]
        assert sorted(np.concatenate([p.sample_indices for p in parts])) == list(range(8))
        assert [p.machine_index for p in parts] == [1, 2, 3, 4]

    def test_truncates(self):
        parts = partition_even(10, 3, seed=0)
        idx = np.concatenate([p.sample_indices for p in parts])
        assert len(idx) == 9 and set(idx) == set(range(9))

    def test_seeded(self):
        a = partition_even(50, 5, seed=1)
        b = partition_even(50, 5, seed=1)
        c = partition_even(50, 5, seed=2)
        assert all(np.array_equal(x.sample_indices, y.sample_indices) for x, y in zip(a, b))
        assert not all(np.array_equal(x.sample_indices, y.sample_indices) for x, y in zip(a, c))

    def test_too_many_machines(self):
        with pytest.raises(ConfigError):
            partition_even(3, 4)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 300), st.integers(1, 40), st.integers(0, 2 ** 63))
def test_partition_invariant(N, m, seed):
    if m > N:
        with pytest.raises(ConfigError):
            partition_even(N, m, seed)
        return
    parts = partition_even(N, m, seed)
    n = N // m
    idx = np.concatenate([p.sample_indices for p in parts])
    assert all(len(p.sample_indices) == n for p in parts)
    assert len(np.unique(idx)) == m * n
    assert idx.min() >= 0 and idx.max() < m * n


def test_substreams_independent():
    a = substream(5, 0).random(4)
    b = substream(5, 1).random(4)
    assert not np.array_equal(a, b)
    np.testing.assert_array_equal(a, substream(5, 0).random(4))


def test_dataset_accepts_sparse():
    d = LabeledDataset(sp.random(5, 4, density=0.5, random_state=0), np.ones(5))
    assert d.is_sparse and d.n_features == 4
