import numpy as np
import pytest

from crm.errors import ConfigError, RowError, SchemaError
from crm.process import (Chunk, Observation, ProcessDescriptor, gen_iid, gen_markov_label,
                         gen_regime_drift, ingest_csv, swapped_regimes, symmetric_chain)


def labels(seq):
    return [o.label for o in seq]


class TestIID:
    def test_point_mass(self):
        d = ProcessDescriptor("iid", {"class_probs": [1.0, 0.0]}, 2, 0, 3)
        assert labels(gen_iid(d, 3)) == [0, 0, 0]

    def test_bernoulli_frequency(self):
        d = ProcessDescriptor("iid", {"class_probs": [0.5, 0.5]}, 2, 0, 11)
        freq = np.mean(labels(gen_iid(d, 10000)))
        assert abs(freq - 0.5) <= 0.02

    def test_deterministic(self):
        d = ProcessDescriptor("iid", {"class_probs": [0.3, 0.7]}, 2, 3, 5)
        a, b = gen_iid(d, 200), gen_iid(d, 200)
        assert labels(a) == labels(b)
        assert all(np.array_equal(x.features, y.features) for x, y in zip(a, b))

    def test_time_index_starts_at_one(self):
        seq = gen_iid(ProcessDescriptor("iid", {}, 3, 1, 0), 4)
        assert [o.time_index for o in seq] == [1, 2, 3, 4]

    @pytest.mark.parametrize("probs", [[0.6, 0.6], [1.2, -0.2], [1.0]])
    def test_invalid_probabilities(self, probs):
        with pytest.raises(ConfigError):
            gen_iid(ProcessDescriptor("iid", {"class_probs": probs}, 2, 0, 0), 5)


class TestMarkov:
    def test_identity_absorbing(self):
        d = ProcessDescriptor("markov_label", {"transition": np.eye(3), "start": 1}, 3, 0, 0)
        assert labels(gen_markov_label(d, 5)) == [1, 1, 1, 1, 1]

    def test_cyclic_permutation(self):
        P = [[0, 1, 0], [0, 0, 1], [1, 0, 0]]
        d = ProcessDescriptor("markov_label", {"transition": P, "start": 0}, 3, 0, 9)
        assert labels(gen_markov_label(d, 6)) == [0, 1, 2, 0, 1, 2]

    def test_symmetric_chain_statistics(self):
        d = ProcessDescriptor("markov_label", {"transition": symmetric_chain(2, 0.8)}, 2, 0, 1)
        y = np.array(labels(gen_markov_label(d, 50000)))
        stay = np.mean(y[1:] == y[:-1])
        assert abs(stay - 0.8) <= 0.01
        assert abs(y.mean() - 0.5) <= 0.01

    def test_transition_frequencies_converge(self):
        P = np.array([[0.1, 0.6, 0.3], [0.5, 0.25, 0.25], [0.2, 0.2, 0.6]])
        d = ProcessDescriptor("markov_label", {"transition": P}, 3, 0, 4)
        y = np.array(labels(gen_markov_label(d, 50000)))
        counts = np.zeros((3, 3))
        np.add.at(counts, (y[:-1], y[1:]), 1)
        empirical = counts / counts.sum(1, keepdims=True)
        assert np.abs(empirical - P).max() <= 0.02

    def test_encoded_features(self):
        d = ProcessDescriptor("markov_label", {"transition": symmetric_chain(3, 0.5),
                                               "encode_label": True}, 3, 3, 2)
        for o in gen_markov_label(d, 20):
            assert o.features.tolist() == np.eye(3)[o.label].tolist()

    def test_non_stochastic_rejected(self):
        with pytest.raises(ConfigError, match="row 1"):
            gen_markov_label(ProcessDescriptor("markov_label", {"transition": [[1, 0], [0.5, 0.4]]},
                                               2, 0, 0), 5)

    def test_deterministic(self):
        d = ProcessDescriptor("markov_label", {"transition": symmetric_chain(2, 0.7)}, 2, 0, 77)
        assert labels(gen_markov_label(d, 500)) == labels(gen_markov_label(d, 500))


class TestRegimeDrift:
    def desc(self, means, period=100, seed=0, noise=1.0):
        return ProcessDescriptor("regime_drift", {"means": means, "period": period, "noise": noise},
                                 2, 2, seed)

    def test_single_regime_is_stationary(self):
        means = swapped_regimes(3.0)[:1]
        seq = gen_regime_drift(self.desc(means, period=10), 4000)
        X = np.array([o.features for o in seq])
        y = np.array(labels(seq))
        first, second = slice(0, 2000), slice(2000, 4000)
        for c in (0, 1):
            m1 = X[first][y[first] == c].mean(0)
            m2 = X[second][y[second] == c].mean(0)
            assert np.abs(m1 - m2).max() < 0.15

    def test_swapped_means(self):
        means = swapped_regimes(4.0)
        seq = gen_regime_drift(self.desc(means, period=100, noise=0.1), 200)
        X = np.array([o.features for o in seq])
        y = np.array(labels(seq))
        for c in (0, 1):
            a = X[:100][y[:100] == c].mean(0)
            b = X[100:][y[100:] == c].mean(0)
            # class c moves from means[0][c] to means[1][c]
            np.testing.assert_allclose(b - a, means[1][c] - means[0][c], atol=0.1)

    def test_period_must_be_positive(self):
        with pytest.raises(ConfigError):
            gen_regime_drift(self.desc(swapped_regimes(1.0), period=0), 10)

    def test_deterministic(self):
        d = self.desc(swapped_regimes(2.0), seed=5)
        a, b = gen_regime_drift(d, 300), gen_regime_drift(d, 300)
        assert all(np.array_equal(x.features, y.features) and x.label == y.label for x, y in zip(a, b))


class TestCsv:
    def write(self, tmp_path, text):
        p = tmp_path / "data.csv"
        p.write_text(text, encoding="utf-8")
        return p

    def test_rows_without_key(self, tmp_path):
        p = self.write(tmp_path, "x1,x2,y\n0.5,1.0,1\n2,3,0\n4,5,1\n")
        chunks = ingest_csv(p, {"label": "y", "features": ["x1", "x2"]})
        assert [len(c) for c in chunks] == [1, 1, 1]
        first = chunks[0].members[0]
        assert first.features.tolist() == [0.5, 1.0] and first.label == 1
        assert [c.time_index for c in chunks] == [1, 2, 3]

    def test_grouping_by_key(self, tmp_path):
        p = self.write(tmp_path, "k,x,y\na,1,0\na,2,1\nb,3,1\nb,4,0\n")
        chunks = ingest_csv(p, {"label": "y", "features": ["x"]}, chunk_key="k")
        assert [len(c) for c in chunks] == [2, 2]

    def test_first_appearance_order(self, tmp_path):
        p = self.write(tmp_path, "k,y\nz,0\na,1\nz,1\nm,0\n")
        chunks = ingest_csv(p, {"label": "y"}, chunk_key="k")
        assert [[o.label for o in c.members] for c in chunks] == [[0, 1], [1], [0]]

    def test_missing_column(self, tmp_path):
        p = self.write(tmp_path, "x,y\n1,0\n")
        with pytest.raises(SchemaError, match="x2"):
            ingest_csv(p, {"label": "y", "features": ["x", "x2"]})

    def test_bad_cell_reports_line(self, tmp_path):
        p = self.write(tmp_path, "x,y\n1,0\nfoo,1\n")
        with pytest.raises(RowError) as err:
            ingest_csv(p, {"label": "y", "features": ["x"]})
        assert err.value.line == 3

    def test_negative_label_rejected(self, tmp_path):
        p = self.write(tmp_path, "x,y\n1,-1\n")
        with pytest.raises(RowError):
            ingest_csv(p, {"label": "y", "features": ["x"]})


def test_chunk_requires_shared_time_index():
    with pytest.raises(ConfigError):
        Chunk((Observation([1.0], 0, 1), Observation([2.0], 1, 2)))
