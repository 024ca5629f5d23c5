import numpy as np
import pytest

from aoisched import (
    ConflictGraph,
    ExplicitSets,
    KofN,
    Network,
    RngStream,
    enumerate_feasible_sets,
    is_feasible,
    sample_channel,
    sample_channel_matrix,
)
from conftest import all_subsets, random_instance


class TestNetwork:
    def test_valid_construction(self):
        net = Network([1.0, 2.0], [0.5, 1.0])
        assert net.n_links == 2
        assert net.total_weight == 3.0

    def test_rejects_zero_gamma(self):
        with pytest.raises(ValueError):
            Network([1.0], [0.0])

    def test_rejects_gamma_above_one(self):
        with pytest.raises(ValueError):
            Network([1.0], [1.5])

    def test_rejects_nonpositive_weight(self):
        with pytest.raises(ValueError):
            Network([0.0, 1.0], [0.5, 0.5])

    def test_rejects_length_mismatch(self):
        with pytest.raises(ValueError):
            Network([1.0, 1.0], [0.5])

    def test_immutable(self):
        net = Network([1.0], [0.5])
        with pytest.raises(AttributeError):
            net.n_links = 2
        with pytest.raises(ValueError):
            net.gamma[0] = 0.9

    def test_good_bad_template(self):
        net = Network.good_bad(6, 0.9, 0.1, 2)
        assert list(net.gamma) == [0.9, 0.9, 0.9, 0.9, 0.1, 0.1]
        with pytest.raises(ValueError):
            Network.good_bad(4, 0.9, 0.1, 5)


class TestChannelSampling:
    def test_certain_channels_always_on(self):
        net = Network([1.0, 1.0], [1.0, 1.0])
        rng = RngStream(0)
        for _ in range(50):
            assert sample_channel(net, rng).all()

    def test_empirical_frequency_half(self):
        # law of large numbers at T=1e5: frequency within 0.01 of 0.5
        net = Network([1.0, 1.0], [0.5, 0.5])
        s = sample_channel_matrix(net, RngStream(123), 100_000)
        freq = s.mean(axis=0)
        assert np.all(np.abs(freq - 0.5) < 0.01)

    def test_good_bad_frequencies_within_three_binomial_ses(self):
        net = Network.good_bad(20, 0.9, 0.1, 5)
        t = 100_000
        s = sample_channel_matrix(net, RngStream(7), t)
        freq = s.mean(axis=0)
        se = np.sqrt(net.gamma * (1.0 - net.gamma) / t)
        assert np.all(np.abs(freq - net.gamma) <= 3.0 * se)

    def test_frequency_within_four_ses_many_seeds(self):
        net = Network([1.0, 1.0, 1.0], [0.2, 0.55, 0.95])
        t = 20_000
        bound = 4.0 * np.sqrt(net.gamma * (1.0 - net.gamma) / t)
        for seed in range(10):
            freq = sample_channel_matrix(net, RngStream(seed), t).mean(axis=0)
            assert np.all(np.abs(freq - net.gamma) <= bound)

    def test_same_seed_bit_identical(self):
        net = Network.good_bad(8, 0.8, 0.2, 3)
        a = sample_channel_matrix(net, RngStream(42), 5000)
        b = sample_channel_matrix(net, RngStream(42), 5000)
        assert np.array_equal(a, b)

    def test_substreams_differ(self):
        net = Network([1.0] * 8, [0.5] * 8)
        a = sample_channel_matrix(net, RngStream(42).substream(0), 1000)
        b = sample_channel_matrix(net, RngStream(42).substream(1), 1000)
        assert not np.array_equal(a, b)

    def test_matrix_matches_successive_single_draws(self):
        # the documented draw order: slot-major, increasing link index
        net = Network([1.0, 1.0, 1.0], [0.3, 0.6, 0.9])
        matrix = sample_channel_matrix(net, RngStream(5), 200)
        rng = RngStream(5)
        singles = np.array([sample_channel(net, rng) for _ in range(200)])
        assert np.array_equal(matrix, singles)


class TestFeasibility:
    def test_kofn_cardinality_rule(self):
        intf = KofN(2, 1)
        assert not is_feasible(intf, {0, 1})
        assert is_feasible(intf, {0})
        assert is_feasible(intf, set())

    def test_conflict_graph_independence_rule(self):
        intf = ConflictGraph(2, [(0, 1)])
        assert not is_feasible(intf, {0, 1})
        assert is_feasible(intf, {0})

    def test_explicit_sets_membership_rule(self):
        intf = ExplicitSets(2, [[0], [1]])
        assert not is_feasible(intf, {0, 1})
        assert is_feasible(intf, {1})
        assert is_feasible(intf, set())  # implicitly feasible

    def test_invalid_link_index_raises(self):
        for intf in (KofN(3, 2), ConflictGraph(3, [(0, 1)]), ExplicitSets(3, [[0]])):
            with pytest.raises(ValueError):
                is_feasible(intf, {0, 7})

    def test_conflict_graph_rejects_self_loop(self):
        with pytest.raises(ValueError):
            ConflictGraph(3, [(1, 1)])

    def test_kofn_rejects_bad_k(self):
        with pytest.raises(ValueError):
            KofN(3, 0)
        with pytest.raises(ValueError):
            KofN(3, 4)


class TestEnumeration:
    def test_kofn_single_slot(self):
        assert enumerate_feasible_sets(KofN(2, 1)) == [(0,), (1,)]

    def test_kofn_two_of_three(self):
        assert enumerate_feasible_sets(KofN(3, 2)) == [
            (0,), (1,), (2,), (0, 1), (0, 2), (1, 2),
        ]

    def test_triangle_conflict_graph(self):
        intf = ConflictGraph(3, [(0, 1), (1, 2), (0, 2)])
        assert enumerate_feasible_sets(intf) == [(0,), (1,), (2,)]

    def test_explicit_sets_returns_stored_list(self):
        intf = ExplicitSets(4, [[2, 1], [0], [0]])
        assert enumerate_feasible_sets(intf) == [(0,), (1, 2)]

    def test_cap_exceeded(self):
        with pytest.raises(ValueError, match="too large for exhaustive oracle"):
            enumerate_feasible_sets(KofN(30, 15), cap=1000)

    def test_agrees_with_membership_on_random_instances(self):
        rng = np.random.default_rng(2024)
        for _ in range(40):
            _, intf = random_instance(rng, max_links=7)
            listed = set(enumerate_feasible_sets(intf))
            for m in all_subsets(intf.n_links):
                if m == ():
                    assert is_feasible(intf, m)
                else:
                    assert (m in listed) == is_feasible(intf, m)
