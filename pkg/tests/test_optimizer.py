import numpy as np
import pytest

from aoisched import (
    ConflictGraph,
    ConvergenceError,
    ExplicitSets,
    KofN,
    Network,
    SolverSettings,
    UnschedulableLinkError,
    average_age_lower_bound,
    avg_bound_coefficient,
    build_bound_report,
    factor_four_bounds,
    kofn_mixture_from_marginals,
    kofn_waterfill,
    marginals,
    optimal_stationary_mixture,
    peak_bound_coefficient,
    rule_success_rates,
    solve_aware_peak,
    solve_blind_peak,
    virtual_queue_peak_bound,
)
from conftest import brute_force_rule_rates, random_instance


class TestBlindOptimum:
    def test_two_link_both_routes_give_eight(self, two_link):
        net, intf = two_link
        f_wf, value_wf = kofn_waterfill(net, 1)
        assert value_wf == pytest.approx(8.0, abs=1e-9)
        assert f_wf == pytest.approx([0.5, 0.5], abs=1e-9)
        sol = solve_blind_peak(net, intf, SolverSettings(gap_tolerance=1e-6))
        assert sol.value == pytest.approx(8.0, abs=1e-4)
        assert sol.marginals == pytest.approx([0.5, 0.5], abs=1e-4)
        assert sol.gap <= 1e-6

    def test_single_certain_link(self):
        net = Network([1.0], [1.0])
        sol = solve_blind_peak(net, KofN(1, 1), SolverSettings(gap_tolerance=1e-9))
        assert sol.value == pytest.approx(1.0, abs=1e-6)
        assert sol.marginals == pytest.approx([1.0], abs=1e-6)

    def test_twenty_link_closed_form(self, good_bad_20):
        # hand solution: f = min(1, nu*sqrt(1/gamma)), sum f = 5
        # => f_good = 1/6, f_bad = 1/2, value = 15*6/0.9*... = 100 + 100 = 200
        net, _ = good_bad_20
        f, value = kofn_waterfill(net, 5)
        assert value == pytest.approx(200.0, abs=1e-8)
        assert f[:15] == pytest.approx(np.full(15, 1.0 / 6.0), abs=1e-9)
        assert f[15:] == pytest.approx(np.full(5, 0.5), abs=1e-9)

    def test_no_contention_when_k_equals_n(self):
        net = Network([1.0, 2.0, 1.0], [0.5, 0.25, 1.0])
        f, value = kofn_waterfill(net, 3)
        assert f == pytest.approx([1.0, 1.0, 1.0])
        assert value == pytest.approx(2.0 + 8.0 + 1.0)

    def test_frank_wolfe_agrees_with_waterfill(self):
        # dual-route check on K-of-N instances up to 20 links
        rng = np.random.default_rng(31)
        for n, k in [(5, 2), (11, 4), (20, 5)]:
            net = Network(rng.uniform(0.5, 2.0, n), rng.uniform(0.2, 0.95, n))
            _, exact = kofn_waterfill(net, k)
            settings = SolverSettings(gap_tolerance=1e-4 * exact, max_iterations=2_000_000)
            sol = solve_blind_peak(net, KofN(n, k), settings)
            assert sol.value >= exact - 1e-9  # the closed form is the optimum
            assert sol.value == pytest.approx(exact, rel=1e-4)

    def test_mixture_marginals_match_waterfill(self, good_bad_20):
        net, intf = good_bad_20
        blind = optimal_stationary_mixture(net, intf)
        f, value = kofn_waterfill(net, 5)
        assert blind.method == "waterfill"
        assert blind.value == pytest.approx(value, abs=1e-6)
        assert np.abs(blind.marginals - f).max() < 1e-9
        assert all(len(m) <= 5 for m, _ in blind.mixture.entries)

    def test_decomposition_random_marginals(self):
        rng = np.random.default_rng(4)
        for _ in range(25):
            n = int(rng.integers(2, 12))
            k = int(rng.integers(1, n + 1))
            f = rng.uniform(0, 1, n)
            f *= min(1.0, k / f.sum() * rng.uniform(0.3, 1.0))
            mixture = kofn_mixture_from_marginals(f, k)
            assert np.abs(marginals(mixture, n) - f).max() < 1e-8
            assert all(len(m) <= k for m, _ in mixture.entries)

    def test_unschedulable_link_detected(self):
        net = Network([1.0, 1.0], [0.5, 0.5])
        intf = ExplicitSets(2, [[0]])  # link 1 uncovered
        with pytest.raises(UnschedulableLinkError) as err:
            solve_blind_peak(net, intf)
        assert err.value.link == 1

    def test_nonconvergence_error_carries_gap(self):
        net = Network([1.0, 1.0, 1.0], [0.9, 0.5, 0.2])
        intf = ConflictGraph(3, [(0, 1)])
        with pytest.raises(ConvergenceError) as err:
            solve_blind_peak(net, intf, SolverSettings(max_iterations=1, gap_tolerance=1e-12))
        assert err.value.gap > 0

    def test_objective_never_increases(self):
        rng = np.random.default_rng(55)
        for _ in range(5):
            net, intf = random_instance(rng, max_links=6)
            values = []
            solve_blind_peak(
                net, intf, SolverSettings(gap_tolerance=1e-3),
                _on_iterate=lambda val, gap: values.append(val),
            )
            assert all(b <= a + 1e-12 for a, b in zip(values, values[1:]))


class TestRuleRates:
    def test_priority_style_rule_hand_values(self, two_link):
        # direction (2, 1): take link 0 whenever ON, else link 1
        net, intf = two_link
        rates = rule_success_rates(net, intf, [2.0, 1.0])
        assert rates == pytest.approx([0.5, 0.25], abs=1e-12)

    def test_prefix_distribution_matches_state_enumeration(self):
        rng = np.random.default_rng(77)
        for _ in range(60):
            n = int(rng.integers(2, 8))
            net = Network(rng.uniform(0.5, 2, n), rng.uniform(0.1, 1.0, n))
            intf = KofN(n, int(rng.integers(1, n + 1)))
            c = rng.uniform(0, 3, n)
            c[rng.random(n) < 0.25] = 0.0
            if n > 2 and rng.random() < 0.5:
                c[1] = c[0]  # force ties
            got = rule_success_rates(net, intf, c)
            want = brute_force_rule_rates(net, intf, c)
            assert np.abs(got - want).max() < 1e-12

    def test_enumerated_variants_match_brute_force(self):
        rng = np.random.default_rng(78)
        for _ in range(20):
            net, intf = random_instance(rng, variants=("conflict", "explicit"), max_links=6)
            c = rng.uniform(0.1, 3, net.n_links)
            got = rule_success_rates(net, intf, c)
            want = brute_force_rule_rates(net, intf, c)
            assert np.abs(got - want).max() < 1e-12


class TestAwareOptimum:
    def test_two_link_matches_grid_search_oracle(self, two_link):
        # oracle: rate pairs (0.25 + 0.25q, 0.5 - 0.25q) over the contention
        # probability q; scan at 1e-4 resolution
        net, intf = two_link
        q = np.linspace(0.0, 1.0, 10_001)
        oracle = np.min(1.0 / (0.25 + 0.25 * q) + 1.0 / (0.5 - 0.25 * q))
        assert oracle == pytest.approx(16.0 / 3.0, abs=1e-6)
        sol = solve_aware_peak(net, intf, SolverSettings(gap_tolerance=1e-8))
        assert sol.value == pytest.approx(oracle, abs=1e-3)
        assert sol.rates == pytest.approx([0.375, 0.375], abs=1e-4)
        assert sol.gap <= 1e-8

    def test_single_link(self):
        net = Network([1.0], [0.5])
        sol = solve_aware_peak(net, KofN(1, 1), SolverSettings(gap_tolerance=1e-9))
        assert sol.value == pytest.approx(2.0, abs=1e-6)
        assert sol.rates == pytest.approx([0.5], abs=1e-6)

    def test_policy_rates_match_solution(self, two_link):
        # simulate the produced rule mixture and compare success rates
        from aoisched import run

        net, intf = two_link
        sol = solve_aware_peak(net, intf, SolverSettings(gap_tolerance=1e-8))
        _, metrics = run(net, intf, sol.policy(), 200_000, seed=3)
        se = np.sqrt(sol.rates * (1 - sol.rates) / 200_000)
        assert np.all(np.abs(metrics.success_rate_per_link - sol.rates) <= 4 * se)

    def test_aware_never_beats_blind_by_region_inclusion(self):
        # certified comparison: (aware value - gap) lower-bounds the aware
        # optimum, and the blind value upper-bounds the blind optimum, so the
        # inequality must hold at any solver tolerance
        rng = np.random.default_rng(41)
        for _ in range(8):
            net, intf = random_instance(rng, max_links=7)
            blind = optimal_stationary_mixture(net, intf, SolverSettings(gap_tolerance=1e-3))
            aware = solve_aware_peak(net, intf, SolverSettings(gap_tolerance=1e-3))
            assert aware.value - aware.gap <= blind.value + 1e-6

    def test_state_cap_enforced(self):
        net = Network.good_bad(20, 0.9, 0.1, 5)
        with pytest.raises(ValueError, match="limited to small instances"):
            solve_aware_peak(net, KofN(20, 5))

    def test_rule_weights_form_distribution(self, two_link):
        net, intf = two_link
        sol = solve_aware_peak(net, intf, SolverSettings(gap_tolerance=1e-6))
        total = sum(lam for _, lam in sol.rules)
        assert total == pytest.approx(1.0, abs=1e-9)

    def test_objective_never_increases(self):
        rng = np.random.default_rng(56)
        for _ in range(4):
            net, intf = random_instance(rng, max_links=6)
            values = []
            solve_aware_peak(
                net, intf, SolverSettings(gap_tolerance=1e-3),
                _on_iterate=lambda val, gap: values.append(val),
            )
            assert all(b <= a + 1e-12 for a, b in zip(values, values[1:]))


class TestBounds:
    def test_average_age_lower_bound_two_link(self):
        # from the channel-aware solution (0.375, 0.375): (16/3)/2 + 1 = 11/3
        assert average_age_lower_bound([0.375, 0.375], [1.0, 1.0]) == pytest.approx(11.0 / 3.0)

    def test_average_age_lower_bound_trivial(self):
        assert average_age_lower_bound([1.0], [1.0]) == pytest.approx(1.0)

    def test_average_age_lower_bound_twenty_link(self, good_bad_20):
        net, _ = good_bad_20
        f, _ = kofn_waterfill(net, 5)
        assert average_age_lower_bound(net.gamma * f, net.weights) == pytest.approx(110.0, abs=1e-6)

    def test_virtual_queue_bound_arithmetic(self):
        assert virtual_queue_peak_bound(16.0 / 3.0, [1.0, 1.0], 1.0) == pytest.approx(22.0 / 3.0)
        assert virtual_queue_peak_bound(200.0, np.ones(20), 0.1) == pytest.approx(310.0)

    def test_virtual_queue_bound_large_v_limit(self):
        near = virtual_queue_peak_bound(5.0, [1.0, 1.0], 1e12)
        assert near == pytest.approx(5.0 + 1.0, abs=1e-9)

    def test_coefficients_known_values(self):
        assert avg_bound_coefficient(1.0) == pytest.approx(11.0 / 4.0)
        assert peak_bound_coefficient(1.0) == pytest.approx(5.0 / 2.0)
        assert avg_bound_coefficient(0.0) == pytest.approx(10.0 / 4.0)
        assert peak_bound_coefficient(0.0) == pytest.approx(2.0)
        assert avg_bound_coefficient(-2.0) == pytest.approx(0.5)
        assert peak_bound_coefficient(-2.0) == pytest.approx(-2.0)

    def test_coefficients_formulas_random_beta(self):
        rng = np.random.default_rng(9)
        for beta in rng.uniform(-20, 20, 100):
            assert avg_bound_coefficient(beta) == (10 + 2 * beta - beta * beta) / 4
            assert peak_bound_coefficient(beta) == (4 + 2 * beta - beta * beta) / 2

    def test_beta_one_maximizes_both_coefficients(self):
        grid = np.linspace(-30, 30, 2001)
        assert max(avg_bound_coefficient(b) for b in grid) <= avg_bound_coefficient(1.0)
        assert max(peak_bound_coefficient(b) for b in grid) <= peak_bound_coefficient(1.0)

    def test_factor_four_bounds(self):
        peak, avg = factor_four_bounds(6.0, 10.0, [1.0, 1.0], 1.0)
        assert peak == pytest.approx(4 * 6.0 - 2.5 * 2.0)
        assert avg == pytest.approx(4 * 10.0 - 2.75 * 2.0)
        peak_only, none_avg = factor_four_bounds(6.0, None, [1.0, 1.0], 0.0)
        assert none_avg is None


class TestBoundReport:
    def test_two_link_report_values(self, two_link):
        net, intf = two_link
        report = build_bound_report(net, intf, SolverSettings(gap_tolerance=1e-7), v=1.0, beta=1.0)
        assert report.blind_peak_optimum == pytest.approx(8.0, abs=1e-6)
        assert report.aware_peak_optimum == pytest.approx(16.0 / 3.0, abs=1e-4)
        assert report.avg_age_lower_bound == pytest.approx(11.0 / 3.0, abs=1e-3)
        assert report.virtual_queue_bound == pytest.approx(22.0 / 3.0, abs=1e-3)
        assert report.aware_status == "ok"
        assert report.lower_bound_basis == "channel-aware optimum"

    def test_twenty_link_report_falls_back_to_blind(self, good_bad_20):
        net, intf = good_bad_20
        report = build_bound_report(net, intf)
        assert report.blind_peak_optimum == pytest.approx(200.0, abs=1e-6)
        assert report.aware_peak_optimum is None
        assert "not computed" in report.aware_status
        assert report.virtual_queue_bound is None
        assert report.avg_age_lower_bound == pytest.approx(110.0, abs=1e-6)
        assert report.lower_bound_basis == "blind optimum"
