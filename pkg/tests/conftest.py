"""Shared fixtures and independent oracles.

The oracles here deliberately avoid the library's fast paths: max-weight is
re-derived by scanning every subset, and rule success rates by enumerating
every channel state in pure Python. Tests freeze expected values computed
through these routes and compare the library against them.
"""

from itertools import chain, combinations

import numpy as np
import pytest

from aoisched import (
    AgeBasedPolicy,
    ConflictGraph,
    ExplicitSets,
    KofN,
    Network,
    NeverSchedulePolicy,
    PriorityPolicy,
    SetMixture,
    StationaryPolicy,
    VirtualQueuePolicy,
    is_feasible,
)


def all_subsets(n):
    """Every subset of range(n) as a sorted tuple, in lexicographic order."""
    subs = list(chain.from_iterable(combinations(range(n), r) for r in range(n + 1)))
    return sorted(subs)


def brute_force_max_weight(interference, scores):
    """Independent max-weight reference: scan subsets, same documented tie rule.

    Candidates (every feasible subset, listed sets plus the empty set for
    explicit collections) are visited in lexicographic order; the first
    strict maximizer of the score sum wins; zero-score members are dropped
    afterwards where subsets stay feasible (not for explicit collections).
    """
    n = interference.n_links
    if isinstance(interference, ExplicitSets):
        candidates = [()] + sorted(interference.sets)
    else:
        candidates = [m for m in all_subsets(n) if is_feasible(interference, m)]
    best, best_total = (), -1.0
    for m in candidates:
        total = float(sum(scores[e] for e in m))
        if total > best_total:
            best, best_total = m, total
    if not isinstance(interference, ExplicitSets):
        best = tuple(e for e in best if scores[e] > 0)
    return best


def brute_force_rule_rates(network, interference, c):
    """Success rates of the direction-c max-weight rule by full state enumeration."""
    n = network.n_links
    gamma = network.gamma
    rates = np.zeros(n)
    for mask in range(1 << n):
        bits = [(mask >> e) & 1 for e in range(n)]
        prob = 1.0
        for e in range(n):
            prob *= gamma[e] if bits[e] else 1.0 - gamma[e]
        scores = np.array([c[e] * bits[e] for e in range(n)], dtype=float)
        decision = brute_force_max_weight(interference, scores)
        for e in decision:
            if bits[e]:
                rates[e] += prob
    return rates


def random_instance(rng, variants=("kofn", "conflict", "explicit"),
                    max_links=12, gamma_range=(0.3, 0.95)):
    """Random (network, interference) pair; exhaustive variants stay small."""
    kind = variants[rng.integers(len(variants))]
    n = int(rng.integers(2, (max_links if kind == "kofn" else min(8, max_links)) + 1))
    network = Network(rng.uniform(0.5, 2.0, n), rng.uniform(*gamma_range, n))
    if kind == "kofn":
        interference = KofN(n, int(rng.integers(1, n + 1)))
    elif kind == "conflict":
        edges = [(u, v) for u in range(n) for v in range(u + 1, n) if rng.random() < 0.35]
        interference = ConflictGraph(n, edges)
    else:
        sets = [(e,) for e in range(n)]
        for _ in range(int(rng.integers(1, n + 2))):
            size = int(rng.integers(2, min(4, n) + 1))
            sets.append(tuple(sorted(rng.choice(n, size=size, replace=False).tolist())))
        interference = ExplicitSets(n, sets)
    return network, interference


def random_policy(rng, n):
    """One of the five policy families with randomized parameters."""
    kind = rng.integers(5)
    if kind == 0:
        return VirtualQueuePolicy(v=float(rng.choice([0.1, 1.0, 10.0])))
    if kind == 1:
        return AgeBasedPolicy(beta=float(rng.choice([-3.0, 0.0, 1.0, 2.5])))
    if kind == 2:
        sets = [(int(e),) for e in rng.choice(n, size=min(n, 3), replace=False)]
        probs = rng.uniform(0.05, 1.0, len(sets))
        probs *= rng.uniform(0.3, 1.0) / probs.sum()
        return StationaryPolicy(SetMixture(list(zip(sets, probs))))
    if kind == 3:
        return PriorityPolicy(rng.permutation(n).tolist())
    return NeverSchedulePolicy()


@pytest.fixture
def two_link():
    """The symmetric two-link instance where only one link may be active."""
    return Network([1.0, 1.0], [0.5, 0.5]), KofN(2, 1)


@pytest.fixture
def good_bad_20():
    """20 links, capacity 5, five bad channels."""
    return Network.good_bad(20, 0.9, 0.1, 5), KofN(20, 5)
