"""Exact peak-age optimization and performance-bound evaluation.

Two optimization problems are solved, both minimizing the weighted sum of
reciprocal per-link success rates:

* the *channel-blind* optimum over stationary set mixtures, where a link's
  success rate is ``gamma_e`` times its activation marginal ``f_e``; and
* the *channel-aware* optimum over policies that observe the current channel
  state, where the feasible success-rate region is the convex hull of the
  rate vectors of deterministic per-state max-weight rules.

Both are solved by Frank-Wolfe with the max-weight selection as the
linear-minimization oracle, using the standard 2/(k+2) step with monotone
acceptance (halve the step whenever it would increase the objective). The
mixture of visited vertices is accumulated explicitly, so every solution is
directly executable as a policy. For K-of-N interference the blind problem
also has a closed-form water-filling solution, used as an independent
cross-check and as the exact route for building the optimal stationary
policy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .model import (
    ExplicitSets,
    InterferenceModel,
    KofN,
    Network,
)
from .policies import (
    SetMixture,
    SOnlyMixturePolicy,
    StationaryPolicy,
    _kernel,
    marginals,
)

__all__ = [
    "SolverSettings",
    "UnschedulableLinkError",
    "ConvergenceError",
    "BlindSolution",
    "AwareSolution",
    "solve_blind_peak",
    "kofn_waterfill",
    "kofn_mixture_from_marginals",
    "optimal_stationary_mixture",
    "rule_success_rates",
    "solve_aware_peak",
    "average_age_lower_bound",
    "virtual_queue_peak_bound",
    "avg_bound_coefficient",
    "peak_bound_coefficient",
    "factor_four_bounds",
    "BoundReport",
    "build_bound_report",
]

_FLOOR = 1e-12  # barrier against division blowups; asserted inactive at solutions


class UnschedulableLinkError(ValueError):
    """A positively weighted link belongs to no feasible activation set."""

    def __init__(self, link: int):
        self.link = link
        super().__init__(f"link {link} is in no feasible activation set; its peak age is infinite")


class ConvergenceError(RuntimeError):
    """Frank-Wolfe failed to reach the gap tolerance within the iteration budget."""

    def __init__(self, gap: float, iterations: int):
        self.gap = gap
        self.iterations = iterations
        super().__init__(
            f"no convergence after {iterations} iterations (last duality gap {gap:.3e})"
        )


class _ConvexAccumulator:
    """Convex combination of visited vertices, without per-step rescans.

    Every step multiplies all existing weights by (1 - s) and adds s on one
    key; storing raw weights plus one global scale makes that O(1) per step.
    """

    def __init__(self, initial: dict):
        self.raw = dict(initial)
        self.scale = 1.0

    def step(self, key, s: float):
        if s >= 1.0:
            self.raw = {}
            self.scale = 1.0
            self.raw[key] = 1.0
            return
        self.scale *= 1.0 - s
        if self.scale < 1e-280:
            for k in self.raw:
                self.raw[k] *= self.scale
            self.scale = 1.0
        self.raw[key] = self.raw.get(key, 0.0) + s / self.scale

    def weights(self) -> dict:
        return {k: v * self.scale for k, v in self.raw.items() if v > 0.0}


@dataclass
class SolverSettings:
    max_iterations: int = 500_000
    gap_tolerance: float = 1e-3
    state_cap: int = 16  # channel-aware exact solve enumerates 2^n states

    def __post_init__(self):
        if self.gap_tolerance <= 0:
            raise ValueError("gap_tolerance must be > 0")


def _check_schedulable(interference: InterferenceModel) -> None:
    n = interference.n_links
    if isinstance(interference, ExplicitSets):
        covered = set()
        for m in interference.sets:
            covered.update(m)
        for e in range(n):
            if e not in covered:
                raise UnschedulableLinkError(e)
    # singletons are always feasible for KofN and conflict graphs


def _cover_sets(interference: InterferenceModel) -> list[tuple[int, ...]]:
    """One feasible set per link, covering every link; used to initialize f > 0."""
    n = interference.n_links
    if isinstance(interference, ExplicitSets):
        ordered = sorted(interference.sets, key=lambda s: (len(s), s))
        cover = []
        for e in range(n):
            m = next((s for s in ordered if e in s), None)
            if m is None:
                raise UnschedulableLinkError(e)
            cover.append(m)
        return cover
    return [(e,) for e in range(n)]


# ---------------------------------------------------------------------------
# Channel-blind optimum (stationary mixtures)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BlindSolution:
    mixture: SetMixture
    marginals: np.ndarray
    value: float
    gap: float
    iterations: int
    method: str

    def policy(self) -> StationaryPolicy:
        return StationaryPolicy(self.mixture)


def _blind_objective(weights, gamma):
    def g(f):
        return float(np.sum(weights / (gamma * np.maximum(f, _FLOOR))))

    return g


def solve_blind_peak(
    network: Network,
    interference: InterferenceModel,
    settings: SolverSettings | None = None,
    _on_iterate=None,
) -> BlindSolution:
    """Minimize ``sum w_e / (gamma_e f_e)`` over achievable activation marginals.

    Frank-Wolfe over the marginal polytope of set mixtures: the gradient
    direction is served by the max-weight oracle with scores
    ``w_e / (gamma_e f_e^2)``, and the visited vertices accumulate into an
    executable :class:`SetMixture`. Raises :class:`UnschedulableLinkError`
    when some link can never be activated and :class:`ConvergenceError` when
    the duality gap does not reach the tolerance in the iteration budget.
    """
    settings = settings or SolverSettings()
    _check_schedulable(interference)
    n = network.n_links
    w, gamma = network.weights, network.gamma
    g = _blind_objective(w, gamma)
    select = _kernel(interference).select

    cover = []
    seen = set()
    for m in _cover_sets(interference):
        if m not in seen:
            seen.add(m)
            cover.append(m)
    x = _ConvexAccumulator({m: 1.0 / len(cover) for m in cover})
    f = np.zeros(n)
    for m, p in x.weights().items():
        f[list(m)] += p

    gap = math.inf
    iterations = 0
    for k in range(settings.max_iterations):
        iterations = k
        fs = np.maximum(f, _FLOOR)
        scores = w / (gamma * fs * fs)
        v_set = tuple(int(e) for e in select(scores))
        v = np.zeros(n)
        if v_set:
            v[list(v_set)] = 1.0
        gap = float(scores @ (v - f))
        if _on_iterate is not None:
            _on_iterate(g(f), gap)
        if gap <= settings.gap_tolerance:
            break
        step = 2.0 / (k + 2.0)
        g_cur = g(f)
        f_new = f + step * (v - f)
        halvings = 0
        while g(f_new) > g_cur and halvings < 60:
            step *= 0.5
            f_new = f + step * (v - f)
            halvings += 1
        f = f_new
        x.step(v_set, step)
    else:
        raise ConvergenceError(gap, settings.max_iterations)

    entries = sorted((m, p) for m, p in x.weights().items() if m and p > 0.0)
    mixture = SetMixture(entries)
    f_out = marginals(mixture, n)
    assert f_out.min() > _FLOOR, "marginal floor active at the returned solution"
    return BlindSolution(mixture, f_out, g(f_out), gap, iterations, "frank_wolfe")


def kofn_waterfill(network: Network, k: int) -> tuple[np.ndarray, float]:
    """Closed-form blind optimum for at-most-k interference.

    The optimal marginal is ``f_e = min(1, nu * sqrt(w_e / gamma_e))`` with
    ``nu`` chosen by bisection so the marginals sum to ``min(k, n)``; returns
    ``(f, value)``.
    """
    n = network.n_links
    if not 1 <= k:
        raise ValueError("k must be >= 1")
    w, gamma = network.weights, network.gamma
    target = float(min(k, n))
    c = np.sqrt(w / gamma)
    if k >= n:
        f = np.ones(n)
        return f, float(np.sum(w / gamma))
    lo, hi = 0.0, 1.0 / float(c.min())
    for _ in range(200):
        nu = 0.5 * (lo + hi)
        f = np.minimum(1.0, nu * c)
        s = float(f.sum())
        if abs(s - target) <= 1e-12:
            break
        if s < target:
            lo = nu
        else:
            hi = nu
    f = np.minimum(1.0, 0.5 * (lo + hi) * c)
    return f, float(np.sum(w / (gamma * f)))


def kofn_mixture_from_marginals(f: Sequence[float], k: int) -> SetMixture:
    """Decompose marginals into a mixture of sets of size at most ``k``.

    Systematic-sampling construction: lay the marginals end to end on a line,
    and for an offset u in [0, 1) select every link whose segment contains a
    point ``u + integer``. The selected-set map is piecewise constant in u
    with at most n breakpoints, giving a mixture whose marginals equal ``f``
    (up to float round-off). Requires ``0 <= f_e <= 1`` and ``sum f <= k``.
    """
    f = np.asarray(f, dtype=float)
    if np.any((f < -1e-12) | (f > 1.0 + 1e-12)):
        raise ValueError("marginals must lie in [0, 1]")
    total = float(f.sum())
    if total > k + 1e-9:
        raise ValueError(f"marginals sum to {total} > k={k}")
    if total <= 0.0:
        return SetMixture([])
    cum = np.concatenate([[0.0], np.cumsum(f)])
    # Snap near-integer cumulative values: round-off there would otherwise
    # create sliver intervals selecting one link too many.
    nearest = np.round(cum)
    cum = np.where(np.abs(cum - nearest) < 1e-9, nearest, cum)
    breaks = sorted({0.0, 1.0, *(float(c % 1.0) for c in cum)})
    entries = {}
    for a, b in zip(breaks[:-1], breaks[1:]):
        width = b - a
        if width <= 0.0:
            continue
        u = 0.5 * (a + b)
        lo = np.floor(cum[:-1] - u)
        hi = np.floor(cum[1:] - u)
        m = tuple(int(e) for e in np.flatnonzero(hi > lo))
        if len(m) > k:
            raise AssertionError("systematic decomposition produced an oversized set")
        if m:
            entries[m] = entries.get(m, 0.0) + width
    return SetMixture(sorted(entries.items()))


def optimal_stationary_mixture(
    network: Network,
    interference: InterferenceModel,
    settings: SolverSettings | None = None,
) -> BlindSolution:
    """Blind-optimal stationary policy; exact water-filling route for K-of-N.

    For K-of-N interference the closed form plus the systematic decomposition
    gives the optimum to machine precision; other interference models fall
    back to the Frank-Wolfe solver.
    """
    if isinstance(interference, KofN):
        f, value = kofn_waterfill(network, interference.k)
        mixture = kofn_mixture_from_marginals(f, interference.k)
        return BlindSolution(mixture, marginals(mixture, network.n_links), value, 0.0, 0, "waterfill")
    return solve_blind_peak(network, interference, settings)


# ---------------------------------------------------------------------------
# Channel-aware optimum (per-state rules)
# ---------------------------------------------------------------------------

def _rule_rates_kofn(c: np.ndarray, gamma: np.ndarray, k: int) -> np.ndarray:
    """Exact success rates of the rule "top-k ON links by (c desc, index asc)".

    A link with positive direction weight is served exactly when it is ON and
    fewer than k higher-ranked links are ON; the count of higher-ranked ON
    links has a Poisson-binomial prefix distribution, updated link by link in
    rank order. O(n*k), no state enumeration.
    """
    n = c.size
    rates = np.zeros(n)
    ranked = sorted((e for e in range(n) if c[e] > 0.0), key=lambda e: (-c[e], e))
    prefix = np.zeros(k + 1)
    prefix[0] = 1.0
    for e in ranked:
        rates[e] = gamma[e] * prefix[:k].sum()
        g = gamma[e]
        nxt = prefix * (1.0 - g)
        nxt[1:] += prefix[:-1] * g
        nxt[k] += prefix[k] * g  # saturate: >= k ON already
        prefix = nxt
    return rates


class _StateSpace:
    """All 2^n channel states with probabilities, for exact rule evaluation."""

    def __init__(self, interference: InterferenceModel, gamma: np.ndarray):
        n = interference.n_links
        states = np.arange(1 << n, dtype=np.int64)
        bits = ((states[:, None] >> np.arange(n)) & 1).astype(bool)
        self.bits = bits
        self.probs = np.prod(np.where(bits, gamma, 1.0 - gamma), axis=1)
        kern = _kernel(interference)
        self.incidence = kern.incidence
        self.members_bool = kern.incidence.astype(bool)
        self.strip = kern.strip_zero_scores

    def rates(self, c: np.ndarray) -> np.ndarray:
        sums = (self.bits * c) @ self.incidence.T
        winners = np.argmax(sums, axis=1)
        active = self.members_bool[winners].copy()
        if self.strip:
            active &= c > 0.0
        return self.probs @ (active & self.bits)


def rule_success_rates(
    network: Network, interference: InterferenceModel, c: Sequence[float]
) -> np.ndarray:
    """Exact per-link success rates of the max-weight rule with direction ``c``."""
    c = np.asarray(c, dtype=float)
    if isinstance(interference, KofN):
        return _rule_rates_kofn(c, network.gamma, interference.k)
    return _StateSpace(interference, network.gamma).rates(c)


@dataclass(frozen=True)
class AwareSolution:
    rules: tuple[tuple[tuple[float, ...], float], ...]
    rates: np.ndarray
    value: float
    gap: float
    iterations: int

    def policy(self) -> SOnlyMixturePolicy:
        return SOnlyMixturePolicy([(np.array(c), lam) for c, lam in self.rules])


def solve_aware_peak(
    network: Network,
    interference: InterferenceModel,
    settings: SolverSettings | None = None,
    _on_iterate=None,
) -> AwareSolution:
    """Minimize ``sum w_e / alpha_e`` over channel-aware achievable rates.

    Frank-Wolfe over the convex hull of deterministic per-state rule rate
    vectors: at each iterate the direction scores are ``w_e / alpha_e^2`` and
    the vertex is the rule scheduling the max-weight feasible set of ON links
    under those scores, with its rate vector evaluated exactly (prefix
    distribution for K-of-N, full state enumeration otherwise). The output is
    a mixture of direction rules, directly executable as an
    :class:`SOnlyMixturePolicy`.

    Exact evaluation is limited to ``n_links <= settings.state_cap``.
    """
    settings = settings or SolverSettings()
    n = network.n_links
    if n > settings.state_cap:
        raise ValueError(
            f"channel-aware exact solve is limited to small instances "
            f"(n_links={n} exceeds state cap {settings.state_cap})"
        )
    _check_schedulable(interference)
    w, gamma = network.weights, network.gamma
    if isinstance(interference, KofN):
        oracle = lambda c: _rule_rates_kofn(c, gamma, interference.k)
    else:
        space = _StateSpace(interference, gamma)
        oracle = space.rates

    def g(a):
        return float(np.sum(w / np.maximum(a, _FLOOR)))

    init = {}
    alpha = np.zeros(n)
    for e in range(n):
        c = np.zeros(n)
        c[e] = 1.0
        init[tuple(c)] = 1.0 / n
        alpha += oracle(c) / n
    for e in range(n):
        if alpha[e] <= 0.0:
            raise UnschedulableLinkError(e)
    rules = _ConvexAccumulator(init)

    gap = math.inf
    iterations = 0
    for k in range(settings.max_iterations):
        iterations = k
        a = np.maximum(alpha, _FLOOR)
        scores = w / (a * a)
        vertex = oracle(scores)
        gap = float(scores @ (vertex - alpha))
        if _on_iterate is not None:
            _on_iterate(g(alpha), gap)
        if gap <= settings.gap_tolerance:
            break
        step = 2.0 / (k + 2.0)
        g_cur = g(alpha)
        a_new = alpha + step * (vertex - alpha)
        halvings = 0
        while g(a_new) > g_cur and halvings < 60:
            step *= 0.5
            a_new = alpha + step * (vertex - alpha)
            halvings += 1
        alpha = a_new
        rules.step(tuple(float(s) for s in scores), step)
    else:
        raise ConvergenceError(gap, settings.max_iterations)

    assert alpha.min() > _FLOOR, "rate floor active at the returned solution"
    final = rules.weights()
    total = sum(final.values())
    rule_list = tuple(sorted((c, lam / total) for c, lam in final.items() if lam > 0.0))
    return AwareSolution(rule_list, alpha, g(alpha), gap, iterations)


# ---------------------------------------------------------------------------
# Performance bounds
# ---------------------------------------------------------------------------

def average_age_lower_bound(alpha: Sequence[float], weights: Sequence[float]) -> float:
    """No policy's weighted average age can beat ``(sum w/alpha + sum w) / 2``.

    ``alpha`` should be the success rates of a peak-age optimal policy.
    """
    alpha = np.asarray(alpha, dtype=float)
    w = np.asarray(weights, dtype=float)
    if np.any(alpha <= 0.0):
        raise ValueError("lower bound requires strictly positive rates")
    return float(0.5 * np.sum(w / alpha) + 0.5 * w.sum())


def virtual_queue_peak_bound(peak_optimum: float, weights: Sequence[float], v: float) -> float:
    """Guaranteed peak age of the virtual-queue policy: optimum plus
    ``(1/2 + 1/(2v)) * total weight``."""
    if v <= 0:
        raise ValueError("v must be > 0")
    total = float(np.sum(np.asarray(weights, dtype=float)))
    return float(peak_optimum) + 0.5 * total + total / (2.0 * v)


def avg_bound_coefficient(beta: float) -> float:
    """Additive coefficient in the age-based policy's average-age guarantee."""
    return (10.0 + 2.0 * beta - beta * beta) / 4.0


def peak_bound_coefficient(beta: float) -> float:
    """Additive coefficient in the age-based policy's peak-age guarantee."""
    return (4.0 + 2.0 * beta - beta * beta) / 2.0


def factor_four_bounds(
    peak_optimum: float,
    avg_reference: float | None,
    weights: Sequence[float],
    beta: float,
) -> tuple[float, float | None]:
    """Factor-4 guarantees for the age-based policy.

    Peak: ``4 * peak_optimum - peak_bound_coefficient(beta) * total_weight``
    with the exactly solved channel-aware peak optimum. Average: the optimal
    average age is not computable, but any simulated policy's average age
    upper-bounds it, so ``4 * avg_reference - avg_bound_coefficient(beta) *
    total_weight`` is a valid (weaker) certified bound; pass ``None`` to skip.
    """
    total = float(np.sum(np.asarray(weights, dtype=float)))
    peak_bound = 4.0 * float(peak_optimum) - peak_bound_coefficient(beta) * total
    avg_bound = None
    if avg_reference is not None:
        avg_bound = 4.0 * float(avg_reference) - avg_bound_coefficient(beta) * total
    return peak_bound, avg_bound


@dataclass(frozen=True)
class BoundReport:
    """Solved optima and certified policy bounds for one instance."""

    blind_peak_optimum: float
    blind_marginals: tuple[float, ...]
    aware_peak_optimum: float | None
    aware_status: str
    avg_age_lower_bound: float
    lower_bound_basis: str
    v: float
    virtual_queue_bound: float | None
    beta: float
    age_based_peak_bound: float | None
    avg_coefficient: float
    peak_coefficient: float
    total_weight: float


def build_bound_report(
    network: Network,
    interference: InterferenceModel,
    settings: SolverSettings | None = None,
    v: float = 1.0,
    beta: float = 1.0,
) -> BoundReport:
    """Solve both optima (where tractable) and evaluate every derived bound."""
    settings = settings or SolverSettings()
    blind = optimal_stationary_mixture(network, interference, settings)
    aware_value = None
    aware_rates = None
    try:
        aware = solve_aware_peak(network, interference, settings)
        aware_value, aware_rates = aware.value, aware.rates
        aware_status = "ok"
    except ValueError as exc:
        aware_status = f"not computed: {exc}"

    if aware_value is not None:
        certified_lb = aware_value - max(0.0, settings.gap_tolerance)
        assert certified_lb <= blind.value + 1e-6, (
            "channel-aware optimum exceeds the blind optimum"
        )
        basis, alpha = "channel-aware optimum", aware_rates
    else:
        basis, alpha = "blind optimum", network.gamma * blind.marginals

    return BoundReport(
        blind_peak_optimum=blind.value,
        blind_marginals=tuple(float(x) for x in blind.marginals),
        aware_peak_optimum=aware_value,
        aware_status=aware_status,
        avg_age_lower_bound=average_age_lower_bound(alpha, network.weights),
        lower_bound_basis=basis,
        v=v,
        virtual_queue_bound=(
            virtual_queue_peak_bound(aware_value, network.weights, v)
            if aware_value is not None
            else None
        ),
        beta=beta,
        age_based_peak_bound=(
            factor_four_bounds(aware_value, None, network.weights, beta)[0]
            if aware_value is not None
            else None
        ),
        avg_coefficient=avg_bound_coefficient(beta),
        peak_coefficient=peak_bound_coefficient(beta),
        total_weight=network.total_weight,
    )
