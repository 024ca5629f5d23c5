"""Scheduling policies and the shared max-weight selection kernel.

All policies produce, each slot, a feasible activation set. The channel-aware
policies (:class:`VirtualQueuePolicy`, :class:`AgeBasedPolicy`) score links
with the current channel state and pick a feasible set of maximum total
score. Channel-blind policies (:class:`StationaryPolicy`) sample a set from a
fixed distribution. :class:`SOnlyMixturePolicy` randomizes over deterministic
per-channel-state rules, each given by a direction vector.

Max-weight tie-breaking is deterministic: candidate sets are compared by
total score, ties resolved in favor of the lexicographically smallest
candidate (sorted index tuples, empty set first); links with zero score are
then dropped from the winner where interference permits (KofN and conflict
graphs -- any subset of a feasible set is feasible there). For explicit set
collections the winning listed set is returned unchanged, since removing a
member could leave an unlisted, infeasible set.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from .model import (
    ExplicitSets,
    InterferenceModel,
    KofN,
    Network,
    RngStream,
    is_feasible,
    lexicographic_candidates,
)

__all__ = [
    "max_weight_set",
    "SetMixture",
    "marginals",
    "SchedulingPolicy",
    "VirtualQueuePolicy",
    "AgeBasedPolicy",
    "StationaryPolicy",
    "SOnlyMixturePolicy",
    "PriorityPolicy",
    "NeverSchedulePolicy",
]


# ---------------------------------------------------------------------------
# Max-weight kernel
# ---------------------------------------------------------------------------

class _KofNKernel:
    """Top-k selection of positive scores; stable sort gives the lex tie-break."""

    def __init__(self, interference: KofN):
        self.k = interference.k

    def select(self, scores: np.ndarray) -> np.ndarray:
        order = np.argsort(-scores, kind="stable")[: self.k]
        chosen = order[scores[order] > 0.0]
        chosen.sort()
        return chosen


class _EnumerationKernel:
    """Exhaustive scan over the (cached) feasible collection.

    Candidates are stored in lexicographic order with the empty set first, so
    ``argmax`` over candidate sums lands on the lex-smallest maximizer.
    Documented exponential cost; acceptable at desk scale.
    """

    def __init__(self, interference: InterferenceModel):
        cands = lexicographic_candidates(interference)
        n = interference.n_links
        inc = np.zeros((len(cands), n))
        for i, m in enumerate(cands):
            inc[i, list(m)] = 1.0
        self.members = [np.array(m, dtype=np.intp) for m in cands]
        self.incidence = inc
        self.strip_zero_scores = not isinstance(interference, ExplicitSets)

    def select(self, scores: np.ndarray) -> np.ndarray:
        best = int(np.argmax(self.incidence @ scores))
        m = self.members[best]
        if self.strip_zero_scores and m.size:
            m = m[scores[m] > 0.0]
        return m


@lru_cache(maxsize=256)
def _kernel(interference: InterferenceModel):
    if isinstance(interference, KofN):
        return _KofNKernel(interference)
    return _EnumerationKernel(interference)


def max_weight_set(interference: InterferenceModel, scores: Sequence[float]) -> tuple[int, ...]:
    """A feasible set maximizing the total score, deterministically tie-broken.

    Scores must be nonnegative. The empty set is returned when every score is
    zero. See the module docstring for the exact tie-break and zero-score
    handling rules.
    """
    s = np.asarray(scores, dtype=float)
    if s.shape != (interference.n_links,):
        raise ValueError(f"expected {interference.n_links} scores, got {s.shape}")
    if np.any(s < 0.0):
        raise ValueError("scores must be nonnegative")
    return tuple(int(e) for e in _kernel(interference).select(s))


# ---------------------------------------------------------------------------
# Stationary mixtures
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SetMixture:
    """A probability mixture over activation sets; the residue is an idle slot.

    Entries are (sorted index tuple, probability) pairs. Probabilities are
    nonnegative and sum to at most 1 (within 1e-9); the remaining mass leaves
    every link silent for the slot.
    """

    entries: tuple[tuple[tuple[int, ...], float], ...]

    def __init__(self, entries: Iterable[tuple[Iterable[int], float]]):
        norm = []
        total = 0.0
        for m, p in entries:
            p = float(p)
            if p < 0.0:
                raise ValueError("mixture probabilities must be >= 0")
            total += p
            norm.append((tuple(sorted(int(e) for e in m)), p))
        if total > 1.0 + 1e-9:
            raise ValueError(f"mixture probabilities sum to {total} > 1")
        object.__setattr__(self, "entries", tuple(norm))

    @property
    def idle_probability(self) -> float:
        return max(0.0, 1.0 - sum(p for _, p in self.entries))


def marginals(mixture: SetMixture, n_links: int) -> np.ndarray:
    """Per-link activation probability: sum of entry probabilities covering the link."""
    f = np.zeros(n_links)
    for m, p in mixture.entries:
        for e in m:
            f[e] += p
    return f


# ---------------------------------------------------------------------------
# Policy interface
# ---------------------------------------------------------------------------

class SchedulingPolicy:
    """Per-run lifecycle: ``start(network, interference, rng)`` once, then
    ``decide(channel, ages)`` every slot.

    ``decide`` receives the current channel state (bool vector) and the
    current age vector, and returns the indices of the links to activate.
    Policies that do not depend on past decisions may instead implement
    ``decide_batch(channel_matrix)`` returning a full (T, n) activation
    matrix; the simulator prefers that path. A policy instance mutates only
    its own state and must not be shared across threads.
    """

    name = "policy"
    uses_ages = False

    def start(self, network: Network, interference: InterferenceModel, rng: RngStream):
        raise NotImplementedError

    def decide(self, channel: np.ndarray, ages: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def decide_batch(self, channel_matrix: np.ndarray):
        return None


class VirtualQueuePolicy(SchedulingPolicy):
    """Max-weight over ``w_e * Q_e`` on ON links, with a virtual-queue update.

    Each link keeps a counter Q_e, starting at 1 and never dropping below 1.
    After scheduling the set that maximizes the ON-restricted queue-weighted
    score, every queue grows by sqrt(v / Q_e) and successfully served queues
    shrink by 1. The single parameter ``v`` trades the additive optimality
    gap against the queue scale.
    """

    name = "virtual_queue"

    def __init__(self, v: float = 1.0):
        if v <= 0:
            raise ValueError("v must be > 0")
        self.v = float(v)
        self.queue = None

    def start(self, network, interference, rng):
        self._w = network.weights
        self._select = _kernel(interference).select
        self.queue = np.ones(network.n_links)

    def decide(self, channel, ages):
        q = self.queue
        scores = self._w * q * channel
        dec = self._select(scores)
        q += np.sqrt(self.v / q)
        # Scheduled links always have the channel ON here (zero scores are
        # dropped by the kernel for subset-closed models), but explicit set
        # collections may force OFF members in; only ON ones are served.
        if dec.size:
            served = dec[channel[dec]]
            q[served] -= 1.0
        np.maximum(q, 1.0, out=q)
        return dec


class AgeBasedPolicy(SchedulingPolicy):
    """Max-weight over ``w_e * (A_e^2 + beta * A_e)`` on ON links.

    Any real ``beta`` is admitted. Per-link scores are floored at zero, so a
    link whose age makes the score negative is simply never picked (for
    subset-closed interference; explicit collections may still include it as
    a zero-score member of the winning set).
    """

    name = "age_based"
    uses_ages = True

    def __init__(self, beta: float = 1.0):
        self.beta = float(beta)

    def start(self, network, interference, rng):
        self._w = network.weights
        self._select = _kernel(interference).select

    def decide(self, channel, ages):
        scores = ages * (ages + self.beta)
        np.maximum(scores, 0.0, out=scores)
        scores *= self._w
        scores *= channel
        return self._select(scores)


class StationaryPolicy(SchedulingPolicy):
    """Channel-blind: samples an activation set from a fixed mixture each slot."""

    name = "stationary"

    def __init__(self, mixture: SetMixture):
        self.mixture = mixture

    def start(self, network, interference, rng):
        for m, _ in self.mixture.entries:
            if not is_feasible(interference, m):
                raise ValueError(f"mixture set {m} is not feasible")
        self._rng = rng
        n = network.n_links
        self._cum = np.cumsum([p for _, p in self.mixture.entries])
        members = np.zeros((len(self.mixture.entries) + 1, n), dtype=bool)
        self._member_idx = []
        for i, (m, _) in enumerate(self.mixture.entries):
            members[i, list(m)] = True
            self._member_idx.append(np.array(m, dtype=np.intp))
        self._member_idx.append(np.array([], dtype=np.intp))  # idle row
        self._members = members

    def _pick(self, u: float) -> int:
        return int(np.searchsorted(self._cum, u, side="right"))

    def decide(self, channel, ages):
        return self._member_idx[self._pick(self._rng.gen.random())]

    def decide_batch(self, channel_matrix):
        u = self._rng.gen.random(channel_matrix.shape[0])
        idx = np.searchsorted(self._cum, u, side="right")
        return self._members[idx]


class SOnlyMixturePolicy(SchedulingPolicy):
    """Randomizes over deterministic channel-state rules.

    Each rule is a nonnegative direction vector c; given the observed channel
    state it activates the max-weight feasible set under scores ``c_e`` on ON
    links (OFF links score zero). A rule is drawn each slot according to the
    rule weights, independently across slots. This factored form is what the
    channel-aware optimum solver produces; it evaluates in O(rules x
    max-weight cost) instead of storing a table over all channel states.
    """

    name = "channel_rule_mixture"

    def __init__(self, rules: Iterable[tuple[Sequence[float], float]]):
        norm = []
        total = 0.0
        for c, lam in rules:
            lam = float(lam)
            if lam < 0:
                raise ValueError("rule weights must be >= 0")
            c = np.asarray(c, dtype=float)
            if np.any(c < 0):
                raise ValueError("rule direction vectors must be nonnegative")
            total += lam
            norm.append((c, lam))
        if not norm or abs(total - 1.0) > 1e-9:
            raise ValueError(f"rule weights must sum to 1, got {total}")
        self.rules = norm

    def start(self, network, interference, rng):
        self._rng = rng
        self._select = _kernel(interference).select
        self._kofn_k = interference.k if isinstance(interference, KofN) else None
        self._cum = np.cumsum([lam for _, lam in self.rules])
        for c, _ in self.rules:
            if c.shape != (network.n_links,):
                raise ValueError("rule direction length must equal n_links")

    def decide(self, channel, ages):
        u = self._rng.gen.random()
        r = min(int(np.searchsorted(self._cum, u, side="right")), len(self.rules) - 1)
        return self._select(self.rules[r][0] * channel)

    def decide_batch(self, channel_matrix):
        if self._kofn_k is None:
            return None  # general variants go through the per-slot kernel
        T, n = channel_matrix.shape
        u = self._rng.gen.random(T)
        idx = np.minimum(
            np.searchsorted(self._cum, u, side="right"), len(self.rules) - 1
        )
        un = np.zeros((T, n), dtype=bool)
        for r, (c, _) in enumerate(self.rules):
            rows = np.flatnonzero(idx == r)
            if rows.size == 0:
                continue
            scores = channel_matrix[rows] * c
            order = np.argsort(-scores, axis=1, kind="stable")[:, : self._kofn_k]
            vals = np.take_along_axis(scores, order, axis=1)
            block = np.zeros((rows.size, n), dtype=bool)
            np.put_along_axis(block, order, vals > 0.0, axis=1)
            un[rows] = block
        return un


class PriorityPolicy(SchedulingPolicy):
    """Greedy activation in a fixed priority order.

    ON links are added first, in priority order, whenever the accumulated set
    stays feasible; remaining capacity is then filled with OFF links in the
    same order. The OFF fill never produces a success but keeps the policy
    total (some set is always proposed).
    """

    name = "priority"

    def __init__(self, order: Sequence[int] | None = None):
        self.order = None if order is None else [int(e) for e in order]

    def start(self, network, interference, rng):
        n = network.n_links
        order = list(range(n)) if self.order is None else self.order
        if sorted(order) != list(range(n)):
            raise ValueError("order must be a permutation of all links")
        self._order = order
        self._interference = interference
        self._kofn_k = interference.k if isinstance(interference, KofN) else None
        if self._kofn_k is not None:
            rank = np.empty(n, dtype=np.int64)
            rank[order] = np.arange(n)
            self._rank = rank
        self._n = n

    def _greedy(self, channel):
        chosen: list[int] = []
        for on_pass in (True, False):
            for e in self._order:
                if bool(channel[e]) != on_pass or e in chosen:
                    continue
                if is_feasible(self._interference, chosen + [e]):
                    chosen.append(e)
        return np.array(sorted(chosen), dtype=np.intp)

    def decide(self, channel, ages):
        if self._kofn_k is not None:
            key = self._rank + self._n * (~channel)
            top = np.argsort(key, kind="stable")[: self._kofn_k]
            top.sort()
            return top
        return self._greedy(channel)

    def decide_batch(self, channel_matrix):
        if self._kofn_k is None:
            return None
        T, n = channel_matrix.shape
        key = self._rank + n * (~channel_matrix)
        order = np.argsort(key, axis=1, kind="stable")[:, : self._kofn_k]
        un = np.zeros((T, n), dtype=bool)
        np.put_along_axis(un, order, True, axis=1)
        return un


class NeverSchedulePolicy(SchedulingPolicy):
    """Activates nothing, ever. Useful as a degenerate diagnostic case."""

    name = "never"

    def start(self, network, interference, rng):
        self._empty = np.array([], dtype=np.intp)

    def decide(self, channel, ages):
        return self._empty

    def decide_batch(self, channel_matrix):
        return np.zeros(channel_matrix.shape, dtype=bool)
