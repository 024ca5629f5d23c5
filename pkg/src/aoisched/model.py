"""Network description, interference structure, and the ON/OFF channel process.

A network is a set of links, each with a positive weight and a per-slot
probability of its channel being ON. Channels are independent across links
and across slots. Interference is described by a collection of *feasible
activation sets*: groups of links that may transmit simultaneously. Three
descriptions are supported:

* :class:`KofN` -- any set of at most K links is feasible,
* :class:`ConflictGraph` -- feasible sets are independent sets of a graph,
* :class:`ExplicitSets` -- an arbitrary list of feasible sets (not required
  to be closed under taking subsets).

All randomness flows through :class:`RngStream`, a counter-based Philox
generator with a documented sub-stream derivation rule, so that every
trajectory is reproducible from a single integer seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "Network",
    "KofN",
    "ConflictGraph",
    "ExplicitSets",
    "RngStream",
    "sample_channel",
    "sample_channel_matrix",
    "is_feasible",
    "enumerate_feasible_sets",
    "DEFAULT_ENUMERATION_CAP",
]

# Exhaustive enumeration is only meant for desk-scale instances.
DEFAULT_ENUMERATION_CAP = 200_000


class Network:
    """Immutable link set: weights ``w_e > 0`` and ON-probabilities ``gamma_e``.

    ``gamma_e`` must lie in (0, 1]; a zero ON-probability would make the
    link's peak age infinite and is rejected at construction.
    """

    __slots__ = ("n_links", "weights", "gamma")

    def __init__(self, weights: Sequence[float], gamma: Sequence[float]):
        w = np.asarray(weights, dtype=float)
        g = np.asarray(gamma, dtype=float)
        if w.ndim != 1 or w.size == 0:
            raise ValueError("weights must be a non-empty 1-d sequence")
        if g.shape != w.shape:
            raise ValueError(
                f"gamma has length {g.size}, expected {w.size} to match weights"
            )
        if not np.all(w > 0.0):
            raise ValueError("every link weight must be > 0")
        if not np.all((g > 0.0) & (g <= 1.0)):
            raise ValueError("every ON-probability must lie in (0, 1]")
        w.flags.writeable = False
        g.flags.writeable = False
        object.__setattr__(self, "n_links", int(w.size))
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "gamma", g)

    def __setattr__(self, name, value):
        raise AttributeError("Network is immutable")

    def __repr__(self):
        return f"Network(n_links={self.n_links})"

    @property
    def total_weight(self) -> float:
        return float(self.weights.sum())

    @classmethod
    def uniform(cls, n_links: int, gamma: float, weight: float = 1.0) -> "Network":
        """All links share one weight and one ON-probability."""
        return cls([weight] * n_links, [gamma] * n_links)

    @classmethod
    def good_bad(
        cls,
        n_links: int,
        gamma_good: float,
        gamma_bad: float,
        n_bad: int,
        weight: float = 1.0,
    ) -> "Network":
        """Two-tier channel template: the last ``n_bad`` links are bad."""
        if not 0 <= n_bad <= n_links:
            raise ValueError(f"n_bad={n_bad} must lie in [0, {n_links}]")
        gamma = [gamma_good] * (n_links - n_bad) + [gamma_bad] * n_bad
        return cls([weight] * n_links, gamma)


def _normalize_link_set(m: Iterable[int], n_links: int) -> tuple[int, ...]:
    """Sorted, duplicate-free index tuple; raises on out-of-range indices."""
    s = tuple(sorted(set(int(e) for e in m)))
    if s and (s[0] < 0 or s[-1] >= n_links):
        bad = [e for e in s if e < 0 or e >= n_links]
        raise ValueError(f"link indices {bad} out of range for {n_links} links")
    return s


@dataclass(frozen=True)
class KofN:
    """Any set of at most ``k`` links is a feasible activation set."""

    n_links: int
    k: int

    def __post_init__(self):
        if not 1 <= self.k <= self.n_links:
            raise ValueError(f"k={self.k} must lie in [1, {self.n_links}]")

    def contains(self, m: tuple[int, ...]) -> bool:
        return len(m) <= self.k


@dataclass(frozen=True)
class ConflictGraph:
    """Feasible activation sets are the independent sets of an undirected graph."""

    n_links: int
    edges: tuple[tuple[int, int], ...]

    def __init__(self, n_links: int, edges: Iterable[Iterable[int]]):
        norm = set()
        for uv in edges:
            pair = tuple(sorted(int(x) for x in uv))
            if len(pair) != 2 or pair[0] == pair[1]:
                raise ValueError(f"edge {tuple(uv)} is not a pair of distinct links")
            if pair[0] < 0 or pair[1] >= n_links:
                raise ValueError(f"edge {pair} out of range for {n_links} links")
            norm.add(pair)
        object.__setattr__(self, "n_links", int(n_links))
        object.__setattr__(self, "edges", tuple(sorted(norm)))

    def adjacency_masks(self) -> list[int]:
        masks = [0] * self.n_links
        for u, v in self.edges:
            masks[u] |= 1 << v
            masks[v] |= 1 << u
        return masks

    def contains(self, m: tuple[int, ...]) -> bool:
        members = set(m)
        return not any(u in members and v in members for u, v in self.edges)


@dataclass(frozen=True)
class ExplicitSets:
    """An explicit collection of feasible activation sets.

    The collection is not required to be subset-closed; the empty set is
    always implicitly feasible.
    """

    n_links: int
    sets: tuple[tuple[int, ...], ...]

    def __init__(self, n_links: int, sets: Iterable[Iterable[int]]):
        norm = []
        seen = set()
        for m in sets:
            t = _normalize_link_set(m, int(n_links))
            if t and t not in seen:
                seen.add(t)
                norm.append(t)
        object.__setattr__(self, "n_links", int(n_links))
        object.__setattr__(self, "sets", tuple(norm))

    def contains(self, m: tuple[int, ...]) -> bool:
        return m == () or m in set(self.sets)


InterferenceModel = KofN | ConflictGraph | ExplicitSets


def is_feasible(interference: InterferenceModel, m: Iterable[int]) -> bool:
    """True iff ``m`` is a feasible activation set (the empty set always is)."""
    t = _normalize_link_set(m, interference.n_links)
    return interference.contains(t)


def _independent_sets_lex(n: int, adj_masks: list[int], cap: int) -> list[tuple[int, ...]]:
    """All nonempty independent sets, in lexicographic DFS order."""
    out: list[tuple[int, ...]] = []

    def extend(prefix: tuple[int, ...], banned: int, start: int):
        for e in range(start, n):
            if banned >> e & 1:
                continue
            s = prefix + (e,)
            out.append(s)
            if len(out) > cap:
                raise ValueError("instance too large for exhaustive oracle")
            extend(s, banned | adj_masks[e] | (1 << e), e + 1)

    extend((), 0, 0)
    return out


def enumerate_feasible_sets(
    interference: InterferenceModel, cap: int = DEFAULT_ENUMERATION_CAP
) -> list[tuple[int, ...]]:
    """Exhaustive list of all nonempty feasible sets, sorted by (size, indices).

    Raises ``ValueError("instance too large for exhaustive oracle")`` when the
    count exceeds ``cap``. Cost is exponential for :class:`KofN` and
    :class:`ConflictGraph`; intended for desk-scale instances only.
    """
    n = interference.n_links
    if isinstance(interference, KofN):
        count = sum(math.comb(n, j) for j in range(1, interference.k + 1))
        if count > cap:
            raise ValueError("instance too large for exhaustive oracle")
        out = []
        for size in range(1, interference.k + 1):
            out.extend(combinations(range(n), size))
        return out
    if isinstance(interference, ConflictGraph):
        sets = _independent_sets_lex(n, interference.adjacency_masks(), cap)
        return sorted(sets, key=lambda s: (len(s), s))
    if isinstance(interference, ExplicitSets):
        if len(interference.sets) > cap:
            raise ValueError("instance too large for exhaustive oracle")
        return sorted(interference.sets, key=lambda s: (len(s), s))
    raise TypeError(f"unknown interference model {type(interference)!r}")


@lru_cache(maxsize=256)
def lexicographic_candidates(interference: InterferenceModel) -> tuple[tuple[int, ...], ...]:
    """Feasible sets including the empty set, in pure lexicographic order.

    This is the canonical candidate order used for deterministic tie-breaking
    in max-weight selection: the first maximizer in this order wins.
    """
    sets = enumerate_feasible_sets(interference)
    return ((),) + tuple(sorted(sets))


class RngStream:
    """Deterministic random stream with a documented sub-stream derivation.

    The generator is counter-based Philox (4x64) keyed by
    ``SeedSequence(seed, spawn_key=path)``. Two streams with the same seed
    and path produce bit-identical samples. ``substream(i, j, ...)`` extends
    the path, giving statistically independent, reproducible child streams;
    this is the splitting rule used for parameter sweeps (one child per run
    index) and inside the simulator (child 0 drives the channel, child 1 the
    policy's own randomization).

    A single stream must not be shared across threads; distinct streams may.
    """

    __slots__ = ("seed", "path", "gen")

    def __init__(self, seed: int, path: tuple[int, ...] = ()):
        self.seed = int(seed)
        self.path = tuple(int(i) for i in path)
        ss = np.random.SeedSequence(self.seed, spawn_key=self.path)
        self.gen = np.random.Generator(np.random.Philox(ss))

    def substream(self, *indices: int) -> "RngStream":
        return RngStream(self.seed, self.path + indices)

    def random(self, size=None):
        return self.gen.random(size)

    def __repr__(self):
        return f"RngStream(seed={self.seed}, path={self.path})"


def sample_channel(network: Network, rng: RngStream) -> np.ndarray:
    """One slot of channel state: boolean vector, bit e ON with prob gamma_e.

    Consumes exactly one uniform draw per link, in increasing link index, so
    trajectories are reproducible across implementations of the same
    generator.
    """
    u = rng.gen.random(network.n_links)
    return u < network.gamma


def sample_channel_matrix(network: Network, rng: RngStream, horizon: int) -> np.ndarray:
    """Channel states for ``horizon`` slots as a (horizon, n_links) bool array.

    Draw order is slot-major with increasing link index within each slot,
    i.e. identical to ``horizon`` successive :func:`sample_channel` calls.
    """
    u = rng.gen.random((int(horizon), network.n_links))
    return u < network.gamma
