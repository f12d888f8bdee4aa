"""Finite datasets, canonical multiset keys and exact subsample enumeration."""

from __future__ import annotations

import math
from collections.abc import Iterable, Iterator, Mapping, Sequence
from dataclasses import dataclass
from functools import lru_cache

from privamp.amplification import Poisson, Relation, SubsamplingScheme, WithoutReplacement, WithReplacement
from privamp.divergence import DiscreteMeasure
from privamp.errors import BadParams, InstanceTooLarge, Unreachable

POISSON_MAX_SIZE = 16
MAX_OUTCOMES = 10**6


def _check_element(u: str) -> str:
    if not isinstance(u, str) or not u or ":" in u or "|" in u:
        raise BadParams(f"universe elements must be non-empty strings without ':' or '|', got {u!r}")
    return u


@dataclass(frozen=True)
class Dataset:
    """Multiset over an ordered universe.

    ``counts`` is stored in universe order with zero counts dropped, so two
    datasets with the same content compare (and hash) equal.
    """

    counts: tuple[tuple[str, int], ...]
    universe: tuple[str, ...]

    @classmethod
    def build(cls, elements: Mapping[str, int] | Iterable[str], universe: Sequence[str]) -> Dataset:
        universe = tuple(_check_element(u) for u in universe)
        if len(set(universe)) != len(universe):
            raise BadParams("universe contains duplicates")
        if isinstance(elements, Mapping):
            raw = dict(elements)
        else:
            raw = {}
            for u in elements:
                raw[u] = raw.get(u, 0) + 1
        pos = {u: i for i, u in enumerate(universe)}
        for u, c in raw.items():
            if u not in pos:
                raise BadParams(f"element {u!r} is not in the universe")
            if int(c) != c or c < 0:
                raise BadParams(f"count for {u!r} must be a non-negative integer, got {c!r}")
        counts = tuple((u, int(raw[u])) for u in universe if raw.get(u, 0) > 0)
        return cls(counts, universe)

    @property
    def size(self) -> int:
        return sum(c for _, c in self.counts)

    @property
    def is_set(self) -> bool:
        return all(c == 1 for _, c in self.counts)

    @property
    def key(self) -> str:
        return encode(self.counts)

    def as_dict(self) -> dict[str, int]:
        return dict(self.counts)

    def __contains__(self, u: str) -> bool:
        return any(v == u for v, _ in self.counts)

    def add(self, u: str) -> Dataset:
        d = self.as_dict()
        d[u] = d.get(u, 0) + 1
        return Dataset.build(d, self.universe)

    def remove(self, u: str) -> Dataset:
        d = self.as_dict()
        if d.get(u, 0) == 0:
            raise BadParams(f"{u!r} is not in the dataset")
        d[u] -= 1
        return Dataset.build(d, self.universe)

    def substitute(self, old: str, new: str) -> Dataset:
        return self.remove(old).add(new)


def encode(counts: Iterable[tuple[str, int]]) -> str:
    """Canonical key ``elem:count|elem:count`` (empty multiset -> ``""``)."""
    return "|".join(f"{u}:{c}" for u, c in counts if c > 0)


@lru_cache(maxsize=None)
def decode(key: str) -> tuple[tuple[str, int], ...]:
    if not key:
        return ()
    out = []
    for part in key.split("|"):
        u, _, c = part.rpartition(":")
        out.append((u, int(c)))
    return tuple(out)


def key_size(key: str) -> int:
    return sum(c for _, c in decode(key))


def _as_counts(x) -> dict[str, int]:
    if isinstance(x, Dataset):
        return x.as_dict()
    if isinstance(x, str):
        return dict(decode(x))
    return dict(x)


def path_distance(x, x_prime, relation: Relation | str) -> int:
    """Length of the shortest neighbour chain between two multisets.

    Accepts :class:`Dataset` objects, canonical keys, or count mappings.
    """
    relation = Relation(relation)
    a, b = _as_counts(x), _as_counts(x_prime)
    l1 = sum(abs(a.get(u, 0) - b.get(u, 0)) for u in set(a) | set(b))
    if relation is Relation.REMOVE_ADD:
        return l1
    if sum(a.values()) != sum(b.values()):
        raise Unreachable("substitution never changes dataset size")
    return l1 // 2


@lru_cache(maxsize=1 << 18)
def key_distance(k1: str, k2: str, relation: Relation) -> float:
    """Path distance between canonical keys; ``inf`` where no chain exists."""
    try:
        return path_distance(k1, k2, relation)
    except Unreachable:
        return math.inf


def _bounded_compositions(caps: Sequence[int], total: int) -> Iterator[tuple[int, ...]]:
    """All vectors ``0 <= y_i <= caps[i]`` summing to ``total``."""
    if not caps:
        if total == 0:
            yield ()
        return
    rest = sum(caps[1:])
    for first in range(max(0, total - rest), min(caps[0], total) + 1):
        for tail in _bounded_compositions(caps[1:], total - first):
            yield (first,) + tail


def enumerate_subsamples(scheme: SubsamplingScheme, x: Dataset) -> DiscreteMeasure:
    """Exact distribution of the subsample drawn from ``x``, keyed by canonical key.

    The scheme's ``n`` is the nominal size used by the bounds; the draw is
    always from the actual dataset (so WR on a size ``n - 1`` neighbour works).
    """
    elems = [u for u, _ in x.counts]
    caps = [c for _, c in x.counts]
    size = x.size
    if isinstance(scheme, Poisson):
        if size > POISSON_MAX_SIZE:
            raise InstanceTooLarge("Poisson dataset size", size, POISSON_MAX_SIZE)
        g = scheme.gamma
        pmfs = [[math.comb(c, j) * g**j * (1.0 - g) ** (c - j) for j in range(c + 1)] for c in caps]
        out = []
        for total in range(size + 1):
            for y in _bounded_compositions(caps, total):
                p = math.prod(pmfs[i][j] for i, j in enumerate(y))
                out.append((encode(zip(elems, y)), p))
        return DiscreteMeasure(out)
    if isinstance(scheme, WithoutReplacement):
        m = scheme.m
        if m > size:
            raise BadParams(f"cannot draw {m} elements without replacement from {size}")
        total_ways = math.comb(size, m)
        if total_ways > MAX_OUTCOMES:
            raise InstanceTooLarge("without-replacement subsets C(n, m)", total_ways, MAX_OUTCOMES)
        out = []
        for y in _bounded_compositions(caps, m):
            ways = math.prod(math.comb(c, j) for c, j in zip(caps, y))
            out.append((encode(zip(elems, y)), ways / total_ways))
        return DiscreteMeasure(out)
    if isinstance(scheme, WithReplacement):
        m = scheme.m
        if size == 0:
            raise BadParams("cannot sample with replacement from an empty dataset")
        n_multisets = math.comb(len(elems) + m - 1, m)
        if n_multisets > MAX_OUTCOMES:
            raise InstanceTooLarge("with-replacement multisets", n_multisets, MAX_OUTCOMES)
        denom = size**m
        fact_m = math.factorial(m)
        out = []
        for y in _bounded_compositions([m] * len(elems), m):
            multinomial = fact_m // math.prod(math.factorial(j) for j in y)
            num = multinomial * math.prod(c**j for c, j in zip(caps, y))
            out.append((encode(zip(elems, y)), num / denom))
        return DiscreteMeasure(out)
    raise BadParams(f"unknown subsampling scheme {scheme!r}")
