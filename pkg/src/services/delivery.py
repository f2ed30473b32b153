"""
Delivery algorithms on the side information graph: greedy clique cover
and online matching, with rate accounting and decodability checks
"""
import logging
from collections import defaultdict
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Tuple

import numpy as np

from core.errors import DimensionMismatchError
from core.graphs import SideInfoGraph, iter_bits
from core.network import (
    CacheNetworkConfig,
    DemandVector,
    Placement,
    RngSpec,
    demanded_items,
    vertex_caches,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class DeliveryResult:
    """Coded transmissions for one demand round; each message XORs its members' items"""

    messages: Tuple[Tuple[int, ...], ...]
    vertex_count: int
    delta: int
    skipped_looped: frozenset
    algorithm: str

    @property
    def message_count(self) -> int:
        return len(self.messages)

    @property
    def rate_files(self) -> Fraction:
        """Broadcast size in file units"""
        return Fraction(len(self.messages), self.delta)

    @property
    def covered(self) -> frozenset:
        return frozenset(v for message in self.messages for v in message)

    @property
    def clique_histogram(self) -> Tuple[int, ...]:
        """Message counts by size, index s = 0..vertex_count"""
        counts = [0] * (self.vertex_count + 1)
        for message in self.messages:
            counts[len(message)] += 1
        return tuple(counts)

    @property
    def max_clique(self) -> int:
        return max((len(m) for m in self.messages), default=0)


def _looped(g: SideInfoGraph) -> frozenset:
    return frozenset(int(v) for v in np.flatnonzero(g.loops))


def clique_cover_deliver(g: SideInfoGraph, rng: RngSpec) -> DeliveryResult:
    """
    Greedy clique cover over vertices arriving in label order.

    Looped vertices are skipped. An arriving vertex joins one of the
    largest previously formed cliques whose members are all its neighbors
    (uniform tie-break), or opens a new clique of size 1.
    """
    gen = rng.generator("delivery")
    masks = g.neighbor_masks
    clique_masks: List[int] = []
    buckets: Dict[int, List[int]] = defaultdict(list)  # size -> clique ids

    for v in range(g.vertex_count):
        if g.loops[v]:
            continue
        neighbors = masks[v]
        chosen, size = None, 0
        for size in sorted(buckets, reverse=True):
            suitable = [c for c in buckets[size] if clique_masks[c] & neighbors == clique_masks[c]]
            if suitable:
                chosen = suitable[0] if len(suitable) == 1 else suitable[int(gen.integers(len(suitable)))]
                break
        if chosen is None:
            clique_masks.append(1 << v)
            buckets[1].append(len(clique_masks) - 1)
            continue
        buckets[size].remove(chosen)
        if not buckets[size]:
            del buckets[size]
        clique_masks[chosen] |= 1 << v
        buckets[size + 1].append(chosen)

    messages = tuple(tuple(iter_bits(mask)) for mask in clique_masks)
    return DeliveryResult(
        messages=messages,
        vertex_count=g.vertex_count,
        delta=g.delta,
        skipped_looped=_looped(g),
        algorithm="clique_cover",
    )


def matching_deliver(g: SideInfoGraph, rng: RngSpec) -> DeliveryResult:
    """
    Online greedy matching over vertices arriving in label order.

    Looped vertices are removed on arrival; an unlooped vertex is paired with
    a uniformly chosen unmatched earlier neighbor, otherwise it waits.
    Vertices still unmatched at the end are sent uncoded.
    """
    gen = rng.generator("delivery")
    masks = g.neighbor_masks
    waiting = 0
    pairs: List[Tuple[int, ...]] = []

    for v in range(g.vertex_count):
        if g.loops[v]:
            continue
        candidates = masks[v] & waiting
        if not candidates:
            waiting |= 1 << v
            continue
        options = list(iter_bits(candidates))
        u = options[0] if len(options) == 1 else options[int(gen.integers(len(options)))]
        waiting &= ~(1 << u)
        pairs.append((u, v))

    messages = tuple(pairs) + tuple((v,) for v in iter_bits(waiting))
    return DeliveryResult(
        messages=messages,
        vertex_count=g.vertex_count,
        delta=g.delta,
        skipped_looped=_looped(g),
        algorithm="matching",
    )


def verify_decodability(res: DeliveryResult, p: Placement, d: DemandVector, cfg: CacheNetworkConfig) -> bool:
    """
    True iff every member of every message caches the items demanded by the
    other members, and the messages cover each unlooped vertex exactly once
    and no looped vertex.
    """
    if res.vertex_count != cfg.vertex_count or res.delta != cfg.delta:
        raise DimensionMismatchError(
            f"result has {res.vertex_count} vertices (delta={res.delta}), config expects {cfg.vertex_count}"
        )
    if p.cache_count != cfg.K or p.item_universe_size != cfg.item_count:
        raise DimensionMismatchError(f"placement shape {p.stored.shape} does not match the config")
    items = demanded_items(cfg, d)
    caches = vertex_caches(cfg)
    looped = p.stored[caches, items]

    seen = np.zeros(cfg.vertex_count, dtype=np.int64)
    for message in res.messages:
        members = np.asarray(message, dtype=np.int64)
        seen[members] += 1
        if len(members) < 2:
            continue
        side_info = p.stored[caches[members]][:, items[members]]
        np.fill_diagonal(side_info, True)
        if not side_info.all():
            logger.debug(f"message {message} is not decodable by all of its members")
            return False
    if np.any(seen[~looped] != 1) or np.any(seen[looped] != 0):
        logger.debug("messages do not partition the unlooped vertices")
        return False
    return True


def large_clique_coverage(res: DeliveryResult) -> Fraction:
    """Fraction of vertices covered by messages of size at least 3"""
    covered = sum(s * count for s, count in enumerate(res.clique_histogram) if s >= 3)
    return Fraction(covered, res.vertex_count)
