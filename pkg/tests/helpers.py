"""
Test oracles: exact minimum clique cover and XOR payload decoding
"""
from functools import lru_cache
from typing import Dict, Sequence

import numpy as np

from core.graphs import SideInfoGraph
from core.network import CacheNetworkConfig, DemandVector, Placement, demanded_items, vertex_caches


def min_clique_cover(g: SideInfoGraph) -> int:
    """Minimum number of cliques covering the unlooped vertices (exponential)"""
    vertices = [v for v in range(g.vertex_count) if not g.loops[v]]
    masks = g.neighbor_masks

    # clique flag for every vertex subset, grown one highest vertex at a time
    is_clique = [True] * (1 << g.vertex_count)
    for subset in range(1, 1 << g.vertex_count):
        top = subset.bit_length() - 1
        rest = subset ^ (1 << top)
        is_clique[subset] = is_clique[rest] and masks[top] & rest == rest

    @lru_cache(maxsize=None)
    def cover(remaining: int) -> int:
        if remaining == 0:
            return 0
        low = remaining & -remaining
        best = None
        rest = remaining ^ low
        # every clique holding the lowest remaining vertex
        sub = rest
        while True:
            clique = sub | low
            if is_clique[clique]:
                count = 1 + cover(remaining & ~clique)
                best = count if best is None else min(best, count)
            if sub == 0:
                break
            sub = (sub - 1) & rest
        return best

    return cover(sum(1 << v for v in vertices))


def xor_round_trip(
    messages: Sequence[Sequence[int]],
    placement: Placement,
    demands: DemandVector,
    cfg: CacheNetworkConfig,
    seed: int = 0,
    payload_bytes: int = 16,
) -> bool:
    """Broadcast XOR payloads and check every member recovers its demanded item"""
    gen = np.random.default_rng(seed)
    library: Dict[int, np.ndarray] = {
        item: gen.integers(0, 256, payload_bytes, dtype=np.uint8) for item in range(cfg.item_count)
    }
    items = demanded_items(cfg, demands)
    caches = vertex_caches(cfg)
    for message in messages:
        coded = np.zeros(payload_bytes, dtype=np.uint8)
        for v in message:
            coded ^= library[int(items[v])]
        for v in message:
            decoded = coded.copy()
            for u in message:
                if u == v:
                    continue
                if not placement.has(int(caches[v]), int(items[u])):
                    return False
                decoded ^= library[int(items[u])]
            if not np.array_equal(decoded, library[int(items[v])]):
                return False
    return True
