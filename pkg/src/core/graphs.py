"""
Side information digraph/graph construction and the asymptotic random models
"""
import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Iterator, List, Tuple

import numpy as np

from core.errors import ConfigurationError, DimensionMismatchError
from core.network import (
    CacheNetworkConfig,
    DemandVector,
    Placement,
    RngSpec,
    demanded_items,
    vertex_caches,
)

logger = logging.getLogger(__name__)


def iter_bits(mask: int) -> Iterator[int]:
    """Indices of the set bits of an integer bitset, ascending"""
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


def _row_masks(adjacency: np.ndarray) -> Tuple[int, ...]:
    packed = np.packbits(adjacency, axis=1, bitorder="little")
    return tuple(int.from_bytes(row.tobytes(), "little") for row in packed)


def _frozen(array: np.ndarray) -> np.ndarray:
    out = np.array(array, dtype=bool, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class _SideInfo:
    adjacency: np.ndarray
    loops: np.ndarray
    delta: int = 1

    def __post_init__(self):
        adjacency = _frozen(self.adjacency)
        loops = _frozen(self.loops)
        v = loops.shape[0]
        if adjacency.shape != (v, v):
            raise DimensionMismatchError(f"adjacency shape {adjacency.shape} does not match {v} vertices")
        if self.delta < 1 or v % self.delta:
            raise DimensionMismatchError(f"{v} vertices cannot be split into groups of delta={self.delta}")
        if adjacency.diagonal().any():
            raise ConfigurationError("self adjacency is not allowed; loops are tracked separately")
        object.__setattr__(self, "adjacency", adjacency)
        object.__setattr__(self, "loops", loops)

    @property
    def vertex_count(self) -> int:
        return self.loops.shape[0]

    def vertex_meta(self, v: int) -> Tuple[int, int]:
        """(cache index, subfile index) of vertex v"""
        return divmod(v, self.delta)

    @cached_property
    def neighbor_masks(self) -> Tuple[int, ...]:
        """Row v as an integer bitset of out-neighbors"""
        return _row_masks(self.adjacency)

    @cached_property
    def loop_mask(self) -> int:
        return sum(1 << int(v) for v in np.flatnonzero(self.loops))

    def edge_count(self) -> int:
        return int(self.adjacency.sum())


@dataclass(frozen=True, eq=False)
class SideInfoDigraph(_SideInfo):
    """Edge u -> v iff u's cache holds the item requested at v"""


@dataclass(frozen=True, eq=False)
class SideInfoGraph(_SideInfo):
    """Undirected edge {u, v} iff both directed edges exist"""

    def __post_init__(self):
        super().__post_init__()
        if not np.array_equal(self.adjacency, self.adjacency.T):
            raise ConfigurationError("side information graph adjacency must be symmetric")

    def edge_count(self) -> int:
        return int(self.adjacency.sum()) // 2

    def is_clique(self, vertices) -> bool:
        members = list(vertices)
        masks = self.neighbor_masks
        for v in members:
            others = sum(1 << u for u in members if u != v)
            if masks[v] & others != others:
                return False
        return True


def build_digraph(p: Placement, d: DemandVector, cfg: CacheNetworkConfig) -> SideInfoDigraph:
    """
    Side information digraph on K·Δ vertices.

    Vertex v = k·Δ + δ stands for subfile δ of the file cache k requests.
    It is looped when cache k stores that item; (l, θ) -> (k, δ) for every
    θ when cache l != k stores it. No edges join vertices of one cache.
    """
    if p.cache_count != cfg.K or p.item_universe_size != cfg.item_count:
        raise DimensionMismatchError(
            f"placement shape {p.stored.shape} does not match K={cfg.K}, N·Δ={cfg.item_count}"
        )
    items = demanded_items(cfg, d)
    caches = vertex_caches(cfg)
    holds = p.stored[caches][:, items]
    loops = holds.diagonal().copy()
    adjacency = holds & (caches[:, None] != caches[None, :])
    return SideInfoDigraph(adjacency=adjacency, loops=loops, delta=cfg.delta)


def build_graph(dg: SideInfoDigraph) -> SideInfoGraph:
    """Keep only the bidirectional edges of a digraph"""
    adjacency = dg.adjacency & dg.adjacency.T
    return SideInfoGraph(adjacency=adjacency, loops=dg.loops, delta=dg.delta)


def _require_file_caching(cfg: CacheNetworkConfig):
    if cfg.delta != 1:
        raise ConfigurationError("asymptotic graph models are defined for file caching only (delta = 1)")


def generate_Da(cfg: CacheNetworkConfig, rng: RngSpec) -> SideInfoDigraph:
    """Every directed edge and loop present independently with probability q"""
    _require_file_caching(cfg)
    gen = rng.generator("graph")
    q = cfg.q_float
    loops = gen.random(cfg.K) < q
    adjacency = gen.random((cfg.K, cfg.K)) < q
    np.fill_diagonal(adjacency, False)
    return SideInfoDigraph(adjacency=adjacency, loops=loops)


def generate_Ga(cfg: CacheNetworkConfig, rng: RngSpec) -> SideInfoGraph:
    """Edges present independently with probability q², loops with probability q"""
    _require_file_caching(cfg)
    gen = rng.generator("graph")
    q = cfg.q_float
    loops = gen.random(cfg.K) < q
    upper = np.triu(gen.random((cfg.K, cfg.K)) < q * q, k=1)
    return SideInfoGraph(adjacency=upper | upper.T, loops=loops)


def dump_adjacency(graph: _SideInfo) -> str:
    """Debug text: one line per vertex, `v loop:{0|1} neighbors:a,b,...`"""
    lines = []
    for v, mask in enumerate(graph.neighbor_masks):
        neighbors = ",".join(str(u) for u in iter_bits(mask))
        lines.append(f"{v} loop:{int(graph.loops[v])} neighbors:{neighbors}")
    return "\n".join(lines) + "\n"


def parse_adjacency(text: str, directed: bool = False, delta: int = 1) -> _SideInfo:
    """Inverse of dump_adjacency, for fixtures"""
    rows: List[Tuple[int, bool, List[int]]] = []
    for line in text.strip().splitlines():
        vertex, loop, neighbors = line.split()
        listed = neighbors.split(":", 1)[1]
        rows.append((int(vertex), loop.endswith("1"), [int(u) for u in listed.split(",") if u]))
    v = len(rows)
    adjacency = np.zeros((v, v), dtype=bool)
    loops = np.zeros(v, dtype=bool)
    for vertex, looped, neighbors in rows:
        loops[vertex] = looped
        adjacency[vertex, neighbors] = True
    cls = SideInfoDigraph if directed else SideInfoGraph
    return cls(adjacency=adjacency, loops=loops, delta=delta)
