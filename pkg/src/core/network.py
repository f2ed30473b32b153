"""
Cache network problem instances, seeded random streams, demands and placement
"""
import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from core.errors import ConfigurationError, DimensionMismatchError

logger = logging.getLogger(__name__)

# Sub-stream labels of one trial; each component draws from its own generator
STREAM_COMPONENTS = {
    "placement": 0,
    "demands": 1,
    "graph": 2,
    "delivery": 3,
}


class CacheNetworkConfig(BaseModel):
    """K caches, a library of N files, capacity M files, Δ subfiles per file"""

    model_config = ConfigDict(frozen=True)

    K: int = Field(..., ge=1)
    N: int = Field(..., ge=1)
    M: int = Field(..., ge=0)
    delta: int = Field(default=1, ge=1)

    @model_validator(mode="after")
    def _check_capacity(self) -> "CacheNetworkConfig":
        if self.M > self.N:
            raise ValueError(f"cache capacity M={self.M} exceeds library size N={self.N}")
        return self

    @property
    def q(self) -> Fraction:
        """Per-item caching probability M/N, exact"""
        return Fraction(self.M, self.N)

    @property
    def q_float(self) -> float:
        return float(self.q)

    @property
    def item_count(self) -> int:
        """Items in the library (files when Δ = 1, subfiles otherwise)"""
        return self.N * self.delta

    @property
    def capacity(self) -> int:
        """Items stored per cache"""
        return self.M * self.delta

    @property
    def vertex_count(self) -> int:
        return self.K * self.delta


@dataclass(frozen=True)
class RngSpec:
    """
    Seed of one independent random stream.

    Streams are split with numpy's SeedSequence spawn keys:
    (master_seed) -> (stream_id) -> (component). Identical specs give
    identical draws regardless of which worker evaluates them.
    """

    master_seed: int
    stream_id: int = 0

    def __post_init__(self):
        if not 0 <= self.master_seed < 2 ** 64:
            raise ConfigurationError(f"master seed must be a 64-bit unsigned integer, got {self.master_seed}")
        if self.stream_id < 0:
            raise ConfigurationError(f"stream id must be non-negative, got {self.stream_id}")

    def generator(self, component: str) -> np.random.Generator:
        """Independent generator for one component of this stream"""
        try:
            label = STREAM_COMPONENTS[component]
        except KeyError:
            raise ConfigurationError(f"unknown random stream component: {component}") from None
        seq = np.random.SeedSequence(self.master_seed, spawn_key=(self.stream_id, label))
        return np.random.default_rng(seq)


@dataclass(frozen=True)
class DemandVector:
    """One requested file index per cache"""

    files: Tuple[int, ...]

    def __post_init__(self):
        if len(self.files) == 0:
            raise ConfigurationError("demand vector must not be empty")
        if min(self.files) < 0:
            raise ConfigurationError("file indices must be non-negative")

    def __len__(self) -> int:
        return len(self.files)

    def __getitem__(self, k: int) -> int:
        return self.files[k]

    def as_array(self) -> np.ndarray:
        return np.asarray(self.files, dtype=np.int64)


@dataclass(frozen=True, eq=False)
class Placement:
    """
    Cache contents as a read-only K x (N·Δ) membership matrix.

    Row k marks the items stored in cache k. Rows hold at most M·Δ items;
    placements produced by `place` hold exactly that many.
    """

    stored: np.ndarray
    capacity: int

    def __post_init__(self):
        stored = np.array(self.stored, dtype=bool, copy=True)
        if stored.ndim != 2:
            raise DimensionMismatchError(f"placement matrix must be 2-D, got shape {stored.shape}")
        if stored.shape[0] and stored.sum(axis=1).max() > self.capacity:
            raise ConfigurationError(f"a cache stores more than {self.capacity} items")
        stored.setflags(write=False)
        object.__setattr__(self, "stored", stored)

    @property
    def cache_count(self) -> int:
        return self.stored.shape[0]

    @property
    def item_universe_size(self) -> int:
        return self.stored.shape[1]

    def items(self, k: int) -> frozenset:
        """Item indices stored in cache k"""
        return frozenset(int(i) for i in np.flatnonzero(self.stored[k]))

    def has(self, k: int, item: int) -> bool:
        return bool(self.stored[k, item])

    def without(self, k: int, item: int) -> "Placement":
        """Copy of this placement with one item evicted from cache k"""
        stored = self.stored.copy()
        stored[k, item] = False
        return Placement(stored=stored, capacity=self.capacity)


def draw_demands(cfg: CacheNetworkConfig, rng: RngSpec) -> DemandVector:
    """K independent uniform requests over the library"""
    gen = rng.generator("demands")
    files = gen.integers(0, cfg.N, size=cfg.K)
    return DemandVector(files=tuple(int(f) for f in files))


def distinct_count(d: DemandVector) -> int:
    """Number of distinct files requested"""
    return len(set(d.files))


def place(cfg: CacheNetworkConfig, rng: RngSpec) -> Placement:
    """
    Decentralized placement: every cache independently stores a uniform
    random (M·Δ)-subset of the N·Δ library items.

    Each row is an independent Fisher-Yates shuffle of the item indices
    truncated to its first M·Δ entries, which is an exactly uniform
    subset without replacement.
    """
    n, m = cfg.item_count, cfg.capacity
    stored = np.zeros((cfg.K, n), dtype=bool)
    if m == n:
        stored[:] = True
    elif m > 0:
        gen = rng.generator("placement")
        pool = np.tile(np.arange(n), (cfg.K, 1))
        chosen = gen.permuted(pool, axis=1)[:, :m]
        np.put_along_axis(stored, chosen, True, axis=1)
    return Placement(stored=stored, capacity=m)


def demanded_items(cfg: CacheNetworkConfig, d: DemandVector) -> np.ndarray:
    """Item index requested at each vertex v = k·Δ + δ (cache-major)"""
    if len(d) != cfg.K:
        raise DimensionMismatchError(f"demand vector has {len(d)} entries for K={cfg.K} caches")
    files = d.as_array()
    if files.max() >= cfg.N:
        raise DimensionMismatchError(f"demand refers to a file outside the library of N={cfg.N}")
    return np.repeat(files * cfg.delta, cfg.delta) + np.tile(np.arange(cfg.delta), cfg.K)


def vertex_caches(cfg: CacheNetworkConfig) -> np.ndarray:
    """Cache index of each vertex"""
    return np.repeat(np.arange(cfg.K), cfg.delta)
