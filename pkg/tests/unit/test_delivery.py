"""
Tests for clique cover and matching delivery
"""
from fractions import Fraction

import numpy as np
import pytest

from core.errors import DimensionMismatchError
from core.graphs import build_digraph, build_graph, generate_Ga, parse_adjacency
from core.network import CacheNetworkConfig, RngSpec, demanded_items, draw_demands, place, vertex_caches
from helpers import min_clique_cover, xor_round_trip
from services.delivery import (
    DeliveryResult,
    clique_cover_deliver,
    large_clique_coverage,
    matching_deliver,
    verify_decodability,
)

TRIANGLE_WITH_TAIL = (
    "0 loop:0 neighbors:1,2\n"
    "1 loop:0 neighbors:0,2\n"
    "2 loop:0 neighbors:0,1,3\n"
    "3 loop:0 neighbors:2\n"
)


def _instance(cfg, seed, stream=0):
    rng = RngSpec(seed, stream)
    p = place(cfg, rng)
    d = draw_demands(cfg, rng)
    return p, d, build_graph(build_digraph(p, d, cfg)), rng


class TestCliqueCover:
    """Greedy online clique cover"""

    def test_joins_largest_suitable_clique(self, rng):
        res = clique_cover_deliver(parse_adjacency(TRIANGLE_WITH_TAIL), rng)
        assert res.messages == ((0, 1, 2), (3,))
        assert res.clique_histogram == (0, 1, 0, 1, 0)
        assert res.max_clique == 3

    def test_skips_looped_vertices(self, rng):
        g = parse_adjacency("0 loop:1 neighbors:1\n1 loop:0 neighbors:0\n2 loop:1 neighbors:\n")
        res = clique_cover_deliver(g, rng)
        assert res.messages == ((1,),)
        assert res.skipped_looped == frozenset({0, 2})

    def test_empty_graph_one_message_per_vertex(self, rng):
        g = parse_adjacency("0 loop:0 neighbors:\n1 loop:0 neighbors:\n2 loop:0 neighbors:\n")
        assert clique_cover_deliver(g, rng).message_count == 3

    def test_all_looped_sends_nothing(self, rng):
        cfg = CacheNetworkConfig(K=8, N=10, M=10)
        _, _, g, _ = _instance(cfg, 4)
        res = clique_cover_deliver(g, rng)
        assert res.message_count == 0
        assert res.rate_files == 0

    def test_messages_are_cliques(self):
        cfg = CacheNetworkConfig(K=30, N=60, M=30)
        for stream in range(5):
            _, _, g, rng = _instance(cfg, 11, stream)
            res = clique_cover_deliver(g, rng)
            assert all(g.is_clique(m) for m in res.messages)

    def test_tie_break_is_seeded(self):
        # vertex 2 is adjacent to both singleton cliques {0} and {1}
        g = parse_adjacency("0 loop:0 neighbors:2\n1 loop:0 neighbors:2\n2 loop:0 neighbors:0,1\n")
        joined = set()
        for stream in range(40):
            a = clique_cover_deliver(g, RngSpec(8, stream))
            b = clique_cover_deliver(g, RngSpec(8, stream))
            assert a.messages == b.messages
            joined.add(a.messages)
        assert joined == {((0, 2), (1,)), ((0,), (1, 2))}


class TestMatching:
    """Online greedy matching"""

    def test_path(self, rng):
        g = parse_adjacency("0 loop:0 neighbors:1\n1 loop:0 neighbors:0,2\n2 loop:0 neighbors:1\n")
        res = matching_deliver(g, rng)
        assert res.messages == ((0, 1), (2,))

    def test_triangle_pairs_once(self, rng):
        res = matching_deliver(parse_adjacency(TRIANGLE_WITH_TAIL), rng)
        assert res.max_clique <= 2
        assert sorted(v for m in res.messages for v in m) == [0, 1, 2, 3]
        assert res.message_count == 2

    def test_never_beats_half_the_unlooped(self):
        cfg = CacheNetworkConfig(K=40, N=80, M=40)
        for stream in range(5):
            _, _, g, rng = _instance(cfg, 21, stream)
            res = matching_deliver(g, rng)
            unlooped = int((~g.loops).sum())
            assert res.message_count >= (unlooped + 1) // 2

    def test_ordering_in_expectation(self):
        cfg = CacheNetworkConfig(K=40, N=10, M=5)
        cliques = pairs = unlooped = 0
        for stream in range(200):
            rng = RngSpec(31, stream)
            g = generate_Ga(cfg, rng)
            cliques += clique_cover_deliver(g, rng).message_count
            pairs += matching_deliver(g, rng).message_count
            unlooped += int((~g.loops).sum())
        assert cliques < pairs <= unlooped


class TestResult:
    def test_subfile_rate_in_file_units(self):
        res = DeliveryResult(messages=((0, 3), (1,), (2,)), vertex_count=4, delta=2,
                             skipped_looped=frozenset(), algorithm="clique_cover")
        assert res.rate_files == Fraction(3, 2)

    def test_large_clique_coverage(self):
        res = DeliveryResult(messages=((0, 1, 2), (3, 4), (5,)), vertex_count=8, delta=1,
                             skipped_looped=frozenset({6, 7}), algorithm="clique_cover")
        assert large_clique_coverage(res) == Fraction(3, 8)


class TestDecodability:
    """Cover validity against placement and demands"""

    @pytest.mark.parametrize("deliver", [clique_cover_deliver, matching_deliver])
    def test_random_instances_decode(self, deliver):
        cfg = CacheNetworkConfig(K=20, N=100, M=20)
        for stream in range(25):
            p, d, g, rng = _instance(cfg, 3, stream)
            res = deliver(g, rng)
            assert verify_decodability(res, p, d, cfg)
            assert xor_round_trip(res.messages, p, d, cfg, seed=stream)

    def test_subfile_instances_decode(self):
        cfg = CacheNetworkConfig(K=8, N=20, M=6, delta=3)
        for stream in range(10):
            p, d, g, rng = _instance(cfg, 5, stream)
            res = clique_cover_deliver(g, rng)
            assert verify_decodability(res, p, d, cfg)
            assert xor_round_trip(res.messages, p, d, cfg)

    def test_eviction_breaks_decoding(self):
        cfg = CacheNetworkConfig(K=20, N=40, M=20)
        p, d, g, rng = _instance(cfg, 17)
        res = clique_cover_deliver(g, rng)
        coded = next(m for m in res.messages if len(m) >= 2)
        v, u = coded[0], coded[1]
        items = demanded_items(cfg, d)
        cache = int(vertex_caches(cfg)[v])
        broken = p.without(cache, int(items[u]))
        assert not verify_decodability(res, broken, d, cfg)
        assert not xor_round_trip(res.messages, broken, d, cfg)

    def test_missing_vertex_detected(self):
        cfg = CacheNetworkConfig(K=10, N=40, M=5)
        p, d, g, rng = _instance(cfg, 2)
        res = clique_cover_deliver(g, rng)
        partial = DeliveryResult(messages=res.messages[1:], vertex_count=res.vertex_count, delta=1,
                                 skipped_looped=res.skipped_looped, algorithm=res.algorithm)
        assert not verify_decodability(partial, p, d, cfg)

    def test_looped_vertex_sent_detected(self):
        cfg = CacheNetworkConfig(K=4, N=4, M=4)
        p, d, g, rng = _instance(cfg, 2)
        res = DeliveryResult(messages=((0,),), vertex_count=4, delta=1,
                             skipped_looped=frozenset(range(4)), algorithm="clique_cover")
        assert not verify_decodability(res, p, d, cfg)

    def test_dimension_mismatch(self):
        cfg = CacheNetworkConfig(K=10, N=40, M=5)
        p, d, g, rng = _instance(cfg, 2)
        res = clique_cover_deliver(g, rng)
        with pytest.raises(DimensionMismatchError):
            verify_decodability(res, p, d, CacheNetworkConfig(K=11, N=40, M=5))


class TestAgainstOptimum:
    """Greedy cover size never beats the exact minimum"""

    def test_all_graphs_on_four_vertices(self, rng):
        pairs = [(u, v) for u in range(4) for v in range(u + 1, 4)]
        for pattern in range(1 << len(pairs)):
            for loops in range(1 << 4):
                adjacency = np.zeros((4, 4), dtype=bool)
                for bit, (u, v) in enumerate(pairs):
                    if pattern >> bit & 1:
                        adjacency[u, v] = adjacency[v, u] = True
                looped = np.array([loops >> v & 1 for v in range(4)], dtype=bool)
                g = parse_adjacency(_dump(adjacency, looped))
                assert clique_cover_deliver(g, rng).message_count >= min_clique_cover(g)


def _dump(adjacency, loops):
    lines = []
    for v in range(len(loops)):
        neighbors = ",".join(str(u) for u in np.flatnonzero(adjacency[v]))
        lines.append(f"{v} loop:{int(loops[v])} neighbors:{neighbors}")
    return "\n".join(lines) + "\n"
