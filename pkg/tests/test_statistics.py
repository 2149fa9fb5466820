import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lergm_stein import BlockPartition, LergmGraph, enumerate_edge_labels, toggle_edge
from lergm_stein.statistics import (
    ModelSpec,
    StatisticSpec,
    WEIGHTED_DEGREE,
    change_bits,
    change_matrix,
    change_statistic,
    edges,
    eval_bits,
    eval_statistic,
    growth_constant,
    growth_constants,
    gwd,
    gwd_bipartite,
    parse_statistic,
    poch,
    poch_bipartite,
    pochhammer_weights,
    removal_difference,
)

E = math.e


def full_spec(partition):
    L = partition.M + 1
    return ModelSpec(
        partition,
        [edges(), gwd(1.0, L), poch(1, 2, L)],
        [edges(), gwd_bipartite(1, 0.7, L), gwd_bipartite(2, 1.3, L), poch_bipartite(2, 2, 1, L)],
    )


def random_graph(partition, rng, p=0.5):
    g = LergmGraph.empty(partition)
    for pair in partition.pairs():
        g.set_subgraph_bits(pair, (rng.random(partition.n_labels(pair)) < p).astype(np.uint8))
    return g


class TestWeightTables:
    def test_pochhammer(self):
        np.testing.assert_allclose(pochhammer_weights(1, 2, 4), [1 / 2, 1 / 6, 1 / 12, 1 / 20])
        np.testing.assert_allclose(pochhammer_weights(2, 1, 3), [1 / 2, 1 / 3, 1 / 4])

    def test_monotonicity_flags(self):
        assert gwd(1.0, 5).monotonicity == "decreasing"
        assert poch(1, 1, 5).monotonicity == "decreasing"
        assert edges().monotonicity == "increasing"
        assert StatisticSpec(WEIGHTED_DEGREE, [0.0, 1.0, 0.0]).monotonicity == "none"

    def test_declared_monotonicity_checked(self):
        with pytest.raises(ValueError):
            StatisticSpec(WEIGHTED_DEGREE, [1.0, 2.0, 3.0], monotonicity="decreasing")

    @pytest.mark.parametrize("table", [[1.0], [1.0, np.nan], [[1.0, 2.0]]])
    def test_bad_tables(self, table):
        with pytest.raises(ValueError):
            StatisticSpec(WEIGHTED_DEGREE, table)

    def test_bipartite_side(self):
        with pytest.raises(ValueError):
            gwd_bipartite(3, 1.0, 4)


class TestParse:
    def test_names(self):
        assert parse_statistic("edges", 5).kind == "edges"
        np.testing.assert_allclose(parse_statistic("gwd(1)", 4).table, np.exp(-np.arange(4)))
        np.testing.assert_allclose(parse_statistic("gwd", 4).table, np.exp(-np.arange(4)))
        s = parse_statistic("gwd_bipartite(2, 0.5)", 4)
        assert s.side == 2
        np.testing.assert_allclose(s.table, np.exp(-0.5 * np.arange(4)))
        np.testing.assert_allclose(parse_statistic("poch(1,2)", 3).table, [1 / 2, 1 / 6, 1 / 12])

    @pytest.mark.parametrize("text", ["triangles", "gwd(1,2)", "edges(1)", "poch(1)", "gwd(", ""])
    def test_rejects(self, text):
        with pytest.raises(ValueError):
            parse_statistic(text, 4)


class TestModelSpec:
    def test_dims_and_names(self):
        spec = full_spec(BlockPartition((3, 4)))
        assert spec.d1 == 3 and spec.d2 == 4
        assert spec.param_names() == [
            "beta_W1", "beta_W2", "beta_W3", "beta_B1", "beta_B2", "beta_B3", "beta_B4",
        ]

    def test_bipartite_within_rejected(self):
        with pytest.raises(ValueError):
            ModelSpec(BlockPartition((3,)), [gwd_bipartite(1, 1.0, 4)], [])

    def test_table_length(self):
        part = BlockPartition((4, 4))
        ModelSpec(part, [gwd(1.0, 4)], [])
        with pytest.raises(ValueError):
            ModelSpec(part, [gwd(1.0, 3)], [])
        with pytest.raises(ValueError):
            ModelSpec(part, [], [gwd_bipartite(1, 1.0, 4)])


class TestEvalStatistic:
    def test_three_vertex_examples(self):
        part = BlockPartition((3,))
        spec = ModelSpec(part, [edges(), gwd(1.0, 4)], [])
        g = LergmGraph.from_edges(part, [(0, 1)])
        np.testing.assert_allclose(eval_statistic(spec, g, (0, 0)), [1.0, 2 / E + 1], rtol=1e-14)
        assert eval_statistic(spec, g, (0, 0))[1] == pytest.approx(1.7358, abs=1e-4)

    def test_bipartite_side_one(self):
        part = BlockPartition((2, 2))
        spec = ModelSpec(part, [], [gwd_bipartite(1, 1.0, 3), gwd_bipartite(2, 1.0, 3)])
        g = LergmGraph.from_edges(part, [(0, 2)])
        np.testing.assert_allclose(eval_statistic(spec, g, (0, 1)), [1 / E + 1, 1 / E + 1])
        g = LergmGraph.from_edges(part, [(0, 2), (0, 3)])
        np.testing.assert_allclose(eval_statistic(spec, g, (0, 1)), [E**-2 + 1, 2 / E])

    def test_eval_bits_matches_graph(self):
        part = BlockPartition((4, 3))
        spec = full_spec(part)
        rng = np.random.default_rng(0)
        for _ in range(20):
            g = random_graph(part, rng)
            for pair in part.pairs():
                np.testing.assert_allclose(
                    eval_bits(spec, pair, g.subgraph_bits(pair)[None])[0],
                    eval_statistic(spec, g, pair),
                    rtol=1e-14,
                )

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=30, deadline=None)
    def test_degree_histogram_size(self, seed):
        part = BlockPartition((5, 4))
        g = random_graph(part, np.random.default_rng(seed))
        for pair in part.pairs():
            deg = g.degrees(pair)
            assert np.bincount(deg).sum() == len(deg)


class TestChangeStatistic:
    def test_edges_is_one(self):
        part = BlockPartition((4, 3))
        spec = ModelSpec(part, [edges()], [edges()])
        g = random_graph(part, np.random.default_rng(1))
        for pair in part.pairs():
            delta, _ = change_matrix(spec, g, pair)
            np.testing.assert_array_equal(delta, 1.0)

    def test_three_vertex_gwd(self):
        part = BlockPartition((3,))
        spec = ModelSpec(part, [gwd(1.0, 4)], [])
        g = LergmGraph.from_edges(part, [(0, 1)])
        val = change_statistic(spec, g, (0, 0), g.label(0, 2))
        np.testing.assert_allclose(val, [E**-2 - 1], rtol=1e-14)
        assert val[0] == pytest.approx(-0.8647, abs=1e-4)

    def test_brute_force_oracle(self):
        part = BlockPartition((5, 4, 3))
        spec = full_spec(part)
        rng = np.random.default_rng(2)
        for _ in range(100):
            g = random_graph(part, rng, rng.random())
            pair = part.pairs()[rng.integers(len(part.pairs()))]
            labels = enumerate_edge_labels(part, pair)
            m = labels[rng.integers(len(labels))]
            expect = eval_statistic(spec, toggle_edge(g, m, 1), pair) - eval_statistic(spec, toggle_edge(g, m, 0), pair)
            np.testing.assert_allclose(change_statistic(spec, g, pair, m), expect, rtol=0, atol=1e-12)

    def test_change_matrix_rows(self):
        part = BlockPartition((4, 3))
        spec = full_spec(part)
        g = random_graph(part, np.random.default_rng(3))
        for pair in part.pairs():
            delta, x = change_matrix(spec, g, pair)
            np.testing.assert_array_equal(x, g.subgraph_bits(pair))
            for i, m in enumerate(enumerate_edge_labels(part, pair)):
                np.testing.assert_allclose(delta[i], change_statistic(spec, g, pair, m), rtol=0, atol=1e-15)
            np.testing.assert_allclose(change_bits(spec, pair, x[None])[0], delta, rtol=0, atol=1e-15)

    def test_wrong_pair(self):
        part = BlockPartition((3, 3))
        spec = full_spec(part)
        g = LergmGraph.empty(part)
        with pytest.raises(ValueError):
            change_statistic(spec, g, (0, 1), g.label(0, 1))


class TestRemovalDifference:
    def test_absent_is_zero(self):
        part = BlockPartition((4,))
        spec = ModelSpec(part, [edges(), gwd(1.0, 4)], [])
        g = LergmGraph.from_edges(part, [(0, 1)])
        np.testing.assert_array_equal(removal_difference(spec, g, (0, 0), g.label(2, 3)), [0.0, 0.0])

    def test_present(self):
        part = BlockPartition((4,))
        spec = ModelSpec(part, [edges(), gwd(1.0, 4)], [])
        g = LergmGraph.from_edges(part, [(0, 1), (1, 2)])
        m = g.label(0, 1)
        r = removal_difference(spec, g, (0, 0), m)
        assert r[0] == 1.0
        assert r[1] < 0
        np.testing.assert_allclose(
            r, eval_statistic(spec, g, (0, 0)) - eval_statistic(spec, toggle_edge(g, m, 0), (0, 0)), atol=1e-15
        )

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=30, deadline=None)
    def test_decreasing_table_negative(self, seed):
        rng = np.random.default_rng(seed)
        part = BlockPartition((6,))
        spec = ModelSpec(part, [gwd(rng.uniform(0.1, 3.0), 7), poch(1, 2, 7)], [])
        g = random_graph(part, rng)
        for m in enumerate_edge_labels(part, (0, 0)):
            r = removal_difference(spec, g, (0, 0), m)
            if g.bit(m):
                assert np.all(r < 0)
            else:
                np.testing.assert_array_equal(r, 0.0)


class TestGrowthConstant:
    def test_examples(self):
        assert growth_constant([edges()]) == 1.0
        assert growth_constant([edges(), edges()]) == pytest.approx(math.sqrt(2))
        assert growth_constant([gwd(1.0, 6)]) == pytest.approx(2 * (1 - 1 / E))
        assert growth_constant([gwd(1.0, 6)]) == pytest.approx(1.2642, abs=1e-4)
        assert growth_constant([edges(), gwd(1.0, 6)]) == pytest.approx(math.sqrt(1 + (2 * (1 - 1 / E)) ** 2))

    def test_family_pairs(self):
        spec = full_spec(BlockPartition((3, 3)))
        gc = growth_constants(spec)
        assert gc["W"][1] == 0.0 and gc["B"][1] == 0.0

    def test_bound_holds_on_probes(self):
        part = BlockPartition((6, 5))
        spec = full_spec(part)
        gc = growth_constants(spec)
        rng = np.random.default_rng(4)
        for _ in range(1000):
            g = random_graph(part, rng, rng.random())
            pair = part.pairs()[rng.integers(3)]
            labels = enumerate_edge_labels(part, pair)
            m = labels[rng.integers(len(labels))]
            fam = "W" if pair[0] == pair[1] else "B"
            assert np.linalg.norm(change_statistic(spec, g, pair, m)) <= gc[fam][0] + 1e-12
