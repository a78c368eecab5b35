# tests/test_topology.py

# Standard Imports
import itertools

# External Imports
import networkx as nx
import numpy as np
import pandas as pd
import pytest
from hypothesis import given, strategies as st
from numpy.testing import assert_array_equal

# Local Imports
from utils.errors import TopologyError
from utils.topology import (ExchangeMap, PeGraph, block_exchange_map, build_exchange_map, circular_map,
                            default_degree, havel_hakimi_regular, per_neighbor_count)


class TestHavelHakimi:
    def test_ring_after_repair(self):
        graph = havel_hakimi_regular(8, 2)
        assert graph.is_regular(2) and graph.is_connected()
        assert nx.is_isomorphic(graph.to_networkx(), nx.cycle_graph(8))

    def test_quarter_degree(self):
        graph = havel_hakimi_regular(32, 8)
        assert all(graph.degree(m) == 8 for m in range(32))
        assert graph.is_connected() and graph.is_symmetric() and graph.is_simple()

    def test_complete_graph(self):
        graph = havel_hakimi_regular(4, 3)
        assert len(graph.edges()) == 6

    @pytest.mark.parametrize('m_pes, degree', [(5, 3), (4, 4), (4, 0), (1, 1)])
    def test_infeasible(self, m_pes, degree):
        with pytest.raises(TopologyError):
            havel_hakimi_regular(m_pes, degree)

    def test_perfect_matching_cannot_be_connected(self):
        with pytest.raises(TopologyError):
            havel_hakimi_regular(6, 1)

    @given(st.integers(min_value=3, max_value=40), st.integers(min_value=2, max_value=12))
    def test_connected_regular_simple(self, m_pes, degree):
        if degree >= m_pes or (m_pes * degree) % 2:
            return
        graph = havel_hakimi_regular(m_pes, degree)
        assert graph.is_regular(degree)
        assert graph.is_symmetric() and graph.is_simple() and graph.is_connected()

    def test_deterministic(self):
        assert havel_hakimi_regular(16, 4) == havel_hakimi_regular(16, 4)

    def test_export(self, tmp_path):
        path = tmp_path / 'graph.csv'
        havel_hakimi_regular(8, 2).export_csv(path)
        frame = pd.read_csv(path)
        assert list(frame.columns) == ['pe_a', 'pe_b'] and len(frame) == 8


class TestSizing:
    @pytest.mark.parametrize('m_pes, expected', [(1, 0), (2, 1), (3, 2), (4, 2), (8, 2), (16, 4), (32, 8), (128, 32)])
    def test_default_degree(self, m_pes, expected):
        assert default_degree(m_pes) == expected

    def test_odd_product_bumped(self):
        assert default_degree(13) == 4

    def test_default_exchange_size(self):
        assert per_neighbor_count(256, 8) == 28
        assert per_neighbor_count(256, 8) == int(3.6 * 256 / 32)

    def test_isolated_pe(self):
        assert per_neighbor_count(256, 0) == 0


class TestCircularMap:
    def test_two_by_two_cross_swap(self):
        beta = circular_map(2, 2)
        assert beta(0, 0) == (1, 1)
        assert beta(0, 1) == (1, 0)
        assert beta(1, 0) == (0, 1)
        assert beta(1, 1) == (0, 0)

    def test_example_ring(self):
        beta = circular_map(4, 5)
        assert beta(0, 0) == (3, 4)
        assert beta(0, 4) == (1, 0)
        assert beta(3, 4) == (0, 0)
        for m, k in itertools.product(range(4), range(1, 4)):
            assert beta(m, k) == (m, k)

    @pytest.mark.parametrize('m_pes, k_per_pe', [(1, 4), (4, 1)])
    def test_too_small(self, m_pes, k_per_pe):
        with pytest.raises(TopologyError):
            circular_map(m_pes, k_per_pe)

    def test_two_per_pe_exchanged(self):
        assert_array_equal(circular_map(5, 8).exchanged_per_pe(), [2] * 5)


class TestBlockExchangeMap:
    def test_reference_setting(self):
        beta, graph = build_exchange_map('havel-hakimi', 32, 256)
        assert_array_equal(beta.exchanged_per_pe(), [224] * 32)
        assert beta.is_involution()

    def test_zero_per_neighbor_is_identity(self):
        beta = block_exchange_map(havel_hakimi_regular(8, 2), 16, 0)
        assert beta.is_identity

    def test_two_pes_enumerated(self):
        graph = PeGraph(2, ((1,), (0,)))
        beta = block_exchange_map(graph, 4, 2)
        expected = {(0, 0): (1, 0), (0, 1): (1, 1), (1, 0): (0, 0), (1, 1): (0, 1),
                    (0, 2): (0, 2), (0, 3): (0, 3), (1, 2): (1, 2), (1, 3): (1, 3)}
        assert {(m, k): beta(m, k) for m in range(2) for k in range(4)} == expected

    def test_capacity_exceeded(self):
        with pytest.raises(TopologyError):
            block_exchange_map(havel_hakimi_regular(8, 2), 10, 6)

    @given(st.sampled_from([2, 3, 4, 8, 16, 32]), st.sampled_from([2, 8, 64, 256]),
           st.floats(min_value=0.0, max_value=1.0))
    def test_valid_bijection(self, m_pes, k_per_pe, fraction):
        beta, _ = build_exchange_map('havel-hakimi', m_pes, k_per_pe, fraction=fraction)
        beta.validate()
        assert beta.is_bijection() and beta.is_involution()

    def test_exhaustive_bijection_large(self):
        beta, _ = build_exchange_map('havel-hakimi', 128, 512)
        assert len(beta.forward) == 65_536
        assert len(set(beta.forward.tolist())) == 65_536

    def test_single_pe_is_identity(self):
        beta, graph = build_exchange_map('havel-hakimi', 1, 64)
        assert beta.is_identity and graph is None

    def test_unknown_kind(self):
        with pytest.raises(TopologyError):
            build_exchange_map('star', 4, 8)

    def test_export(self, tmp_path):
        path = tmp_path / 'exchange_map.csv'
        circular_map(2, 3).export_csv(path)
        frame = pd.read_csv(path)
        assert list(frame.columns) == ['m', 'k', 'u', 'v'] and len(frame) == 6


class TestExchangeMapValidation:
    def test_not_a_bijection(self):
        with pytest.raises(TopologyError):
            ExchangeMap(2, 2, np.array([0, 0, 2, 3])).validate()

    def test_wrong_size(self):
        with pytest.raises(TopologyError):
            ExchangeMap(2, 2, np.arange(3))

    def test_identity(self):
        beta = ExchangeMap.identity(3, 4)
        assert beta.is_identity and beta.is_involution()
        assert beta(2, 3) == (2, 3)
