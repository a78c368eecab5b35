# utils/topology.py

# Standard Imports
import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import List, Tuple

# External Imports
import networkx as nx
import numpy as np
import pandas as pd

# Local Imports
from utils.errors import TopologyError

logger = logging.getLogger(__name__)

TOPOLOGY_KINDS = ('havel-hakimi', 'circular')


@dataclass(frozen=True)
class PeGraph:
    """Undirected interconnection graph between M processing elements."""
    m_pes: int
    adjacency: Tuple[Tuple[int, ...], ...]

    @classmethod
    def from_networkx(cls, graph: nx.Graph, m_pes: int) -> 'PeGraph':
        return cls(m_pes=m_pes, adjacency=tuple(tuple(sorted(graph.neighbors(m))) for m in range(m_pes)))

    def to_networkx(self) -> nx.Graph:
        graph = nx.Graph()
        graph.add_nodes_from(range(self.m_pes))
        graph.add_edges_from(self.edges())
        return graph

    def degree(self, m) -> int:
        return len(self.adjacency[m])

    def edges(self) -> List[Tuple[int, int]]:
        return [(a, b) for a in range(self.m_pes) for b in self.adjacency[a] if a < b]

    def is_simple(self) -> bool:
        return all(m not in nbrs and len(set(nbrs)) == len(nbrs) for m, nbrs in enumerate(self.adjacency))

    def is_symmetric(self) -> bool:
        return all(m in self.adjacency[u] for m, nbrs in enumerate(self.adjacency) for u in nbrs)

    def is_regular(self, degree) -> bool:
        return all(len(nbrs) == degree for nbrs in self.adjacency)

    def is_connected(self) -> bool:
        return self.m_pes > 0 and nx.is_connected(self.to_networkx())

    def export_csv(self, path):
        pd.DataFrame(self.edges(), columns=['pe_a', 'pe_b']).to_csv(path, index=False)
        logger.info(f"Graph with {len(self.edges())} edges written to {path}")


def _non_bridge_edge(graph, component):
    """Lowest sorted edge of a component whose removal keeps the component connected."""
    subgraph = graph.subgraph(component)
    bridges = {tuple(sorted(e)) for e in nx.bridges(subgraph)}
    for edge in sorted(tuple(sorted(e)) for e in subgraph.edges()):
        if edge not in bridges:
            return edge
    return None


def _repair_connectivity(graph, m_pes):
    """
    Merge components with degree-preserving edge swaps until the graph is connected.

    Each pass takes the two components holding the lowest node labels, removes a
    non-bridge edge (a, b) from the first and (c, d) from the second and adds
    (a, c) and (b, d). Both components stay internally connected, so every pass
    removes one component.
    """
    for swap in range(m_pes):
        components = sorted((sorted(c) for c in nx.connected_components(graph)), key=lambda c: c[0])
        if len(components) == 1:
            return graph
        first = _non_bridge_edge(graph, components[0])
        second = _non_bridge_edge(graph, components[1])
        if first is None or second is None:
            raise TopologyError(
                f"cannot connect a regular graph on {m_pes} PEs: a component has no cycle to break"
            )
        (a, b), (c, d) = first, second
        graph.remove_edges_from([first, second])
        graph.add_edges_from([(a, c), (b, d)])
        logger.debug(f"Edge swap {swap}: ({a},{b}),({c},{d}) -> ({a},{c}),({b},{d})")
    if not nx.is_connected(graph):
        raise TopologyError(f"edge-swap repair did not connect the graph on {m_pes} PEs")
    return graph


def havel_hakimi_regular(m_pes, degree) -> PeGraph:
    """
    Build a connected degree-regular PE graph with the Havel-Hakimi construction.

    Args:
        m_pes (int): Number of processing elements M.
        degree (int): Neighbours per PE.

    Returns:
        PeGraph: Simple, symmetric, connected and degree-regular.

    Raises:
        TopologyError: If the degree sequence is not graphical or the graph
            cannot be made connected.
    """
    if not 1 <= degree < m_pes:
        raise TopologyError(f"need 1 <= degree < M, got degree={degree}, M={m_pes}")
    if (m_pes * degree) % 2:
        raise TopologyError(f"M * degree must be even, got M={m_pes}, degree={degree}")
    sequence = [degree] * m_pes
    if not nx.is_valid_degree_sequence_erdos_gallai(sequence):
        raise TopologyError(f"degree sequence {degree} x {m_pes} is not graphical")

    graph = nx.Graph(nx.havel_hakimi_graph(sequence))
    if not nx.is_connected(graph):
        logger.info(
            f"Havel-Hakimi graph on {m_pes} PEs has "
            f"{nx.number_connected_components(graph)} components, repairing"
        )
        graph = _repair_connectivity(graph, m_pes)

    result = PeGraph.from_networkx(graph, m_pes)
    assert result.is_regular(degree) and result.is_symmetric() and result.is_simple()
    return result


def default_degree(m_pes) -> int:
    """
    Neighbours per PE: M/4 as in the reference setting, at least 2 so the graph can be connected.

    M = 1 has no neighbours and M = 2 has exactly one. The degree is bumped by one
    when M * degree would be odd. For 3 <= M < 8 the plain floor(M/4) rule would give
    degree 1, which leaves separate pairs (M = 4) or no valid degree sequence (M = 3)
    that the connectivity repair cannot join.
    """
    if m_pes <= 1:
        return 0
    if m_pes == 2:
        return 1
    degree = min(max(2, m_pes // 4), m_pes - 1)
    if (m_pes * degree) % 2 and degree + 1 < m_pes:
        degree += 1
    return degree


def per_neighbor_count(k_per_pe, degree, fraction=0.9) -> int:
    """
    Particles exchanged with each neighbour: floor(fraction * K / degree).

    With degree = M/4 and fraction = 0.9 this is floor(3.6 K / M). Exact rational
    arithmetic avoids rounding at integer boundaries.
    """
    if degree == 0:
        return 0
    if not 0.0 <= fraction <= 1.0:
        raise TopologyError(f"exchange fraction must lie in [0, 1], got {fraction}")
    return int(Fraction(str(fraction)) * k_per_pe // degree)


@dataclass(frozen=True, eq=False)
class ExchangeMap:
    """
    Bijection beta on (PE, slot) pairs, stored on flat indices m * K + k.

    forward[m * K + k] = u * K + v means particle k of PE m becomes particle v of PE u.
    """
    m_pes: int
    k_per_pe: int
    forward: np.ndarray

    def __post_init__(self):
        forward = np.array(self.forward, dtype=np.intp)
        if forward.shape != (self.m_pes * self.k_per_pe,):
            raise TopologyError(f"map has {forward.shape} entries, expected {self.m_pes * self.k_per_pe}")
        forward.setflags(write=False)
        object.__setattr__(self, 'forward', forward)

    @classmethod
    def identity(cls, m_pes, k_per_pe) -> 'ExchangeMap':
        return cls(m_pes, k_per_pe, np.arange(m_pes * k_per_pe))

    def __call__(self, m, k) -> Tuple[int, int]:
        u, v = divmod(int(self.forward[m * self.k_per_pe + k]), self.k_per_pe)
        return u, v

    @property
    def is_identity(self) -> bool:
        return bool((self.forward == np.arange(len(self.forward))).all())

    def is_bijection(self) -> bool:
        n = len(self.forward)
        return bool(((self.forward >= 0) & (self.forward < n)).all()) and len(np.unique(self.forward)) == n

    def is_involution(self) -> bool:
        return bool((self.forward[self.forward] == np.arange(len(self.forward))).all())

    def validate(self) -> 'ExchangeMap':
        """Check bijectivity, K particles per PE and the slot-permutation property."""
        if not self.is_bijection():
            raise TopologyError("exchange map is not a bijection")
        targets_pe, targets_slot = np.divmod(self.forward, self.k_per_pe)
        counts = np.bincount(targets_pe, minlength=self.m_pes)
        if (counts != self.k_per_pe).any():
            raise TopologyError(f"exchange map does not keep {self.k_per_pe} particles per PE: {counts}")
        for u in range(self.m_pes):
            slots = np.sort(targets_slot[targets_pe == u])
            if (slots != np.arange(self.k_per_pe)).any():
                raise TopologyError(f"slots received by PE {u} are not a permutation")
        return self

    def exchanged_per_pe(self) -> np.ndarray:
        """Number of particles each PE sends away."""
        moved = self.forward != np.arange(len(self.forward))
        return moved.reshape(self.m_pes, self.k_per_pe).sum(axis=1)

    def export_csv(self, path):
        m, k = np.divmod(np.arange(len(self.forward)), self.k_per_pe)
        u, v = np.divmod(self.forward, self.k_per_pe)
        pd.DataFrame({'m': m, 'k': k, 'u': u, 'v': v}).to_csv(path, index=False)
        logger.info(f"Exchange map ({self.m_pes} x {self.k_per_pe}) written to {path}")


def circular_map(m_pes, k_per_pe) -> ExchangeMap:
    """
    Ring exchange: slot 0 goes to slot K-1 of the previous PE, slot K-1 to slot 0 of the next.

    All other slots stay in place.
    """
    if m_pes < 2:
        raise TopologyError(f"circular exchange needs at least 2 PEs, got {m_pes}")
    if k_per_pe < 2:
        raise TopologyError(f"circular exchange needs K >= 2, got {k_per_pe}")
    K = k_per_pe
    forward = np.arange(m_pes * K)
    for m in range(m_pes):
        forward[m * K] = ((m - 1) % m_pes) * K + (K - 1)
        forward[m * K + K - 1] = ((m + 1) % m_pes) * K
    return ExchangeMap(m_pes, K, forward).validate()


def block_exchange_map(graph: PeGraph, k_per_pe, per_neighbor) -> ExchangeMap:
    """
    Pairwise block swaps along every edge of the PE graph.

    The i-th neighbour (in sorted order) of PE m owns slots [i*p, (i+1)*p) of m.
    For an edge (m, u) the block m reserves for u is swapped with the block u
    reserves for m, so the map is an involution.

    Raises:
        TopologyError: If per_neighbor * degree(m) exceeds K for some PE.
    """
    K, p = k_per_pe, per_neighbor
    if p < 0:
        raise TopologyError(f"per_neighbor must be non-negative, got {p}")
    for m in range(graph.m_pes):
        if p * graph.degree(m) > K:
            raise TopologyError(
                f"PE {m} would exchange {p} x {graph.degree(m)} particles but only holds {K}"
            )

    forward = np.arange(graph.m_pes * K)
    for m, u in graph.edges():
        i = graph.adjacency[m].index(u)
        j = graph.adjacency[u].index(m)
        block_m = m * K + i * p + np.arange(p)
        block_u = u * K + j * p + np.arange(p)
        forward[block_m] = block_u
        forward[block_u] = block_m
    return ExchangeMap(graph.m_pes, K, forward).validate()


def build_exchange_map(kind, m_pes, k_per_pe, per_neighbor=None, fraction=0.9) -> Tuple[ExchangeMap, PeGraph]:
    """
    Build the exchange map used by a run.

    Args:
        kind (str): 'havel-hakimi' or 'circular'.
        m_pes (int): Number of PEs.
        k_per_pe (int): Particles per PE.
        per_neighbor (int): Particles swapped per neighbour; derived from fraction when None.
        fraction (float): Share of each PE's particles to exchange per step.

    Returns:
        tuple: (ExchangeMap, PeGraph or None).
    """
    if m_pes == 1:
        return ExchangeMap.identity(1, k_per_pe), None
    if kind == 'circular':
        return circular_map(m_pes, k_per_pe), None
    if kind != 'havel-hakimi':
        raise TopologyError(f"unknown topology kind {kind!r}, expected one of {TOPOLOGY_KINDS}")

    degree = default_degree(m_pes)
    graph = havel_hakimi_regular(m_pes, degree)
    if per_neighbor is None:
        per_neighbor = per_neighbor_count(k_per_pe, degree, fraction)
    exchange_map = block_exchange_map(graph, k_per_pe, per_neighbor)
    logger.info(
        f"Havel-Hakimi topology: M={m_pes}, degree={degree}, {per_neighbor} particles per neighbour, "
        f"{per_neighbor * degree}/{k_per_pe} slots exchanged per PE"
    )
    return exchange_map, graph
