# utils/drna_engine.py

# Standard Imports
import logging
import math
from dataclasses import dataclass, replace
from typing import Callable, List, Optional, Sequence

# External Imports
import numpy as np
from scipy.special import logsumexp

# Local Imports
from utils.errors import DegenerateWeightsError, TopologyError
from utils.telemetry import StepRecord, TelemetrySink
from utils.topology import ExchangeMap

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class PeEnsemble:
    """K particles of one processing element with unnormalized log-weights and their log-sum."""
    particles: np.ndarray
    log_weights: np.ndarray
    log_aggregate: float

    @classmethod
    def from_log_weights(cls, particles, log_weights) -> 'PeEnsemble':
        return cls(particles, log_weights, float(logsumexp(log_weights)))

    @property
    def k_per_pe(self) -> int:
        return len(self.log_weights)

    def local_weights(self) -> np.ndarray:
        """Locally normalized weights w^(m,k)."""
        return np.exp(self.log_weights - self.log_aggregate)


@dataclass(frozen=True, eq=False)
class FilterState:
    ensembles: tuple
    step: int
    exchange_period: int
    exchange_map: ExchangeMap

    @property
    def m_pes(self) -> int:
        return len(self.ensembles)

    @property
    def k_per_pe(self) -> int:
        return self.ensembles[0].k_per_pe

    def log_aggregates(self) -> np.ndarray:
        return np.array([e.log_aggregate for e in self.ensembles])

    def normalized_aggregates(self) -> np.ndarray:
        """Globally normalized aggregate weights W^(m), computed on demand."""
        log_aggregates = self.log_aggregates()
        return np.exp(log_aggregates - logsumexp(log_aggregates))

    def is_exchange_step(self, n=None) -> bool:
        n = self.step if n is None else n
        return n > 0 and n % self.exchange_period == 0


@dataclass(frozen=True, eq=False)
class WeightedSampleSet:
    """Flattened global measure: MK particles and their normalized weights."""
    particles: np.ndarray
    weights: np.ndarray

    def __len__(self):
        return len(self.weights)


def _check_aggregate(ensemble, pe, step):
    if not np.isfinite(ensemble.log_aggregate):
        raise DegenerateWeightsError(pe, step)
    return ensemble


# Algorithm steps

def init(m_pes, k_per_pe, model, streams: Sequence[np.random.Generator],
         exchange_period=10, exchange_map: Optional[ExchangeMap] = None) -> FilterState:
    """
    Draw MK particles from the prior with w = 1/(MK) and W^(m)* = 1/M.

    Args:
        m_pes (int): Number of processing elements M.
        k_per_pe (int): Particles per PE K.
        model: A StateSpaceModel.
        streams: One random stream per PE.
        exchange_period (int): n0, exchanges happen at n = r * n0, r >= 1.
        exchange_map (ExchangeMap): beta; identity when omitted.
    """
    if m_pes < 1 or k_per_pe < 1:
        raise ValueError(f"need M >= 1 and K >= 1, got M={m_pes}, K={k_per_pe}")
    if exchange_period < 1:
        raise ValueError(f"exchange period must be at least 1, got {exchange_period}")
    if len(streams) != m_pes:
        raise ValueError(f"expected {m_pes} streams, got {len(streams)}")
    exchange_map = exchange_map or ExchangeMap.identity(m_pes, k_per_pe)
    _check_map(exchange_map, m_pes, k_per_pe)

    log_weight = -math.log(m_pes * k_per_pe)
    log_aggregate = -math.log(m_pes)
    ensembles = tuple(
        PeEnsemble(
            particles=model.sample_prior_batch(k_per_pe, streams[m]),
            log_weights=np.full(k_per_pe, log_weight),
            log_aggregate=log_aggregate,
        )
        for m in range(m_pes)
    )
    return FilterState(ensembles=ensembles, step=0, exchange_period=exchange_period, exchange_map=exchange_map)


def propagate_pe(ensemble: PeEnsemble, y, model, rng) -> PeEnsemble:
    """Step 2.a for one PE: move every particle through the kernel and multiply in the likelihood."""
    particles = model.sample_transition_batch(ensemble.particles, rng)
    log_weights = ensemble.log_weights + model.log_likelihood_batch(particles, y)
    return PeEnsemble.from_log_weights(particles, log_weights)


def propagate_and_weight(state: FilterState, y, model, streams, pe_map: Callable = map) -> FilterState:
    """Step 2.a on every PE; each PE only touches its own stream."""
    ensembles = tuple(pe_map(propagate_pe, state.ensembles, [y] * state.m_pes, [model] * state.m_pes, streams))
    for m, ensemble in enumerate(ensembles):
        _check_aggregate(ensemble, m, state.step + 1)
    return replace(state, ensembles=ensembles)


def local_resample(ensemble: PeEnsemble, rng) -> PeEnsemble:
    """
    Step 2.b: multinomial resampling inside one PE.

    K inverse-CDF lookups (binary search) on the cumulative local weights. Every
    output log-weight is log W* - log K; the aggregate is carried over unchanged.
    """
    K = ensemble.k_per_pe
    cdf = np.cumsum(ensemble.local_weights())
    u = rng.random(K) * cdf[-1]
    indexes = np.minimum(np.searchsorted(cdf, u, side='right'), K - 1)
    return PeEnsemble(
        particles=ensemble.particles[indexes],
        log_weights=np.full(K, ensemble.log_aggregate - math.log(K)),
        log_aggregate=ensemble.log_aggregate,
    )


def _resample_all(state: FilterState, streams, pe_map) -> FilterState:
    return replace(state, ensembles=tuple(pe_map(local_resample, state.ensembles, streams)))


def _check_map(exchange_map, m_pes, k_per_pe):
    if (exchange_map.m_pes, exchange_map.k_per_pe) != (m_pes, k_per_pe):
        raise TopologyError(
            f"exchange map is {exchange_map.m_pes} x {exchange_map.k_per_pe}, "
            f"filter is {m_pes} x {k_per_pe}"
        )


def exchange(state: FilterState, exchange_map: ExchangeMap = None) -> FilterState:
    """
    Step 2.c: particle (m, k) and its weight move to beta(m, k); aggregates are recomputed.

    Consumes no randomness; the global measure is unchanged as a multiset.
    """
    exchange_map = exchange_map or state.exchange_map
    M, K = state.m_pes, state.k_per_pe
    _check_map(exchange_map, M, K)
    if exchange_map.is_identity:
        return state

    particles = np.concatenate([e.particles for e in state.ensembles])
    log_weights = np.concatenate([e.log_weights for e in state.ensembles])
    moved_particles = np.empty_like(particles)
    moved_log_weights = np.empty_like(log_weights)
    moved_particles[exchange_map.forward] = particles
    moved_log_weights[exchange_map.forward] = log_weights

    ensembles = tuple(
        PeEnsemble.from_log_weights(moved_particles[m * K:(m + 1) * K], moved_log_weights[m * K:(m + 1) * K])
        for m in range(M)
    )
    return replace(state, ensembles=ensembles)


def step(state: FilterState, y, model, exchange_map: ExchangeMap, streams, pe_map: Callable = map) -> FilterState:
    """
    One full recursion: 2.a, 2.b and, when the new time index is a multiple of n0, 2.c.

    Steps 2.a and 2.b may run concurrently across PEs through pe_map; the exchange
    waits for every PE and is applied serially.
    """
    state = propagate_and_weight(state, y, model, streams, pe_map)
    state = _resample_all(state, streams, pe_map)
    state = replace(state, step=state.step + 1)
    if state.is_exchange_step():
        state = exchange(state, exchange_map)
    return state


# Estimation

def global_measure(state: FilterState) -> WeightedSampleSet:
    """Entry (m, k) carries W^(m) * w^(m,k)."""
    aggregates = state.normalized_aggregates()
    particles = np.concatenate([e.particles for e in state.ensembles])
    weights = np.concatenate([W * e.local_weights() for W, e in zip(aggregates, state.ensembles)])
    return WeightedSampleSet(particles=particles, weights=weights)


def estimate_integral(state: FilterState, h: Callable[[np.ndarray], np.ndarray]) -> float:
    """(h, pi^MK): h maps the stacked particles to one value per particle."""
    measure = global_measure(state)
    return float(np.dot(measure.weights, np.asarray(h(measure.particles), dtype=float)))


def coordinate(i) -> Callable[[np.ndarray], np.ndarray]:
    def project(particles):
        return particles[:, i]
    return project


def estimate_mean(state: FilterState) -> np.ndarray:
    """Posterior-mean estimate, one estimate_integral per state coordinate."""
    dim = state.ensembles[0].particles.shape[1]
    return np.array([estimate_integral(state, coordinate(i)) for i in range(dim)])


def sup_normalized_aggregate(state: FilterState) -> float:
    return float(state.normalized_aggregates().max())


class DrnaFilter:
    """
    Distributed particle filter with M PEs, K particles each and periodic exchanges.

    Wraps the functional steps with the model, exchange map, per-PE streams and an
    optional telemetry sink. M = 1 is the standard bootstrap filter.
    """

    def __init__(self, model, m_pes, k_per_pe, exchange_map: ExchangeMap = None, exchange_period=10,
                 streams: Sequence[np.random.Generator] = None, sink: Optional[TelemetrySink] = None,
                 pe_map: Callable = map, estimator: Optional[Callable[[FilterState], np.ndarray]] = estimate_mean):
        self.model = model
        self.m_pes = m_pes
        self.k_per_pe = k_per_pe
        self.exchange_map = exchange_map or ExchangeMap.identity(m_pes, k_per_pe)
        self.exchange_period = exchange_period
        self.streams = list(streams) if streams is not None else [np.random.default_rng() for _ in range(m_pes)]
        self.sink = sink
        self.pe_map = pe_map
        self.estimator = estimator
        self.state: Optional[FilterState] = None
        self.estimate: Optional[np.ndarray] = None

    def initialize(self) -> FilterState:
        self.state = init(self.m_pes, self.k_per_pe, self.model, self.streams,
                          self.exchange_period, self.exchange_map)
        return self.state

    def step(self, y) -> FilterState:
        if self.state is None:
            self.initialize()
        self.state = step(self.state, y, self.model, self.exchange_map, self.streams, self.pe_map)
        self.estimate = self.estimator(self.state) if self.estimator is not None else None
        if self.sink is not None:
            self.sink.emit(StepRecord(
                step=self.state.step,
                sup_aggregate=sup_normalized_aggregate(self.state),
                estimate=self.estimate,
                exchanged=self.state.is_exchange_step(),
            ))
        return self.state

    def run(self, observations) -> np.ndarray:
        """Filter a whole observation sequence; returns one estimate per step."""
        self.initialize()
        estimates: List[np.ndarray] = []
        for y in observations:
            self.step(y)
            estimates.append(self.estimate)
        return np.array(estimates)
