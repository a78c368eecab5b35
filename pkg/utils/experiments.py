# utils/experiments.py

# Standard Imports
import functools
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, List, Optional, Sequence, Tuple

# External Imports
import numpy as np

# Local Imports
from utils.drna_engine import DrnaFilter, estimate_integral
from utils.errors import RateFitError, ReferenceMismatchError
from utils.exact_oracle import exact_filter_sequence
from utils.model import DiscreteHmmModel, TrackingModel, TrackingModelParams, hmm_sample_and_observe
from utils.streams import ROLE_CENTRALIZED, ROLE_FILTER, ROLE_PROXY, pe_streams, trajectory_stream
from utils.telemetry import FanoutSink, LoggingSink, MemorySink
from utils.telemetry import logger as telemetry_logger
from utils.topology import build_exchange_map

logger = logging.getLogger(__name__)


# Parameter and result types

@dataclass(frozen=True)
class EngineConfig:
    """Everything needed to build one distributed filter for the tracking model."""
    m_pes: int
    k_per_pe: int
    exchange_period: int = 10
    topology: str = 'havel-hakimi'
    per_neighbor: Optional[int] = None
    exchange_fraction: float = 0.9
    params: TrackingModelParams = field(default_factory=TrackingModelParams, compare=False)

    def centralized(self, k_total=None) -> 'EngineConfig':
        """Single-PE bootstrap filter with the same (or the given) total particle count."""
        return replace(self, m_pes=1, k_per_pe=k_total or self.m_pes * self.k_per_pe, per_neighbor=None)

    def with_m(self, m_pes) -> 'EngineConfig':
        return replace(self, m_pes=m_pes)

    def exchange_map(self):
        """The exchange map of this configuration, built once per process."""
        return _exchange_map(self.topology, self.m_pes, self.k_per_pe, self.per_neighbor, self.exchange_fraction)


@functools.lru_cache(maxsize=64)
def _exchange_map(topology, m_pes, k_per_pe, per_neighbor, fraction):
    exchange_map, _ = build_exchange_map(topology, m_pes, k_per_pe, per_neighbor, fraction)
    return exchange_map


def make_filter(engine: EngineConfig, model, seed, run_id, role=ROLE_FILTER, sink=None, estimator='mean') -> DrnaFilter:
    """Build a DrnaFilter whose PE streams are derived from (seed, run_id, role)."""
    exchange_map = engine.exchange_map()
    kwargs = {} if estimator == 'mean' else {'estimator': estimator}
    if telemetry_logger.isEnabledFor(logging.DEBUG):
        sink = LoggingSink() if sink is None else FanoutSink(sink, LoggingSink())
    return DrnaFilter(
        model, engine.m_pes, engine.k_per_pe,
        exchange_map=exchange_map,
        exchange_period=engine.exchange_period,
        streams=pe_streams(seed, run_id, engine.m_pes, role),
        sink=sink,
        **kwargs,
    )


@dataclass(frozen=True)
class AssumptionCheckParams:
    """Constants of the aggregate-weight balance condition E[(sup W)^q] <= c^q / M^(q - eps)."""
    c: float = 4.0
    q: float = 4.0
    epsilon: float = 0.5
    m_pes: int = 32
    exchange_period: int = 10
    runs: int = 50

    def __post_init__(self):
        if self.c <= 0:
            raise ValueError(f"c must be positive, got {self.c}")
        if self.q < 4:
            raise ValueError(f"q must be >= 4, got {self.q}")
        if not 0 <= self.epsilon < 1:
            raise ValueError(f"epsilon must lie in [0, 1), got {self.epsilon}")
        if self.m_pes < 1 or self.exchange_period < 1 or self.runs < 1:
            raise ValueError("m_pes, exchange_period and runs must be positive")


@dataclass(frozen=True)
class RateFitResult:
    c_fit: float
    zeta_fit: float
    residual: float
    reading: str = 'per-pe'

    def fitted(self, m_pes, k_per_pe) -> float:
        n = k_per_pe if self.reading == 'per-pe' else m_pes * k_per_pe
        return self.c_fit / (m_pes ** self.zeta_fit * np.sqrt(n))


@dataclass(frozen=True, eq=False)
class ErrorSeries:
    """Per-step L2 errors, errors[n - 1] for n = 1..horizon."""
    errors: np.ndarray
    m_pes: int
    k_per_pe: int
    runs: int
    reference_type: str
    filter_name: str = 'dpf'

    def __len__(self):
        return len(self.errors)

    def time_average(self) -> float:
        return float(np.mean(self.errors))


@dataclass(frozen=True, eq=False)
class SupMomentSeries:
    """Monte Carlo estimate of E[(sup_m W^(m))^q] for n = 0..horizon."""
    steps: np.ndarray
    is_exchange: np.ndarray
    moments: np.ndarray
    bound: float

    def exchange_violations(self) -> np.ndarray:
        """Exchange steps at which the estimate is not below the bound."""
        mask = self.is_exchange & (self.moments >= self.bound)
        return self.steps[mask]

    def holds_at_exchange_steps(self) -> bool:
        return len(self.exchange_violations()) == 0


@dataclass(frozen=True)
class RunSummaryRow:
    run_index: int
    mean_error: float
    final_error: float
    mean_exchange_sup: float


@dataclass(frozen=True)
class TrendResult:
    slope: float
    window_change: float
    series_mean: float

    @property
    def relative_change(self) -> float:
        return self.window_change / self.series_mean


# Closed forms and fits

def assumption_bound(params: AssumptionCheckParams) -> float:
    """c^q / M^(q - eps)."""
    return params.c ** params.q / params.m_pes ** (params.q - params.epsilon)


def fit_rate(error_by_m: Sequence[Tuple[int, float]], k_per_pe, reading='per-pe') -> RateFitResult:
    """
    Least-squares fit of error = C / (M^zeta N^(1/2)) in log space.

    With reading 'per-pe' N is the per-PE count K; with 'total' N = M K.

    Raises:
        RateFitError: With fewer than 2 distinct M values or non-positive errors.
    """
    m = np.array([float(mm) for mm, _ in error_by_m])
    e = np.array([float(ee) for _, ee in error_by_m])
    if len(np.unique(m)) < 2:
        raise RateFitError(f"need at least 2 distinct M values, got {sorted(set(m))}")
    if (e <= 0).any():
        raise RateFitError("errors must be positive")

    n = np.full_like(m, float(k_per_pe)) if reading == 'per-pe' else m * k_per_pe
    target = np.log(e) + 0.5 * np.log(n)
    design = np.column_stack([np.ones_like(m), -np.log(m)])
    (log_c, zeta), *_ = np.linalg.lstsq(design, target, rcond=None)
    residual = float(np.sum((design @ np.array([log_c, zeta]) - target) ** 2))
    return RateFitResult(c_fit=float(np.exp(log_c)), zeta_fit=float(zeta), residual=residual, reading=reading)


def l2_error_from_estimates(estimates, references, m_pes=1, k_per_pe=1, reference_type='true-state',
                            filter_name='dpf', components=slice(0, 2)) -> ErrorSeries:
    """
    sqrt(mean over runs of ||estimate_n - reference_n||^2) for every step n.

    Args:
        estimates, references: Arrays of shape (runs, horizon, state_dim).
        components: State components entering the norm (positions by default).
    """
    estimates = np.asarray(estimates, dtype=float)
    references = np.asarray(references, dtype=float)
    if estimates.shape != references.shape:
        raise ReferenceMismatchError(f"estimates {estimates.shape} and references {references.shape} differ")
    squared = np.sum((estimates[..., components] - references[..., components]) ** 2, axis=-1)
    return ErrorSeries(
        errors=np.sqrt(squared.mean(axis=0)),
        m_pes=m_pes, k_per_pe=k_per_pe, runs=estimates.shape[0],
        reference_type=reference_type, filter_name=filter_name,
    )


def time_uniformity_slope(series: ErrorSeries, start=None, per=None) -> TrendResult:
    """
    Slope of the least-squares line through errors at steps >= start.

    window_change is the slope times `per` steps (default: the series length) and is
    compared with the mean of the whole series.
    """
    horizon = len(series)
    start = horizon // 2 if start is None else start
    per = horizon if per is None else per
    steps = np.arange(1, horizon + 1)
    slope, _ = np.polyfit(steps[start - 1:], series.errors[start - 1:], 1)
    return TrendResult(slope=float(slope), window_change=float(slope * per), series_mean=series.time_average())


# Monte Carlo dispatch

def run_parallel(func: Callable, tasks: Sequence, workers=1) -> List:
    """Map func over tasks, in worker processes when workers > 1; results keep task order."""
    if workers <= 1 or len(tasks) <= 1:
        return [func(task) for task in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, tasks))


@dataclass(frozen=True)
class TrackingTask:
    run_id: int
    seed: int
    engine: EngineConfig
    horizon: int
    reference: str = 'true-state'
    proxy_k: Optional[int] = None
    centralized: bool = False


@dataclass(frozen=True, eq=False)
class TrackingOutcome:
    run_id: int
    states: np.ndarray
    observations: np.ndarray
    estimates: np.ndarray
    references: np.ndarray
    sup_aggregates: np.ndarray
    centralized_estimates: Optional[np.ndarray] = None


def proxy_reference(k_total, observations, seed, model=None, run_id=0, role=ROLE_PROXY) -> np.ndarray:
    """Posterior-mean sequence of a centralized filter with k_total particles on the given observations."""
    model = model or TrackingModel()
    proxy = EngineConfig(m_pes=1, k_per_pe=k_total)
    return make_filter(proxy, model, seed, run_id, role).run(observations)


def _tracking_run(task: TrackingTask) -> TrackingOutcome:
    model = TrackingModel(task.engine.params)
    states, observations = model.simulate(task.horizon, trajectory_stream(task.seed, task.run_id))

    sink = MemorySink()
    estimates = make_filter(task.engine, model, task.seed, task.run_id, sink=sink).run(observations)
    sup = np.concatenate([[1.0 / task.engine.m_pes], sink.sup_aggregates()])

    if task.reference == 'proxy':
        references = proxy_reference(task.proxy_k, observations, task.seed, model, task.run_id)
    else:
        references = states

    centralized = None
    if task.centralized:
        centralized = make_filter(task.engine.centralized(), model, task.seed, task.run_id,
                                  role=ROLE_CENTRALIZED).run(observations)
    logger.debug(f"Run {task.run_id} finished ({task.horizon} steps, M={task.engine.m_pes})")
    return TrackingOutcome(task.run_id, states, observations, estimates, references, sup, centralized)


@dataclass(frozen=True, eq=False)
class TrackingResult:
    dpf: ErrorSeries
    centralized: Optional[ErrorSeries]
    summaries: List[RunSummaryRow]
    sup_aggregates: np.ndarray
    first_trajectory: Tuple[np.ndarray, np.ndarray]

    @property
    def difference(self) -> Optional[np.ndarray]:
        if self.centralized is None:
            return None
        return self.dpf.errors - self.centralized.errors


def run_tracking_experiment(engine: EngineConfig, horizon, runs, seed, workers=1, reference='true-state',
                            proxy_k=None, centralized=False, full_state=False) -> TrackingResult:
    """
    Filter `runs` independent trajectories and collect L2 errors, sup aggregates and per-run summaries.

    Each run regenerates both the trajectory and the filter randomness.
    """
    if reference == 'proxy' and not proxy_k:
        raise ValueError("a proxy reference needs the proxy particle count")
    engine.exchange_map()  # infeasible topologies fail here, not inside a worker
    tasks = [TrackingTask(r, seed, engine, horizon, reference, proxy_k, centralized) for r in range(runs)]
    logger.info(f"Tracking: {runs} runs x {horizon} steps, M={engine.m_pes}, K={engine.k_per_pe}")
    outcomes = run_parallel(_tracking_run, tasks, workers)

    components = slice(None) if full_state else slice(0, 2)
    estimates = np.stack([o.estimates for o in outcomes])
    references = np.stack([o.references for o in outcomes])
    dpf = l2_error_from_estimates(estimates, references, engine.m_pes, engine.k_per_pe, reference,
                                  'dpf', components)
    central = None
    if centralized:
        central = l2_error_from_estimates(np.stack([o.centralized_estimates for o in outcomes]), references,
                                          1, engine.m_pes * engine.k_per_pe, reference, 'centralized', components)

    exchange_steps = np.arange(horizon + 1) % engine.exchange_period == 0
    exchange_steps[0] = False
    summaries = []
    for o in outcomes:
        per_step = np.sqrt(np.sum((o.estimates[:, components] - o.references[:, components]) ** 2, axis=-1))
        summaries.append(RunSummaryRow(
            run_index=o.run_id,
            mean_error=float(per_step.mean()),
            final_error=float(per_step[-1]),
            mean_exchange_sup=float(o.sup_aggregates[exchange_steps].mean()) if exchange_steps.any() else float('nan'),
        ))
    sup = np.stack([o.sup_aggregates for o in outcomes])
    return TrackingResult(dpf, central, summaries, sup, (outcomes[0].states, outcomes[0].observations))


def l2_error_series(engine: EngineConfig, horizon, runs, reference='true-state', seed=0, workers=1,
                    proxy_k=None, full_state=False) -> ErrorSeries:
    """L2 error of the posterior-mean estimate against the true state or a proxy posterior mean."""
    return run_tracking_experiment(engine, horizon, runs, seed, workers, reference, proxy_k,
                                   full_state=full_state).dpf


def compare_with_centralized(engine: EngineConfig, horizon, runs, seed=0, workers=1,
                             reference='true-state', proxy_k=None) -> Tuple[ErrorSeries, ErrorSeries, np.ndarray]:
    """DPF and centralized filter (N = MK) on identical trajectories; returns both series and their difference."""
    result = run_tracking_experiment(engine, horizon, runs, seed, workers, reference, proxy_k, centralized=True)
    return result.dpf, result.centralized, result.difference


# Aggregate-weight balance monitoring

def _sup_run(task: TrackingTask) -> np.ndarray:
    model = TrackingModel(task.engine.params)
    _, observations = model.simulate(task.horizon, trajectory_stream(task.seed, task.run_id))
    sink = MemorySink()
    make_filter(task.engine, model, task.seed, task.run_id, sink=sink, estimator=None).run(observations)
    return sink.sup_aggregates()


def estimate_sup_moment(engine: EngineConfig, horizon, params: AssumptionCheckParams, seed=0,
                        workers=1) -> SupMomentSeries:
    """
    Average (sup_m W^(m))^q over independent runs at every step n = 0..horizon.

    Step 0 is the deterministic uniform initialization, whose moment is M^(-q).
    """
    if params.runs < 2:
        raise ValueError(f"need at least 2 runs, got {params.runs}")
    if params.m_pes != engine.m_pes or params.exchange_period != engine.exchange_period:
        raise ValueError("assumption-check parameters and engine configuration disagree on M or n0")
    engine.exchange_map()
    tasks = [TrackingTask(r, seed, engine, horizon) for r in range(params.runs)]
    logger.info(f"Sup-moment monitor: {params.runs} runs x {horizon} steps, M={engine.m_pes}, q={params.q}")
    sups = np.stack(run_parallel(_sup_run, tasks, workers))

    moments = np.empty(horizon + 1)
    moments[0] = float(engine.m_pes) ** -params.q
    moments[1:] = np.mean(sups ** params.q, axis=0)
    steps = np.arange(horizon + 1)
    is_exchange = (steps > 0) & (steps % engine.exchange_period == 0)
    return SupMomentSeries(steps=steps, is_exchange=is_exchange, moments=moments, bound=assumption_bound(params))


@dataclass(frozen=True)
class SweepTask:
    run_id: int
    seed: int
    engine: EngineConfig
    m_list: Tuple[int, ...]
    n_eval: int
    proxy_k: Optional[int] = None


def _sup_sweep_run(task: SweepTask) -> np.ndarray:
    model = TrackingModel(task.engine.params)
    _, observations = model.simulate(task.n_eval, trajectory_stream(task.seed, task.run_id))
    sups = []
    for m in task.m_list:
        sink = MemorySink()
        make_filter(task.engine.with_m(m), model, task.seed, task.run_id, sink=sink, estimator=None).run(observations)
        sups.append(sink.records[-1].sup_aggregate)
    return np.array(sups)


def sweep_sup_moment_by_m(engine: EngineConfig, m_list, n_eval, params: AssumptionCheckParams, seed=0,
                          workers=1) -> List[Tuple[int, float, float, float]]:
    """
    Moment estimate and bound at a fixed exchange instant for several M.

    Returns rows (M, moment estimate, bound, bound / estimate).
    """
    m_list = tuple(m_list)
    for m in m_list:
        engine.with_m(m).exchange_map()
    tasks = [SweepTask(r, seed, engine, m_list, n_eval) for r in range(params.runs)]
    logger.info(f"Sup-moment sweep over M={list(m_list)} at n={n_eval}, {params.runs} runs")
    sups = np.stack(run_parallel(_sup_sweep_run, tasks, workers))
    rows = []
    for i, m in enumerate(m_list):
        moment = float(np.mean(sups[:, i] ** params.q))
        bound = assumption_bound(replace(params, m_pes=m))
        rows.append((m, moment, bound, bound / moment))
    return rows


# Convergence rate

def _rate_run(task: SweepTask) -> np.ndarray:
    model = TrackingModel(task.engine.params)
    _, observations = model.simulate(task.n_eval, trajectory_stream(task.seed, task.run_id))
    reference = proxy_reference(task.proxy_k, observations, task.seed, model, task.run_id)[-1, :2]
    squared = []
    for m in task.m_list:
        estimate = make_filter(task.engine.with_m(m), model, task.seed, task.run_id).run(observations)[-1, :2]
        squared.append(float(np.sum((estimate - reference) ** 2)))
    return np.array(squared)


def rate_sweep(engine: EngineConfig, m_list, n_eval, runs, proxy_k, seed=0, workers=1) -> List[Tuple[int, float]]:
    """
    L2 position error at step n_eval for each M, against a large centralized proxy.

    All M values share each run's trajectory and proxy estimate.
    """
    m_list = tuple(m_list)
    for m in m_list:
        engine.with_m(m).exchange_map()
    tasks = [SweepTask(r, seed, engine, m_list, n_eval, proxy_k) for r in range(runs)]
    logger.info(f"Rate sweep over M={list(m_list)}, K={engine.k_per_pe}, n={n_eval}, proxy N={proxy_k}")
    squared = np.stack(run_parallel(_rate_run, tasks, workers))
    return [(m, float(np.sqrt(squared[:, i].mean()))) for i, m in enumerate(m_list)]


# Exact-filter comparison on a discrete HMM

def state_probabilities(n_states) -> Callable:
    """Estimator returning the filtered probability of every HMM state."""
    indicators = [functools.partial(np.equal, s) for s in range(n_states)]

    def estimator(state):
        return np.array([estimate_integral(state, h) for h in indicators])
    return estimator


@dataclass(frozen=True, eq=False)
class OracleTask:
    run_id: int
    seed: int
    model: DiscreteHmmModel
    m_pes: int
    k_grid: Tuple[int, ...]
    exchange_period: int
    horizon: int
    topology: str = 'havel-hakimi'
    exchange_fraction: float = 0.9


def _oracle_run(task: OracleTask) -> np.ndarray:
    _, symbols = hmm_sample_and_observe(task.model, task.horizon, trajectory_stream(task.seed, task.run_id))
    exact = np.array([d.probabilities for d in exact_filter_sequence(task.model, symbols)[1:]])
    errors = []
    for k in task.k_grid:
        engine = EngineConfig(task.m_pes, k, task.exchange_period, task.topology, None, task.exchange_fraction)
        estimates = make_filter(engine, task.model, task.seed, task.run_id,
                                estimator=state_probabilities(task.model.n_states)).run(symbols)
        errors.append(float(np.max(np.abs(estimates - exact))))
    return np.array(errors)


def oracle_convergence(model: DiscreteHmmModel, m_pes=4, k_grid=(64, 256, 1024), exchange_period=5,
                       horizon=50, runs=20, seed=0, workers=1, topology='havel-hakimi') -> List[Tuple[int, int, float]]:
    """
    Max-over-time absolute error of the filtered state probabilities against the exact filter.

    Returns rows (K, MK, error averaged over runs), one per K in k_grid.
    """
    k_grid = tuple(k_grid)
    tasks = [OracleTask(r, seed, model, m_pes, k_grid, exchange_period, horizon, topology) for r in range(runs)]
    logger.info(f"Oracle check: M={m_pes}, K={list(k_grid)}, n0={exchange_period}, {horizon} steps, {runs} runs")
    errors = np.stack(run_parallel(_oracle_run, tasks, workers))
    return [(k, m_pes * k, float(errors[:, i].mean())) for i, k in enumerate(k_grid)]
