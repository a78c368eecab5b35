# utils/commands/tracking.py

# Standard Imports
import logging
import os

# Local Imports
from utils.csv_export import write_errors, write_run_summaries
from utils.experiments import run_tracking_experiment
from utils.model import TrackingModel
from utils.streams import trajectory_stream
from utils.topology import build_exchange_map
from .common import EXIT_OK, engine_from_config, info, report

logger = logging.getLogger(__name__)

NAME = 'run-tracking'
HELP = 'Filter simulated target trajectories and write L2 error series'


def add_arguments(parser):
    parser.add_argument('--reference', choices=['true-state', 'proxy'], default=None,
                        help='Error reference: the true state or a large centralized filter (default: true-state)')
    parser.add_argument('--proxy-k', type=int, default=None,
                        help='Particle count of the proxy filter')
    parser.add_argument('--compare-centralized', action='store_true', default=None,
                        help='Also run a centralized filter with N = M K on the same trajectories')
    parser.add_argument('--full-state', action='store_true', default=None,
                        help='Measure errors on position and velocity instead of position only')
    parser.add_argument('--export-trajectory', action='store_true', default=None,
                        help='Write the first run\'s trajectory and sensor bits to trajectory.csv')
    parser.add_argument('--export-topology', action='store_true', default=None,
                        help='Write graph.csv and exchange_map.csv')


def run(config, ledger) -> int:
    """
    Run the tracking experiment and write errors.csv and runs.csv.

    Returns:
        int: Exit code.
    """
    engine = engine_from_config(config)
    proxy_k = config.proxy_k or config.m_pes * config.k_per_pe * 4
    result = run_tracking_experiment(
        engine, config.horizon, config.runs, config.seed, config.worker_count,
        reference=config.reference, proxy_k=proxy_k if config.reference == 'proxy' else None,
        centralized=config.compare_centralized, full_state=config.full_state,
    )

    series = [result.dpf] + ([result.centralized] if result.centralized is not None else [])
    write_errors(series, config.out, difference=result.difference)
    write_run_summaries(result.summaries, config.out)
    ledger.add_summaries(result.summaries)

    if config.export_trajectory:
        model = TrackingModel(engine.params)
        # the first run's trajectory stream reproduces exactly what run 0 filtered
        states, observations = model.simulate(config.horizon, trajectory_stream(config.seed, 0))
        model.export_trajectory(states, observations, os.path.join(config.out, 'trajectory.csv'))
    if config.export_topology:
        exchange_map, graph = build_exchange_map(config.topology, config.m_pes, config.k_per_pe,
                                                 config.per_neighbor, config.exchange_fraction)
        os.makedirs(config.out, exist_ok=True)
        exchange_map.export_csv(os.path.join(config.out, 'exchange_map.csv'))
        if graph is not None:
            graph.export_csv(os.path.join(config.out, 'graph.csv'))

    info(f"DPF (M={config.m_pes}, K={config.k_per_pe}): time-averaged error {result.dpf.time_average():.4f}")
    if result.centralized is not None:
        info(f"Centralized (N={config.m_pes * config.k_per_pe}): "
             f"time-averaged error {result.centralized.time_average():.4f}")
    ledger.finish(EXIT_OK, report(True, f"Tracking finished: {config.runs} runs x {config.horizon} steps "
                                        f"written to {config.out}"))
    return EXIT_OK
