# utils/commands/assumption.py

# Standard Imports
import logging

# Local Imports
from utils.csv_export import write_sup_moment, write_sup_moment_by_m
from utils.experiments import AssumptionCheckParams, estimate_sup_moment, sweep_sup_moment_by_m
from .common import EXIT_ACCEPTANCE, EXIT_OK, engine_from_config, info, report

logger = logging.getLogger(__name__)

NAME = 'run-assumption-check'
HELP = 'Monitor E[(sup W)^q] against c^q / M^(q - eps) at exchange steps'


def add_arguments(parser):
    parser.add_argument('--c', type=float, default=None, help='Bound constant c (default: 4)')
    parser.add_argument('--q', type=float, default=None, help='Moment order q >= 4 (default: 4)')
    parser.add_argument('--epsilon', type=float, default=None, help='Exponent slack in [0, 1) (default: 0.5)')
    parser.add_argument('--m-list', type=int, nargs='+', default=None,
                        help='Also estimate the moment at n = 100 n0 for each of these M')


def run(config, ledger) -> int:
    engine = engine_from_config(config)
    params = AssumptionCheckParams(c=config.c, q=config.q, epsilon=config.epsilon, m_pes=config.m_pes,
                                   exchange_period=config.exchange_period, runs=config.runs)
    series = estimate_sup_moment(engine, config.horizon, params, config.seed, config.worker_count)
    write_sup_moment(series, config.out)

    if config.m_list:
        n_eval = min(100 * config.exchange_period, config.horizon)
        rows = sweep_sup_moment_by_m(engine, config.m_list, n_eval, params, config.seed, config.worker_count)
        write_sup_moment_by_m(rows, config.out)
        for m, moment, bound, ratio in rows:
            info(f"M={m}: moment {moment:.4g}, bound {bound:.4g}, ratio {ratio:.3g}")

    violations = series.exchange_violations()
    n_exchanges = int(series.is_exchange.sum())
    if len(violations) == 0:
        verdict = report(True, f"Bound {series.bound:.4g} holds at all {n_exchanges} exchange steps")
        ledger.finish(EXIT_OK, verdict)
        return EXIT_OK
    verdict = report(False, f"Bound {series.bound:.4g} violated at {len(violations)} of {n_exchanges} "
                            f"exchange steps (first at n={int(violations[0])})")
    ledger.finish(EXIT_ACCEPTANCE, verdict)
    return EXIT_ACCEPTANCE
