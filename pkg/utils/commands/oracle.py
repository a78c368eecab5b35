# utils/commands/oracle.py

# Standard Imports
import logging

# Local Imports
from utils.csv_export import write_oracle
from utils.experiments import oracle_convergence
from utils.model import default_hmm
from .common import EXIT_ACCEPTANCE, EXIT_OK, info, report

logger = logging.getLogger(__name__)

NAME = 'run-oracle-check'
HELP = 'Compare the distributed filter with the exact filter of a 3-state HMM'


def add_arguments(parser):
    parser.add_argument('--k-grid', type=int, nargs='+', default=None,
                        help='Particles per PE to test (default: 64 256 1024)')
    parser.add_argument('--oracle-tolerance', type=float, default=None,
                        help='Largest accepted error at the biggest K (default: 0.05)')


def run(config, ledger) -> int:
    """
    Errors must decrease along the K grid and end below the tolerance.

    Returns:
        int: Exit code.
    """
    rows = oracle_convergence(default_hmm(), config.m_pes, config.k_grid, config.exchange_period,
                              config.horizon, config.runs, config.seed, config.worker_count, config.topology)
    write_oracle(rows, config.out)
    for k, mk, error in rows:
        info(f"K={k} (MK={mk}): max-over-time error {error:.4g}")

    errors = [e for _, _, e in sorted(rows)]
    decreasing = all(b < a for a, b in zip(errors, errors[1:]))
    final = errors[-1]
    if decreasing and final < config.oracle_tolerance:
        ledger.finish(EXIT_OK, report(True, f"Error decreases with MK and ends at {final:.4g} "
                                            f"< {config.oracle_tolerance}"))
        return EXIT_OK
    ledger.finish(EXIT_ACCEPTANCE, report(False, f"Oracle check failed: errors {[round(e, 4) for e in errors]}, "
                                                 f"tolerance {config.oracle_tolerance}"))
    return EXIT_ACCEPTANCE
