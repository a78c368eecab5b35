# utils/commands/rate_fit.py

# Standard Imports
import logging

# Local Imports
from utils.csv_export import write_rate_fit
from utils.experiments import fit_rate, rate_sweep
from .common import EXIT_ACCEPTANCE, EXIT_OK, engine_from_config, info, report

logger = logging.getLogger(__name__)

NAME = 'run-rate-fit'
HELP = 'Sweep M at fixed K and fit error = C / (M^zeta N^(1/2))'


def add_arguments(parser):
    parser.add_argument('--m-list', type=int, nargs='+', default=None,
                        help='PE counts to sweep, at least 3 distinct values (default: 4 8 16 32)')
    parser.add_argument('--eval-step', type=int, default=None,
                        help='Time step at which errors are measured (default: --steps)')
    parser.add_argument('--proxy-k', type=int, default=None,
                        help='Particles of the centralized proxy, at least max(M) K (default: max(max(M) K, 8192))')
    parser.add_argument('--rate-reading', choices=['per-pe', 'total'], default=None,
                        help='Read N in the fitted form as K (per-pe) or M K (total)')
    parser.add_argument('--zeta-band', type=float, nargs=2, default=None, metavar=('LOW', 'HIGH'),
                        help='Accepted range of the fitted exponent (default: 0.29 0.59)')


def run(config, ledger) -> int:
    engine = engine_from_config(config)
    n_eval = config.eval_step or config.horizon
    m_list = sorted(set(config.m_list))

    error_by_m = rate_sweep(engine, m_list, n_eval, config.runs, config.proxy_k, config.seed, config.worker_count)
    fit = fit_rate(error_by_m, config.k_per_pe, config.rate_reading)
    write_rate_fit(error_by_m, fit, config.k_per_pe, config.out)

    for m, error in error_by_m:
        info(f"M={m}: error {error:.4g}, fitted {fit.fitted(m, config.k_per_pe):.4g}")
    low, high = config.zeta_band
    message = f"C = {fit.c_fit:.4g}, zeta = {fit.zeta_fit:.4f}, residual = {fit.residual:.3g}"
    if low <= fit.zeta_fit <= high:
        ledger.finish(EXIT_OK, report(True, f"{message} (within [{low}, {high}])"))
        return EXIT_OK
    ledger.finish(EXIT_ACCEPTANCE, report(False, f"{message} (outside [{low}, {high}])"))
    return EXIT_ACCEPTANCE
