# Standard Imports
import argparse
import logging
import sys

# External Imports
import colorama

# Local Imports
from utils.commands import COMMANDS, EXIT_CONFIG, EXIT_RUNTIME
from utils.config import build_config, load_config_file
from utils.database import Ledger
from utils.errors import ConfigError, TopologyError

logger = logging.getLogger(__name__)

# argparse destination -> RunConfig field
FLAG_FIELDS = {
    'pes': 'm_pes',
    'k': 'k_per_pe',
    'n0': 'exchange_period',
    'steps': 'horizon',
    'runs': 'runs',
    'seed': 'seed',
    'topology': 'topology',
    'per_neighbor': 'per_neighbor',
    'fraction': 'exchange_fraction',
    'workers': 'workers',
    'out': 'out',
    'reference': 'reference',
    'proxy_k': 'proxy_k',
    'compare_centralized': 'compare_centralized',
    'full_state': 'full_state',
    'export_trajectory': 'export_trajectory',
    'export_topology': 'export_topology',
    'c': 'c',
    'q': 'q',
    'epsilon': 'epsilon',
    'm_list': 'm_list',
    'eval_step': 'eval_step',
    'rate_reading': 'rate_reading',
    'zeta_band': 'zeta_band',
    'k_grid': 'k_grid',
    'oracle_tolerance': 'oracle_tolerance',
}


def common_arguments():
    """Flags shared by every subcommand. Unset flags stay None so config file values survive."""
    parser = argparse.ArgumentParser(add_help=False)
    parser.add_argument('--pes', type=int, help='Number of processing elements M (default: 32)')
    parser.add_argument('--k', type=int, help='Particles per PE K (default: 256)')
    parser.add_argument('--n0', type=int, help='Exchange period n0 (default: 10)')
    parser.add_argument('--steps', type=int, help='Time horizon (default: 1000)')
    parser.add_argument('--runs', type=int, help='Independent Monte Carlo runs (default: 50)')
    parser.add_argument('--seed', type=int, help='64-bit experiment seed (default: 7)')
    parser.add_argument('--topology', choices=['havel-hakimi', 'circular'],
                        help='Exchange topology (default: havel-hakimi)')
    parser.add_argument('--per-neighbor', type=int, help='Particles swapped with each neighbour')
    parser.add_argument('--fraction', type=float,
                        help='Share of each PE\'s particles exchanged when --per-neighbor is unset (default: 0.9)')
    parser.add_argument('--workers', type=int, help='Worker processes (default: CPU count)')
    parser.add_argument('--out', help='Output directory (default: results)')
    parser.add_argument('--config', help='YAML configuration file; flags override its values')
    parser.add_argument('--log-level', default='INFO', choices=['DEBUG', 'INFO', 'WARNING', 'ERROR'],
                        help='Logging level (default: INFO)')
    parser.add_argument('--no-ledger', action='store_true', help='Do not record the run in ledger.db')
    return parser


def build_parser():
    parser = argparse.ArgumentParser(description='Distributed particle filter experiments.')
    subparsers = parser.add_subparsers(dest='subcommand', required=True)
    common = common_arguments()
    for name, command in COMMANDS.items():
        subparser = subparsers.add_parser(name, help=command.HELP, parents=[common])
        command.add_arguments(subparser)
    return parser


def flag_values(args):
    values = {field: getattr(args, dest, None) for dest, field in FLAG_FIELDS.items()}
    if args.no_ledger:
        values['ledger'] = False
    return values


def main(argv=None):
    """
    Parse arguments, run one subcommand and return its exit code.

    Exit codes: 0 success, 1 usage or configuration error, 2 acceptance check
    failed, 3 runtime failure.
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 0 if e.code == 0 else EXIT_CONFIG

    # Setup logging
    logging.basicConfig(
        level=getattr(logging, args.log_level),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        datefmt='%Y-%m-%d %H:%M:%S',
        force=True,
    )
    colorama.just_fix_windows_console()

    try:
        file_values = load_config_file(args.config) if args.config else {}
        config = build_config(args.subcommand, file_values, flag_values(args))
    except ConfigError as e:
        logger.error(f"Invalid configuration: {e}")
        print(colorama.Fore.RED + f"❌ Invalid configuration: {e}" + colorama.Style.RESET_ALL, file=sys.stderr)
        return EXIT_CONFIG

    ledger = Ledger(config.out, enabled=config.ledger)
    ledger.start(config)
    logger.info(f"Starting {config.subcommand} with seed {config.seed} and {config.worker_count} workers")
    try:
        return COMMANDS[config.subcommand].run(config, ledger)
    except TopologyError as e:
        logger.error(f"Infeasible topology: {e}")
        ledger.finish(EXIT_CONFIG, f"TopologyError: {e}")
        return EXIT_CONFIG
    except Exception as e:
        logger.exception(f"{config.subcommand} failed: {e}")
        ledger.finish(EXIT_RUNTIME, f"{type(e).__name__}: {e}")
        return EXIT_RUNTIME


# Run application
if __name__ == '__main__':
    sys.exit(main())
