# utils/commands/common.py

# Standard Imports
import logging

# External Imports
import colorama

# Local Imports
from utils.experiments import EngineConfig

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_ACCEPTANCE = 2
EXIT_RUNTIME = 3


def engine_from_config(config, m_pes=None) -> EngineConfig:
    """EngineConfig for the tracking model from a validated RunConfig."""
    return EngineConfig(
        m_pes=m_pes or config.m_pes,
        k_per_pe=config.k_per_pe,
        exchange_period=config.exchange_period,
        topology=config.topology,
        per_neighbor=config.per_neighbor,
        exchange_fraction=config.exchange_fraction,
        params=config.tracking_params(),
    )


def report(passed, message) -> str:
    """Print a coloured verdict line and return the plain text for the ledger."""
    if passed:
        print(colorama.Fore.GREEN + f"✅ {message}" + colorama.Style.RESET_ALL)
        logger.info(message)
    else:
        print(colorama.Fore.RED + f"❌ {message}" + colorama.Style.RESET_ALL)
        logger.error(message)
    return message


def info(message):
    print(colorama.Fore.CYAN + message + colorama.Style.RESET_ALL)
