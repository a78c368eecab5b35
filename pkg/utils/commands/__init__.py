# utils/commands/__init__.py

# Import subcommands
from . import assumption, oracle, rate_fit, tracking
from .common import EXIT_ACCEPTANCE, EXIT_CONFIG, EXIT_OK, EXIT_RUNTIME

# Register subcommands
COMMANDS = {module.NAME: module for module in (tracking, assumption, rate_fit, oracle)}

__all__ = ['COMMANDS', 'EXIT_OK', 'EXIT_CONFIG', 'EXIT_ACCEPTANCE', 'EXIT_RUNTIME']
