# utils/database/__init__.py

from .db import Base, ensure_database_directory, init_db, session_scope
from .runs import ExperimentRun, RunSummary
from .ledger import Ledger

__all__ = ['Base', 'ensure_database_directory', 'init_db', 'session_scope', 'ExperimentRun', 'RunSummary', 'Ledger']
