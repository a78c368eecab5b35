# utils/database/ledger.py

# Standard Imports
import logging
import math
from datetime import datetime, timezone

# Local Imports
from .db import ensure_database_directory, init_db, session_scope
from .runs import ExperimentRun, RunSummary

logger = logging.getLogger(__name__)


def _nullable(value):
    return None if value is None or (isinstance(value, float) and math.isnan(value)) else value


class Ledger:
    """
    Records every CLI invocation and its per-run summaries in the output directory.

    A disabled ledger accepts every call and stores nothing.
    """

    def __init__(self, out_dir=None, enabled=True, url=None):
        self.enabled = enabled
        self.session_factory = None
        self.experiment_id = None
        if enabled:
            self.url = url or ensure_database_directory(out_dir)
            self.session_factory = init_db(self.url)

    def start(self, config) -> None:
        if not self.enabled:
            return
        with session_scope(self.session_factory) as session:
            run = ExperimentRun(subcommand=config.subcommand, seed=str(config.seed), config_yaml=config.to_yaml())
            session.add(run)
            session.flush()
            self.experiment_id = run.id
        logger.debug(f"Ledger entry {self.experiment_id} opened for {config.subcommand}")

    def add_summaries(self, summaries) -> None:
        if not self.enabled or self.experiment_id is None:
            return
        with session_scope(self.session_factory) as session:
            for s in summaries:
                session.add(RunSummary(
                    experiment_id=self.experiment_id,
                    run_index=s.run_index,
                    mean_error=_nullable(s.mean_error),
                    final_error=_nullable(s.final_error),
                    mean_exchange_sup=_nullable(s.mean_exchange_sup),
                ))

    def finish(self, exit_code, verdict=None) -> None:
        if not self.enabled or self.experiment_id is None:
            return
        with session_scope(self.session_factory) as session:
            run = session.get(ExperimentRun, self.experiment_id)
            run.finished_at = datetime.now(timezone.utc)
            run.exit_code = exit_code
            run.verdict = verdict
        logger.debug(f"Ledger entry {self.experiment_id} closed with exit code {exit_code}")

    def experiments(self):
        """Every recorded invocation, oldest first."""
        if not self.enabled:
            return []
        with session_scope(self.session_factory) as session:
            runs = session.query(ExperimentRun).order_by(ExperimentRun.id).all()
            for run in runs:
                list(run.summaries)
            return runs
