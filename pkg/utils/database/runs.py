# utils/database/runs.py

# Standard Imports
from datetime import datetime, timezone

# External Imports
from sqlalchemy import Column, DateTime, Float, ForeignKey, Integer, String, Text, UniqueConstraint
from sqlalchemy.orm import relationship

# Local Imports
from .db import Base


def _utcnow():
    return datetime.now(timezone.utc)


class ExperimentRun(Base):
    """One CLI invocation: subcommand, seed, effective configuration and outcome."""
    __tablename__ = 'experiment_run'

    id = Column(Integer, primary_key=True)
    subcommand = Column(String(40), nullable=False)
    seed = Column(String(24), nullable=False)  # 64-bit seeds overflow SQLite INTEGER
    config_yaml = Column(Text, nullable=False)
    started_at = Column(DateTime, default=_utcnow)
    finished_at = Column(DateTime, nullable=True)
    exit_code = Column(Integer, nullable=True)
    verdict = Column(String(500), nullable=True)

    # Relationship to per-run summaries
    summaries = relationship('RunSummary', back_populates='experiment', cascade='all, delete-orphan',
                             order_by='RunSummary.run_index')

    def __repr__(self):
        return f'<ExperimentRun {self.id} {self.subcommand}>'


class RunSummary(Base):
    """Per Monte Carlo run statistics of an experiment."""
    __tablename__ = 'run_summary'

    id = Column(Integer, primary_key=True)
    experiment_id = Column(Integer, ForeignKey('experiment_run.id'), nullable=False)
    run_index = Column(Integer, nullable=False)
    mean_error = Column(Float, nullable=True)
    final_error = Column(Float, nullable=True)
    mean_exchange_sup = Column(Float, nullable=True)

    experiment = relationship('ExperimentRun', back_populates='summaries')

    __table_args__ = (UniqueConstraint('experiment_id', 'run_index', name='_experiment_run_uc'),)

    def __repr__(self):
        return f'<RunSummary experiment_id={self.experiment_id} run={self.run_index}>'
