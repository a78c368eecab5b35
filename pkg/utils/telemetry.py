# utils/telemetry.py

# Standard Imports
import logging
from dataclasses import dataclass
from typing import List, Optional, Protocol

# External Imports
import numpy as np

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class StepRecord:
    """Diagnostics emitted by the engine after every completed step."""
    step: int
    sup_aggregate: float
    estimate: Optional[np.ndarray]
    exchanged: bool


class TelemetrySink(Protocol):
    def emit(self, record: StepRecord) -> None:
        ...


class MemorySink:
    """Keeps every record in memory; used by the experiment harness."""

    def __init__(self):
        self.records: List[StepRecord] = []

    def emit(self, record: StepRecord) -> None:
        self.records.append(record)

    def sup_aggregates(self) -> np.ndarray:
        return np.array([r.sup_aggregate for r in self.records])

    def estimates(self) -> np.ndarray:
        return np.stack([r.estimate for r in self.records])


class LoggingSink:
    """Logs one line every `every` steps at DEBUG level."""

    def __init__(self, every=100):
        self.every = every

    def emit(self, record: StepRecord) -> None:
        if record.step % self.every == 0:
            logger.debug(
                f"step {record.step}: sup W = {record.sup_aggregate:.4g}, "
                f"exchanged = {record.exchanged}, estimate = {record.estimate}"
            )


class FanoutSink:
    """Forwards every record to several sinks."""

    def __init__(self, *sinks):
        self.sinks = sinks

    def emit(self, record: StepRecord) -> None:
        for sink in self.sinks:
            sink.emit(record)
