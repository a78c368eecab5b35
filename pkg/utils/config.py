# utils/config.py

# Standard Imports
import dataclasses
import logging
import os
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Tuple

# External Imports
import yaml

# Local Imports
from utils.errors import ConfigError, ModelError
from utils.model import Region, TrackingModelParams, load_sensor_csv
from utils.topology import TOPOLOGY_KINDS

logger = logging.getLogger(__name__)

REFERENCE_KINDS = ('true-state', 'proxy')
RATE_READINGS = ('per-pe', 'total')
MAX_SEED = 2 ** 64
DEFAULT_PROXY_K = 8192


def _check_output_dir(out):
    """Fail early when out cannot become a writable directory; nothing is created here."""
    path = os.path.abspath(out)
    while not os.path.exists(path):
        path = os.path.dirname(path)
    if not os.path.isdir(path):
        raise ConfigError('out', f"{path} is not a directory")
    if not os.access(path, os.W_OK | os.X_OK):
        raise ConfigError('out', f"{path} is not writable")


@dataclass
class RunConfig:
    """Every parameter of a CLI run; each subcommand reads the fields it needs."""
    subcommand: str = 'run-tracking'
    m_pes: int = 32
    k_per_pe: int = 256
    exchange_period: int = 10
    horizon: int = 1000
    runs: int = 50
    seed: int = 7
    topology: str = 'havel-hakimi'
    per_neighbor: Optional[int] = None
    exchange_fraction: float = 0.9
    workers: Optional[int] = None
    out: str = 'results'
    ledger: bool = True

    # run-tracking
    reference: str = 'true-state'
    proxy_k: Optional[int] = None
    compare_centralized: bool = False
    full_state: bool = False
    export_trajectory: bool = False
    export_topology: bool = False

    # run-assumption-check
    c: float = 4.0
    q: float = 4.0
    epsilon: float = 0.5

    # run-rate-fit (m_list is also the optional M sweep of run-assumption-check)
    m_list: Tuple[int, ...] = ()
    eval_step: Optional[int] = None
    rate_reading: str = 'per-pe'
    zeta_band: Tuple[float, float] = (0.29, 0.59)

    # run-oracle-check
    k_grid: Tuple[int, ...] = (64, 256, 1024)
    oracle_tolerance: float = 0.05

    # model overrides and sensor layout
    model: Dict[str, Any] = field(default_factory=dict)
    sensors_csv: Optional[str] = None

    @property
    def worker_count(self) -> int:
        return self.workers or os.cpu_count() or 1

    def validate(self) -> 'RunConfig':
        for name in ('m_pes', 'k_per_pe', 'exchange_period', 'horizon', 'runs'):
            value = getattr(self, name)
            if not isinstance(value, int) or value < 1:
                raise ConfigError(name, f"must be an integer >= 1, got {value!r}")
        if self.workers is not None and self.workers < 1:
            raise ConfigError('workers', f"must be >= 1, got {self.workers}")
        if not isinstance(self.seed, int) or not 0 <= self.seed < MAX_SEED:
            raise ConfigError('seed', f"must be a 64-bit unsigned integer, got {self.seed!r}")
        if self.topology not in TOPOLOGY_KINDS:
            raise ConfigError('topology', f"must be one of {TOPOLOGY_KINDS}, got {self.topology!r}")
        if self.per_neighbor is not None and self.per_neighbor < 0:
            raise ConfigError('per_neighbor', f"must be >= 0, got {self.per_neighbor}")
        if not 0.0 <= self.exchange_fraction <= 1.0:
            raise ConfigError('exchange_fraction', f"must lie in [0, 1], got {self.exchange_fraction}")
        if self.reference not in REFERENCE_KINDS:
            raise ConfigError('reference', f"must be one of {REFERENCE_KINDS}, got {self.reference!r}")
        if self.proxy_k is not None and self.proxy_k < 1:
            raise ConfigError('proxy_k', f"must be >= 1, got {self.proxy_k}")
        if self.c <= 0:
            raise ConfigError('c', f"must be positive, got {self.c}")
        if self.q < 4:
            raise ConfigError('q', f"must be >= 4, got {self.q}")
        if not 0.0 <= self.epsilon < 1.0:
            raise ConfigError('epsilon', f"must lie in [0, 1), got {self.epsilon}")
        if any(m < 1 for m in self.m_list):
            raise ConfigError('m_list', f"every M must be >= 1, got {list(self.m_list)}")
        if self.subcommand == 'run-rate-fit' and len(set(self.m_list)) < 3:
            raise ConfigError('m_list', f"rate fit needs at least 3 distinct M values, got {list(self.m_list)}")
        if self.eval_step is not None and not 1 <= self.eval_step <= self.horizon:
            raise ConfigError('eval_step', f"must lie in [1, horizon={self.horizon}], got {self.eval_step}")
        if self.rate_reading not in RATE_READINGS:
            raise ConfigError('rate_reading', f"must be one of {RATE_READINGS}, got {self.rate_reading!r}")
        if any(k < 1 for k in self.k_grid) or not self.k_grid:
            raise ConfigError('k_grid', f"needs positive K values, got {list(self.k_grid)}")
        if self.subcommand == 'run-rate-fit':
            largest_n = max(self.m_list) * self.k_per_pe
            if self.proxy_k is None:
                self.proxy_k = max(largest_n, DEFAULT_PROXY_K)
            elif self.proxy_k < largest_n:
                raise ConfigError('proxy_k', f"must be at least the largest swept M K = {largest_n}, "
                                             f"got {self.proxy_k}")
        if self.subcommand == 'run-assumption-check' and self.horizon < self.exchange_period:
            raise ConfigError('horizon', f"must reach the first exchange step n0 = {self.exchange_period}, "
                                         f"got {self.horizon}")
        _check_output_dir(self.out)
        self.tracking_params()
        return self

    def tracking_params(self) -> TrackingModelParams:
        """Tracking model parameters with the configured overrides applied."""
        overrides = dict(self.model)
        if 'region' in overrides:
            try:
                overrides['region'] = Region(*overrides['region'])
            except (TypeError, ModelError) as e:
                raise ConfigError('model.region', str(e)) from e
        if self.sensors_csv:
            try:
                overrides['sensors'] = load_sensor_csv(self.sensors_csv)
            except (OSError, ModelError) as e:
                raise ConfigError('sensors_csv', str(e)) from e
        known = {f.name for f in dataclasses.fields(TrackingModelParams)}
        for key in overrides:
            if key not in known:
                raise ConfigError(f"model.{key}", "unknown model parameter")
        try:
            return TrackingModelParams(**overrides)
        except ModelError as e:
            raise ConfigError('model', str(e)) from e

    def to_yaml(self) -> str:
        values = dataclasses.asdict(self)
        for key, value in values.items():
            if isinstance(value, tuple):
                values[key] = list(value)
        return yaml.safe_dump(values, sort_keys=True)


SUBCOMMAND_DEFAULTS = {
    'run-tracking': {},
    'run-assumption-check': {},
    'run-rate-fit': {
        'm_list': (4, 8, 16, 32),
        'k_per_pe': 128,
        'horizon': 1000,
        'runs': 60,
    },
    'run-oracle-check': {
        'm_pes': 4,
        'exchange_period': 5,
        'horizon': 50,
        'runs': 20,
    },
}

TUPLE_FIELDS = ('m_list', 'k_grid', 'zeta_band')


def _normalize_keys(values):
    return {str(key).replace('-', '_'): value for key, value in values.items()}


def load_config_file(path) -> Dict[str, Any]:
    """
    Read a YAML configuration file into RunConfig field values.

    Raises:
        ConfigError: If the file cannot be read, is not a mapping or names an unknown field.
    """
    try:
        with open(path, 'r') as f:
            values = yaml.safe_load(f) or {}
    except (OSError, yaml.YAMLError) as e:
        raise ConfigError('config', f"cannot read {path}: {e}") from e
    if not isinstance(values, dict):
        raise ConfigError('config', f"{path} must contain a mapping")
    values = _normalize_keys(values)
    known = {f.name for f in dataclasses.fields(RunConfig)}
    for key in values:
        if key not in known:
            raise ConfigError(key, f"unknown setting in {path}")
    logger.info(f"Loaded configuration from {path}")
    return values


def build_config(subcommand, file_values=None, flag_values=None) -> RunConfig:
    """
    Merge defaults, subcommand defaults, file values and flags (later wins), then validate.

    Flag values of None mean "not given" and never override.
    """
    values: Dict[str, Any] = {'subcommand': subcommand}
    values.update(SUBCOMMAND_DEFAULTS.get(subcommand, {}))
    values.update(file_values or {})
    values.update({k: v for k, v in (flag_values or {}).items() if v is not None})
    values['subcommand'] = subcommand
    for name in TUPLE_FIELDS:
        if name in values and values[name] is not None:
            values[name] = tuple(values[name])
    try:
        config = RunConfig(**values)
    except TypeError as e:
        raise ConfigError('config', str(e)) from e
    return config.validate()
