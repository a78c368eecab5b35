# utils/csv_export.py

# Standard Imports
import logging
import os
from typing import Iterable, List, Sequence, Tuple

# External Imports
import numpy as np
import pandas as pd

# Local Imports
from utils.experiments import ErrorSeries, RateFitResult, RunSummaryRow, SupMomentSeries

logger = logging.getLogger(__name__)

FLOAT_FORMAT = '%.12g'

SUP_MOMENT_COLUMNS = ['n', 'is_exchange_step', 'moment_estimate', 'bound']
ERROR_COLUMNS = ['n', 'error', 'reference_type', 'M', 'K', 'runs', 'filter']
RATE_FIT_COLUMNS = ['M', 'error', 'fitted_value']
RATE_SUMMARY_COLUMNS = ['C', 'zeta', 'residual']
SUP_BY_M_COLUMNS = ['M', 'moment_estimate', 'bound', 'ratio']
ORACLE_COLUMNS = ['K', 'MK', 'error']
RUNS_COLUMNS = ['run', 'mean_error', 'final_error', 'mean_exchange_sup']


def _write(frame: pd.DataFrame, out_dir, filename) -> str:
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, filename)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator='\n')
    logger.info(f"Wrote {len(frame)} rows to {path}")
    return path


def sup_moment_frame(series: SupMomentSeries) -> pd.DataFrame:
    return pd.DataFrame({
        'n': series.steps,
        'is_exchange_step': series.is_exchange.astype(int),
        'moment_estimate': series.moments,
        'bound': np.full(len(series.steps), series.bound),
    }, columns=SUP_MOMENT_COLUMNS)


def write_sup_moment(series: SupMomentSeries, out_dir) -> str:
    return _write(sup_moment_frame(series), out_dir, 'sup_moment.csv')


def error_frame(series: ErrorSeries, filter_name=None) -> pd.DataFrame:
    n = len(series)
    return pd.DataFrame({
        'n': np.arange(1, n + 1),
        'error': series.errors,
        'reference_type': [series.reference_type] * n,
        'M': [series.m_pes] * n,
        'K': [series.k_per_pe] * n,
        'runs': [series.runs] * n,
        'filter': [filter_name or series.filter_name] * n,
    }, columns=ERROR_COLUMNS)


def write_errors(series: Sequence[ErrorSeries], out_dir, difference=None) -> str:
    """
    Write one block of rows per error series to errors.csv.

    When a difference series is given, it is appended with filter = 'difference'
    and the metadata of the first series.
    """
    frames = [error_frame(s) for s in series]
    if difference is not None:
        first = series[0]
        frames.append(error_frame(ErrorSeries(
            np.asarray(difference), first.m_pes, first.k_per_pe, first.runs, first.reference_type,
        ), filter_name='difference'))
    return _write(pd.concat(frames, ignore_index=True), out_dir, 'errors.csv')


def write_rate_fit(error_by_m: Iterable[Tuple[int, float]], fit: RateFitResult, k_per_pe, out_dir) -> List[str]:
    """rate_fit.csv holds the per-M rows; rate_fit_summary.csv the single C, zeta, residual row."""
    rows = [(m, e, fit.fitted(m, k_per_pe)) for m, e in error_by_m]
    detail = _write(pd.DataFrame(rows, columns=RATE_FIT_COLUMNS), out_dir, 'rate_fit.csv')
    summary = _write(
        pd.DataFrame([(fit.c_fit, fit.zeta_fit, fit.residual)], columns=RATE_SUMMARY_COLUMNS),
        out_dir, 'rate_fit_summary.csv',
    )
    return [detail, summary]


def write_sup_moment_by_m(rows, out_dir) -> str:
    return _write(pd.DataFrame(rows, columns=SUP_BY_M_COLUMNS), out_dir, 'sup_moment_by_m.csv')


def write_oracle(rows, out_dir) -> str:
    return _write(pd.DataFrame(rows, columns=ORACLE_COLUMNS), out_dir, 'oracle.csv')


def write_run_summaries(summaries: Sequence[RunSummaryRow], out_dir) -> str:
    rows = [(s.run_index, s.mean_error, s.final_error, s.mean_exchange_sup) for s in summaries]
    return _write(pd.DataFrame(rows, columns=RUNS_COLUMNS), out_dir, 'runs.csv')
