# tests/test_database.py

# Local Imports
from utils.config import build_config
from utils.database import Ledger, ensure_database_directory
from utils.database.db import MEMORY_URL
from utils.experiments import RunSummaryRow


def test_directory_created(tmp_path):
    url = ensure_database_directory(tmp_path / 'results')
    assert url.startswith('sqlite:///') and url.endswith('ledger.db')
    assert (tmp_path / 'results').is_dir()


def test_unwritable_directory_falls_back_to_memory(tmp_path):
    blocker = tmp_path / 'file.txt'
    blocker.write_text('not a directory')
    assert ensure_database_directory(blocker / 'results') == MEMORY_URL


def test_in_memory_ledger_round_trip():
    ledger = Ledger(url=MEMORY_URL)
    ledger.start(build_config('run-tracking'))
    ledger.add_summaries([
        RunSummaryRow(0, 1.5, 2.0, 0.1),
        RunSummaryRow(1, 1.25, 1.0, float('nan')),
    ])
    ledger.finish(0, 'done')
    (experiment,) = ledger.experiments()
    assert experiment.exit_code == 0 and experiment.verdict == 'done'
    assert experiment.finished_at is not None and experiment.seed == '7'
    assert [s.run_index for s in experiment.summaries] == [0, 1]
    assert experiment.summaries[1].mean_exchange_sup is None


def test_disabled_ledger_is_inert(tmp_path):
    ledger = Ledger(tmp_path / 'out', enabled=False)
    ledger.start(build_config('run-tracking'))
    ledger.finish(0)
    assert ledger.experiments() == []
    assert not (tmp_path / 'out').exists()
