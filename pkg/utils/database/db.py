# utils/database/db.py

# Standard Imports
import logging
import os
from contextlib import contextmanager
from pathlib import Path

# External Imports
from sqlalchemy import create_engine
from sqlalchemy.orm import DeclarativeBase, sessionmaker

logger = logging.getLogger(__name__)

LEDGER_FILENAME = 'ledger.db'
MEMORY_URL = 'sqlite:///:memory:'


class Base(DeclarativeBase):
    pass


def ensure_database_directory(out_dir):
    """
    Make sure the ledger can live in the output directory, with fallback options.

    Args:
        out_dir (str): Output directory of the run.

    Returns:
        str: SQLAlchemy database URL, in-memory when the directory is not writable.
    """
    try:
        Path(out_dir).mkdir(parents=True, exist_ok=True)

        # Test if we can write to the directory
        test_file = os.path.join(out_dir, '.write_test')
        with open(test_file, 'w') as f:
            f.write('test')
        os.remove(test_file)
    except (PermissionError, OSError) as e:
        logger.warning(f"⚠️  Cannot write the ledger to {out_dir}: {e}")
        logger.warning("🔄 Falling back to in-memory ledger (data will not persist)")
        return MEMORY_URL

    db_path = os.path.abspath(os.path.join(out_dir, LEDGER_FILENAME))
    logger.debug(f"Ledger database: {db_path}")
    return f'sqlite:///{db_path}'


def init_db(url):
    """Create the engine and every ledger table; returns a session factory."""
    engine = create_engine(url)
    Base.metadata.create_all(engine)
    return sessionmaker(bind=engine, expire_on_commit=False)


@contextmanager
def session_scope(session_factory):
    """Commit on success, roll back on error."""
    session = session_factory()
    try:
        yield session
        session.commit()
    except Exception:
        session.rollback()
        raise
    finally:
        session.close()
