import logging
import os
import time
from pathlib import Path

from sqlalchemy import create_engine, text
from sqlalchemy.exc import OperationalError
from sqlalchemy.orm import scoped_session, sessionmaker

logger = logging.getLogger(__name__)

DATABASE_URL_ENV = "GSCONVEX_DATABASE_URL"
DEFAULT_DATABASE_NAME = "gsconvex_runs.db"

# one engine and session factory per URL
_engines = {}
_sessions = {}


def resolve_database_url(url=None, out_dir="."):
    """
    Ledger URL: explicit argument, then the environment, then SQLite in out_dir

    Args:
        url: Explicit SQLAlchemy URL
        out_dir: Directory for the default SQLite file

    Returns:
        str: SQLAlchemy URL
    """
    if url:
        return url
    if os.environ.get(DATABASE_URL_ENV):
        return os.environ[DATABASE_URL_ENV]
    return f"sqlite:///{Path(out_dir).resolve() / DEFAULT_DATABASE_NAME}"


def get_db_engine(url, max_retries=3):
    """Get database engine with retry logic for connection issues"""
    if url in _engines:
        return _engines[url]

    if url.startswith("sqlite"):
        options = {}
    else:
        options = {
            "connect_args": {"connect_timeout": 10},
            "pool_pre_ping": True,  # Check if connection is alive before using
            "pool_recycle": 3600,
            "pool_timeout": 30,
        }

    retry_count = 0
    while retry_count < max_retries:
        try:
            engine = create_engine(url, **options)
            with engine.connect() as conn:
                conn.execute(text("SELECT 1"))
            logger.info("Run ledger connection established")
            _engines[url] = engine
            return engine
        except OperationalError as e:
            retry_count += 1
            wait_time = 2 ** retry_count  # Exponential backoff
            logger.warning("Ledger connection failed, retry %d/%d after %ds: %s",
                           retry_count, max_retries, wait_time, e)
            if retry_count < max_retries:
                time.sleep(wait_time)

    raise OperationalError(f"connect to {url}", None, Exception("failed after multiple retries"))


def get_session_factory(url):
    """Get a session factory for creating database sessions"""
    if url not in _sessions:
        _sessions[url] = scoped_session(sessionmaker(bind=get_db_engine(url)))
    return _sessions[url]


def dispose(url=None):
    """Drop cached engines (all of them when url is None)"""
    for key in [url] if url else list(_engines):
        session = _sessions.pop(key, None)
        if session is not None:
            session.remove()
        engine = _engines.pop(key, None)
        if engine is not None:
            engine.dispose()
