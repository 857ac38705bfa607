"""
Database utility module.

This module sets up the SQLAlchemy engine, session factory and base model for the
job ledger kept inside each workspace. It also provides a context manager for
getting a database session.
"""

from contextlib import contextmanager
from functools import lru_cache
from pathlib import Path

from sqlalchemy import create_engine
from sqlalchemy.orm import declarative_base
from sqlalchemy.orm import sessionmaker

Base = declarative_base()


@lru_cache
def get_engine(database_url: str):
    """
    Create (once per URL) an engine and make sure the ledger tables exist.

    Args:
        database_url (str): SQLAlchemy URL, normally a SQLite file in the workspace.

    Returns:
        Engine: SQLAlchemy engine.
    """
    if database_url.startswith("sqlite:///"):
        Path(database_url[len("sqlite:///"):]).parent.mkdir(parents=True, exist_ok=True)
    engine = create_engine(database_url, connect_args={"check_same_thread": False})
    # Import the models so their tables are registered on Base.
    import models  # noqa: F401
    Base.metadata.create_all(bind=engine)
    return engine


@contextmanager
def get_db(database_url: str):
    """
    Context manager that yields a database session.

    Args:
        database_url (str): SQLAlchemy URL of the ledger.

    Yields:
        Session: SQLAlchemy session.
    """
    session_factory = sessionmaker(autocommit=False, autoflush=False, bind=get_engine(database_url))
    db = session_factory()
    try:
        yield db
    finally:
        db.close()
