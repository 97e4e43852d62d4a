# Run ledger: SQLAlchemy models and session helpers
