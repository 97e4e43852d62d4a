import hashlib
import json
import logging
import math
from pathlib import Path

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from errors import ConfigError

logger = logging.getLogger(__name__)


def point_columns(prefix, dimension):
    """
    Column names for the coordinates of a point in a table

    Args:
        prefix: Point name, e.g. "m1"
        dimension: Number of coordinates

    Returns:
        list: ["m1_1", ..., "m1_n"]
    """
    return [f"{prefix}_{i}" for i in range(1, dimension + 1)]


def sample_row(s, a, m1, m2, value, value_name="residual", **extra):
    """One table row for an (s, a, m1, m2) sample"""
    row = {"s": float(s), "a": float(a)}
    row.update(zip(point_columns("m1", len(m1)), (float(c) for c in m1)))
    row.update(zip(point_columns("m2", len(m2)), (float(c) for c in m2)))
    row[value_name] = float(value)
    row.update(extra)
    return row


def format_point(point):
    """
    Format a point for log messages and report strings

    Args:
        point: Sequence of coordinates

    Returns:
        str: e.g. "(0.5, 1)"
    """
    return "(" + ", ".join(f"{float(c):.10g}" for c in np.atleast_1d(point)) + ")"


def _jsonable(value):
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, (set, frozenset, tuple)):
        return list(value)
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")


def canonical_json(obj):
    """Deterministic JSON text: sorted keys, fixed indentation, no NaN."""
    return json.dumps(obj, sort_keys=True, indent=2, default=_jsonable, allow_nan=False) + "\n"


def config_hash(obj):
    """First 16 hex digits of the SHA-256 of the canonical JSON of obj"""
    return hashlib.sha256(canonical_json(obj).encode("utf-8")).hexdigest()[:16]


def write_json(path, obj):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(canonical_json(obj), encoding="utf-8")
    logger.info("Wrote %s", path)
    return path


def write_table(table, path):
    """
    Write a DataFrame as CSV with round-trip float precision

    Args:
        table: pandas DataFrame
        path: Output file

    Returns:
        Path: The written file
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    table.to_csv(path, index=False, float_format="%.17g")
    logger.info("Wrote %d rows to %s", len(table), path)
    return path


def read_table(path):
    """
    Read a CSV table written by write_table

    Raises:
        ConfigError: The file is missing, unreadable or not a CSV table
    """
    try:
        return pd.read_csv(path, float_precision="round_trip")
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise ConfigError(f"cannot read table {path}: {e}") from e


def finite_or_none(value):
    """JSON-safe float: None for inf/NaN"""
    if value is None:
        return None
    value = float(value)
    return value if math.isfinite(value) else None


def parallel_map(function, items, threads=1):
    """
    Map over items, optionally on a thread pool; results keep the input order

    Args:
        function: Callable applied to each item
        items: Iterable of inputs
        threads: Worker count; 1 runs inline

    Returns:
        list: function(item) for each item, in order
    """
    items = list(items)
    if threads is None or threads <= 1 or len(items) <= 1:
        return [function(item) for item in items]
    logger.debug("Dispatching %d tasks to %d threads", len(items), threads)
    return Parallel(n_jobs=threads, backend="threading")(delayed(function)(item) for item in items)
