"""Asymptotics of the genus-0 and genus-1 enumerative invariants of the plane."""
from ._mp import DEFAULT_PRECISION, working_precision
from .errors import AccuracyError, CacheCorrupt, EventNotReached, GwasymError, InvariantViolation
from .invariants import (
    InvariantTable,
    build_tables,
    genus0_table,
    genus1_table,
    kontsevich_weight,
    verify_bounds,
    verify_wdvv_series,
)

__version__ = "0.1.0"
