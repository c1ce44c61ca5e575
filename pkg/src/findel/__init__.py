"""Executable semantics for the Findel financial-derivative language."""

from .ast import (
    T_MAX,
    And,
    Give,
    If,
    One,
    Or,
    Primitive,
    Scale,
    ScaleObs,
    Timebound,
    Zero,
    after,
    at,
    before,
    validate,
)
from .engine import ExecResult, ExecutionFailed, FailureReason, FindelContract, TransferRecord, execute
from .marketplace import MarketError, MarketplaceState
from .parser import ParseError, parse, pretty_print

__version__ = "0.1.0"
