"""Streaming conditional risk minimization with a pool of anchored subroutines."""
from .discrepancy import DiscrepancyBound, HistoryWindow, make_bound
from .ensemble import run_ensemble
from .errors import ConfigError, PreconditionError, ProtocolError
from .macro import EpsilonSchedule, Macro, RunResult, StepTrace, run, run_bare
from .process import Chunk, Observation, ProcessDescriptor, generate, ingest_csv
from .subroutine import ConversionSpec, LearnerSpec

__version__ = "0.1.0"

__all__ = [
    "Chunk",
    "ConfigError",
    "ConversionSpec",
    "DiscrepancyBound",
    "EpsilonSchedule",
    "HistoryWindow",
    "LearnerSpec",
    "Macro",
    "Observation",
    "PreconditionError",
    "ProcessDescriptor",
    "ProtocolError",
    "RunResult",
    "StepTrace",
    "generate",
    "ingest_csv",
    "make_bound",
    "run",
    "run_bare",
    "run_ensemble",
]
