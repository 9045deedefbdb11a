"""Deterministic delay-tolerant network simulator (Epidemic, MaxProp, PRoPHET)."""

from .config import ConfigDocument, ConfigError, ScenarioConfig, default_document, parse_config
from .engine import InvariantViolation, RunResult, run, sweep
from .metrics import RunReport, emit_tables, report_from_events

__version__ = "0.1.0"

__all__ = [
    "ConfigDocument",
    "ConfigError",
    "InvariantViolation",
    "RunReport",
    "RunResult",
    "ScenarioConfig",
    "default_document",
    "emit_tables",
    "parse_config",
    "report_from_events",
    "run",
    "sweep",
]
