"""
Structured logging for experiment runs: one line per event, fixed key=value extras.
"""
import logging
import sys
from contextvars import ContextVar
from typing import TextIO

from app.config import get_settings
from app.errors import ConfigurationError

# Run ID for tracing (set by the harness around each run)
run_id_ctx: ContextVar[str] = ContextVar("run_id", default="")

_EXTRA_KEYS = (
    "variant",
    "p",
    "seed",
    "rank",
    "tick",
    "rounds",
    "k_local",
    "coarse_solves",
    "corrections",
    "relres",
    "duration_ms",
    "error",
    "path",
)


class StructuredFormatter(logging.Formatter):
    """Format as time + level + logger + optional run_id + message + extras."""

    def format(self, record: logging.LogRecord) -> str:
        rid = run_id_ctx.get() or getattr(record, "run_id", "")
        parts = [
            self.formatTime(record, self.datefmt),
            record.levelname,
            record.name,
        ]
        if rid:
            parts.append(f"run_id={rid}")
        parts.append(record.getMessage())
        # LogRecord stores extra keys as attributes
        for key in _EXTRA_KEYS:
            if hasattr(record, key):
                parts.append(f"{key}={getattr(record, key)}")
        if record.exc_info:
            parts.append(self.formatException(record.exc_info))
        return " | ".join(str(p) for p in parts)


def configure_logging(level: str | None = None, stream: TextIO | None = None) -> None:
    """Install the structured handler on the root logger. Idempotent; a repeat call only
    updates the level (default: Settings.log_level) and, when given, the stream."""
    name = (level or get_settings().log_level).upper()
    level_value = logging.getLevelName(name)
    if not isinstance(level_value, int):
        raise ConfigurationError(f"unknown log level {level!r}")
    root = logging.getLogger()
    handler = next((h for h in root.handlers if isinstance(h, _RunHandler)), None)
    if handler is None:
        handler = _RunHandler(stream or sys.stderr)
        root.addHandler(handler)
    elif stream is not None:
        handler.setStream(stream)
    handler.setFormatter(StructuredFormatter())
    root.setLevel(level_value)


class _RunHandler(logging.StreamHandler):
    """Marks the handler configure_logging owns."""


def get_logger(name: str) -> logging.Logger:
    return logging.getLogger(name)
