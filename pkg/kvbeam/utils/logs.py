import logging
import sys

from kvbeam.config import settings

_ROOT = "kvbeam"
_configured = False


class _TagFormatter(logging.Formatter):
    # "[SYNTH] observer margin=2.31"
    def format(self, record: logging.LogRecord) -> str:
        tag = record.name.rsplit(".", 1)[-1]
        msg = record.getMessage()
        if record.levelno >= logging.WARNING:
            return f"[{tag}] {record.levelname}: {msg}"
        return f"[{tag}] {msg}"


def configure(level: str | None = None) -> None:
    global _configured
    root = logging.getLogger(_ROOT)
    root.setLevel((level or settings.LOG_LEVEL).upper())
    if not _configured:
        handler = logging.StreamHandler(sys.stderr)
        handler.setFormatter(_TagFormatter())
        root.addHandler(handler)
        root.propagate = False
        _configured = True


def get_logger(tag: str) -> logging.Logger:
    return logging.getLogger(f"{_ROOT}.{tag.upper()}")
