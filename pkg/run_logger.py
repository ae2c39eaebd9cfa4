"""
Run logging for the experiment harness.

This module sets up the standard Python logging used by every module and
provides a structured event log for experiment runs (start, finish, failed
repeats, prune stages, exported files) plus a decorator that records the
duration and outcome of a long operation.
"""

import json
import logging
import time
import uuid
from functools import wraps

import numpy as np

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'

# Structured events go to their own logger so they can be filtered or routed
logger = logging.getLogger('runs')


def configure_logging(level="INFO", log_file=None):
    """Install a console handler and, optionally, a file handler on the root logger.

    Args:
        level: Level name or number
        log_file: Path of a log file to append to, or None for console only
    """
    handlers = [logging.StreamHandler()]
    if log_file:
        handlers.append(logging.FileHandler(log_file, mode='a'))
    if isinstance(level, str):
        resolved = logging.getLevelName(level.upper())
        if not isinstance(resolved, int):
            raise ValueError(f"Unknown log level {level!r}")
        level = resolved
    logging.basicConfig(level=level, format=LOG_FORMAT, handlers=handlers, force=True)


def _jsonable(value):
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    return str(value)


class RunLogger:
    """Writes structured run events as `RUN: {json}` lines."""

    @staticmethod
    def log_event(event, details=None, level=logging.INFO):
        """Log one run event.

        Args:
            event: Event name, e.g. "experiment_started"
            details: Dict of event fields
            level: Logging level of the record

        Returns:
            dict: The logged payload
        """
        payload = {'event': event}
        payload.update(details or {})
        logger.log(level, f"RUN: {json.dumps(payload, sort_keys=True, default=_jsonable)}")
        return payload

    @classmethod
    def log_repeat_failure(cls, model, repeat, reason):
        return cls.log_event('repeat_failed', {'model': model, 'repeat': repeat, 'reason': reason},
                             level=logging.WARNING)

    @classmethod
    def log_export(cls, kind, path, rows):
        return cls.log_event('export_written', {'kind': kind, 'path': str(path), 'rows': rows})


def logged_operation(action):
    """Decorator logging start, completion and failure of an operation.

    Each call gets an operation id; the duration is logged on completion or
    failure and exceptions are re-raised.

    Args:
        action: Name recorded in the events
    """
    def decorator(func):
        @wraps(func)
        def wrapper(*args, **kwargs):
            operation_id = str(uuid.uuid4())
            start = time.perf_counter()
            RunLogger.log_event(f"{action}_started", {'operation': operation_id, 'function': func.__name__})
            try:
                result = func(*args, **kwargs)
            except Exception as e:
                duration = time.perf_counter() - start
                RunLogger.log_event(f"{action}_error", {
                    'operation': operation_id, 'duration_s': round(duration, 6), 'error': str(e),
                }, level=logging.ERROR)
                raise
            duration = time.perf_counter() - start
            RunLogger.log_event(action, {'operation': operation_id, 'duration_s': round(duration, 6)})
            return result
        return wrapper
    return decorator
