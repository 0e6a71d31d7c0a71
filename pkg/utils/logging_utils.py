import inspect
import json
import logging
import sys

from core.config import LOG_LEVEL

logging.basicConfig(
    level=LOG_LEVEL,
    format="%(message)s",
    handlers=[logging.StreamHandler(sys.stdout)]
)
logger = logging.getLogger("chainsmr")


def _caller() -> str:
    frame = inspect.currentframe()
    # skip _caller itself and the log_* helper
    return frame.f_back.f_back.f_code.co_name if frame and frame.f_back and frame.f_back.f_back else "?"


def log_event(event, **kwargs):
    data = {
        "event": event,
        "service": "chainsmr",
        "level": "info",
        "handler": _caller(),
    }
    data.update(kwargs)
    logger.info(json.dumps(data, ensure_ascii=False, default=str))


def log_debug(event, **kwargs):
    if not logger.isEnabledFor(logging.DEBUG):
        return
    data = {
        "event": event,
        "service": "chainsmr",
        "level": "debug",
        "handler": _caller(),
    }
    data.update(kwargs)
    logger.debug(json.dumps(data, ensure_ascii=False, default=str))


def log_error(request_type, error, **kwargs):
    data = {
        "request_type": request_type,
        "service": "chainsmr",
        "level": "error",
        "handler": _caller(),
        'error': str(error),
        'error_type': type(error).__name__
    }
    data.update(kwargs)
    logger.error(json.dumps(data, ensure_ascii=False, default=str))
