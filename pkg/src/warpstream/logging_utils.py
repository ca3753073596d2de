from __future__ import annotations

import logging
from typing import Any, Dict

LOGGER_NAME = "warpstream"


def setup_logging(level: int = logging.INFO) -> logging.Logger:
    logger = logging.getLogger(LOGGER_NAME)
    logger.setLevel(level)
    if not logger.handlers:
        handler = logging.StreamHandler()
        formatter = logging.Formatter("%(asctime)s %(levelname)s %(message)s")
        handler.setFormatter(formatter)
        logger.addHandler(handler)
    else:
        for handler in logger.handlers:
            handler.setLevel(level)
    return logger


def format_fields(fields: Dict[str, Any]) -> str:
    parts = []
    for key, value in fields.items():
        if isinstance(value, float):
            value = f"{value:.6g}"
        parts.append(f"{key}={value}")
    return " ".join(parts)


def log_structured(
    logger: logging.Logger, message: str, extra_fields: Dict[str, Any], level: int = logging.INFO
) -> None:
    if extra_fields:
        logger.log(level, "%s %s", message, format_fields(extra_fields))
        return
    logger.log(level, message)
