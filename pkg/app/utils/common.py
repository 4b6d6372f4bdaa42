import logging
from typing import Optional

from app.config import settings

LOG_FORMAT = "%(asctime)s | %(levelname)s | %(name)s | %(message)s"

logger = logging.getLogger("app.utils.common")


def configure_logging(level: Optional[str] = None) -> None:
    """Configure root logging once for a process entry point (API app or CLI)."""
    resolved = (level or settings.LOG_LEVEL or "INFO").upper()
    logging.basicConfig(level=resolved, format=LOG_FORMAT, force=True)
    # matplotlib is chatty at DEBUG
    logging.getLogger("matplotlib").setLevel(logging.WARNING)
    logger.debug("Logging configured at level %s", resolved)


def format_float(value: float, decimals: int) -> str:
    """Fixed-point formatting that never emits a negative zero."""
    text = f"{value:.{decimals}f}"
    if text.startswith("-") and float(text) == 0.0:
        text = text[1:]
    return text


def format_sig(value: float, digits: int) -> str:
    """Significant-digit formatting used by the detections format."""
    text = f"{value:.{digits}g}"
    if text.startswith("-") and float(text) == 0.0:
        text = text[1:]
    return text


def quantize_sig(value: float, digits: int) -> float:
    """Round a float to what `format_sig` would write and a reader would parse back."""
    return float(format_sig(value, digits))
