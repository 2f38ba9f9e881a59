"""
Utility functions for the genescan backend.
Logging banners, model file discovery and formatting helpers.
"""

import json
import sys
import traceback
from datetime import datetime
from pathlib import Path
from typing import Any, Iterable, List, Optional, TextIO

from .config import LOG_LEVELS, get_config


MODEL_SUFFIXES = (".onnx", ".json")

_LEVEL_RANK = {level: rank for rank, level in enumerate(LOG_LEVELS)}
_log_level: Optional[str] = None


# ==================== LOGGING FUNCTIONS ====================
# Banners go to stderr so reports on stdout stay machine-readable.

def set_log_level(level: str) -> None:
    """Set process-wide verbosity (debug, info, warning, error, quiet)"""
    global _log_level
    level = level.lower()
    if level not in _LEVEL_RANK:
        raise ValueError(f"Unknown log level '{level}', expected one of {', '.join(LOG_LEVELS)}")
    _log_level = level


def get_log_level() -> str:
    if _log_level is not None:
        return _log_level
    configured = get_config().log_level
    return configured if configured in _LEVEL_RANK else "info"


def _enabled(level: str) -> bool:
    current = get_log_level()
    if current == "quiet":
        return level == "error"
    return _LEVEL_RANK[level] >= _LEVEL_RANK[current]


def _banner(header: str, message: str, details: Optional[str] = None) -> None:
    timestamp = datetime.now().strftime("%Y-%m-%d %H:%M:%S")
    out = sys.stderr
    print(f"\n{'='*60}", file=out)
    print(f"{header} - {timestamp}", file=out)
    print(f"{'='*60}", file=out)
    print(f"Message: {message}", file=out)
    if details:
        print(f"Details: {details}", file=out)
    print(f"{'='*60}\n", file=out)


def log_error(error_type: str, error_message: str, details: Optional[str] = None,
              exception: Optional[BaseException] = None) -> None:
    """Error banner with red cross emoji; prints the traceback when an exception is given"""
    if not _enabled("error"):
        return
    timestamp = datetime.now().strftime("%Y-%m-%d %H:%M:%S")
    out = sys.stderr

    print(f"\n{'='*60}", file=out)
    print(f"❌ ERROR [{error_type}] - {timestamp}", file=out)
    print(f"{'='*60}", file=out)
    print(f"Message: {error_message}", file=out)

    if details:
        print(f"Details: {details}", file=out)

    if exception is not None:
        print(f"Exception Type: {type(exception).__name__}", file=out)
        print(f"Exception Message: {exception}", file=out)
        if exception.__traceback__ is not None and _enabled("debug"):
            print("\nFull Traceback:", file=out)
            traceback.print_exception(type(exception), exception, exception.__traceback__, file=out)

    print(f"{'='*60}\n", file=out)


def log_success(message: str, details: Optional[str] = None) -> None:
    """Success banner with green checkmark emoji"""
    if _enabled("info"):
        _banner("✅ SUCCESS", message, details)


def log_info(message: str, details: Optional[str] = None) -> None:
    """Info banner with blue info emoji"""
    if _enabled("info"):
        _banner("ℹ️  INFO", message, details)


def log_warning(message: str, details: Optional[str] = None) -> None:
    """Warning banner with yellow warning emoji"""
    if _enabled("warning"):
        _banner("⚠️  WARNING", message, details)


def log_debug(message: str, details: Optional[str] = None) -> None:
    if _enabled("debug"):
        _banner("🔧 DEBUG", message, details)


# ==================== FILE MANAGEMENT ====================

def collect_model_paths(paths: Iterable[str]) -> List[Path]:
    """Expand directories into their model files, keep explicit files as given.

    Order follows the arguments; files found in a directory are sorted.
    """
    collected: List[Path] = []
    for raw in paths:
        path = Path(raw)
        if path.is_dir():
            collected.extend(sorted(p for p in path.iterdir() if p.suffix.lower() in MODEL_SUFFIXES))
        else:
            collected.append(path)
    return collected


def missing_paths(paths: Iterable[Path]) -> List[Path]:
    return [path for path in paths if not path.is_file()]


def write_json_line(data: Any, stream: Optional[TextIO] = None) -> None:
    """One compact JSON document per line"""
    stream = stream or sys.stdout
    stream.write(json.dumps(data, ensure_ascii=False, separators=(",", ":")) + "\n")
    stream.flush()


# ==================== FORMATTING UTILITIES ====================

def format_duration(start_time: datetime, end_time: datetime) -> str:
    """Format duration between two datetime objects"""
    duration = end_time - start_time
    total_seconds = duration.total_seconds()

    if total_seconds < 1:
        return f"{int(total_seconds * 1000)}ms"
    total_seconds = int(total_seconds)
    if total_seconds < 60:
        return f"{total_seconds}s"
    elif total_seconds < 3600:
        minutes = total_seconds // 60
        seconds = total_seconds % 60
        return f"{minutes}m {seconds}s"
    else:
        hours = total_seconds // 3600
        minutes = (total_seconds % 3600) // 60
        return f"{hours}h {minutes}m"


# Export commonly used functions
__all__ = [
    'set_log_level',
    'get_log_level',
    'log_error',
    'log_success',
    'log_info',
    'log_warning',
    'log_debug',
    'collect_model_paths',
    'missing_paths',
    'write_json_line',
    'format_duration',
]
