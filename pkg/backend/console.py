"""
Console output helpers

Tagged status lines in the `[Tag] message` form used across the pipeline.
Lines go to stderr so CSV reports written to stdout stay clean.
"""

import os
import sys

_quiet = os.getenv("NOISEFILTER_QUIET", "").lower() in ("1", "true", "yes")


def set_quiet(quiet: bool):
    """Silence informational lines (warnings and errors still print)"""
    global _quiet
    _quiet = quiet


def is_quiet() -> bool:
    return _quiet


def safe_print(text: str):
    try:
        print(text, file=sys.stderr)
    except UnicodeEncodeError:
        print(text.encode('ascii', 'replace').decode('ascii'), file=sys.stderr)


def log(tag: str, message: str):
    if not _quiet:
        safe_print(f"[{tag}] {message}")


def warn(tag: str, message: str):
    safe_print(f"[{tag}] WARNING: {message}")


def error(tag: str, message: str):
    safe_print(f"[{tag}] ERROR: {message}")
