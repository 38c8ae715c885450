"""Process-level runtime knobs."""

from __future__ import annotations

import os


def thread_count() -> int:
    """Worker cap from TEXTON_THREADS; 0 or unset means one per CPU."""
    raw = os.environ.get("TEXTON_THREADS", "0")
    try:
        n = int(raw)
    except ValueError:
        n = 0
    if n <= 0:
        return os.cpu_count() or 1
    return n
