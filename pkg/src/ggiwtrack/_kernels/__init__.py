"""Hot kernels of the event-weight loop, with compiled and numpy backends.

The compiled Cython extension is preferred when it was built; otherwise the
pure-numpy fallback is used.  Set ``GGIWTRACK_BACKEND=python`` (or
``native``) before import to force one side, e.g. for benchmarking.
"""

import os

_requested = os.environ.get("GGIWTRACK_BACKEND", "auto")
if _requested not in ("auto", "native", "python"):
    raise ValueError(f"GGIWTRACK_BACKEND must be auto, native or python, got {_requested!r}")

if _requested == "python":
    from ggiwtrack._kernels._fallback import assignment_loglik_sums, event_stats
    BACKEND = "python"
else:
    try:
        from ggiwtrack._kernels._native import assignment_loglik_sums, event_stats
        BACKEND = "native"
    except ImportError:
        if _requested == "native":
            raise
        from ggiwtrack._kernels._fallback import assignment_loglik_sums, event_stats
        BACKEND = "python"

__all__ = ["assignment_loglik_sums", "event_stats", "BACKEND"]
