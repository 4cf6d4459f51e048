"""Kernel backend selection.

The compiled extension is used when it imports; setting the environment
variable ``HDLSE_PURE_PYTHON=1`` forces the numpy fallback.
"""

import os

from . import _fallback

BACKEND = "python"
_impl = _fallback

if os.environ.get("HDLSE_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _impl  # noqa: F811

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _fallback

explicit_counts = _impl.explicit_counts
implicit_q = _impl.implicit_q
implicit_scores = _impl.implicit_scores
top_two = _impl.top_two

__all__ = ["BACKEND", "explicit_counts", "implicit_q", "implicit_scores", "top_two"]
