"""Backend selection for the hot numeric kernels.

The compiled extension is preferred when it imported cleanly; the numpy
fallback is used otherwise, or when ``CALIBKIT_PURE_PYTHON=1`` is set.  Both
backends are bitwise-equivalent (see _fallback.py), so the selection never
affects results, only speed.  ``BACKEND`` records which one is active.
"""

from __future__ import annotations

import os

if os.environ.get("CALIBKIT_PURE_PYTHON") == "1":
    from . import _fallback as _impl

    BACKEND = "python"
else:
    try:
        from . import _native as _impl  # type: ignore[attr-defined]

        BACKEND = "native"
    except ImportError:
        from . import _fallback as _impl

        BACKEND = "python"

sweep_counts = _impl.sweep_counts
bin_accumulate = _impl.bin_accumulate
natural_spline_basis = _impl.natural_spline_basis

__all__ = ["BACKEND", "sweep_counts", "bin_accumulate", "natural_spline_basis"]
