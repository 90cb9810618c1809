"""Kernel backend selection.

The compiled extension is preferred when present; the numpy fallback is
used otherwise.  ``MFSCAN_BACKEND=python`` forces the fallback and
``MFSCAN_BACKEND=compiled`` makes a missing extension a hard error.
"""

import os

_requested = os.environ.get("MFSCAN_BACKEND", "").strip().lower()

if _requested == "python":
    from . import _kernels_py as _impl
elif _requested == "compiled":
    from . import _kernels as _impl
elif _requested in ("", "auto"):
    try:
        from . import _kernels as _impl
    except ImportError:
        from . import _kernels_py as _impl
else:
    raise ImportError(f"unknown MFSCAN_BACKEND value {_requested!r}")

BACKEND = "compiled" if _impl.COMPILED else "python"

lh_scan = _impl.lh_scan
hotelling_scan = _impl.hotelling_scan
wilcoxon_scan = _impl.wilcoxon_scan
npfss_scan = _impl.npfss_scan
sign_sums = _impl.sign_sums
rank_field = _impl.rank_field
