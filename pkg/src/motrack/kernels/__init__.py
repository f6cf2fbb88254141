"""Hot-kernel backend selection.

Imports the compiled extension when available, otherwise falls back to the
numpy implementations. Set MOTRACK_PURE_PYTHON=1 to force the fallback.
"""

import os

from . import _fallback

if os.environ.get("MOTRACK_PURE_PYTHON", "") not in ("", "0"):
    _impl = _fallback
else:
    try:
        from . import _native as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = _fallback

BACKEND = _impl.BACKEND
iou_matrix = _impl.iou_matrix
min_eig_response = _impl.min_eig_response
lk_refine = _impl.lk_refine

__all__ = ["BACKEND", "iou_matrix", "min_eig_response", "lk_refine"]
