"""Hot-loop kernels with a compiled core and a numpy fallback.

The compiled extension is preferred when it was built; set
``SCA_FORCE_FALLBACK=1`` to use the numpy versions regardless (the
benchmark and the parity tests do this).
"""

from __future__ import annotations

import os

from . import _fallback

if os.environ.get("SCA_FORCE_FALLBACK"):
    _impl = _fallback
else:
    try:
        from . import _core as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = _fallback

BACKEND = "cython" if _impl.IS_COMPILED else "numpy"

prim_mst = _impl.prim_mst
union_find_linkage = _impl.union_find_linkage
layout_epoch = _impl.layout_epoch

__all__ = ["BACKEND", "prim_mst", "union_find_linkage", "layout_epoch"]
