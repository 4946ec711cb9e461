"""Kernel backend selection.

Tries the compiled Cython core first and falls back to the numpy
implementation.  Set ``CDYN_KERNELS=python`` or ``CDYN_KERNELS=compiled`` to
force a backend (the latter raises if the extension is missing).  Both
backends implement the same algorithm; refinement traces are only available
from the python backend and are used for diagnostics and tests.
"""

from __future__ import annotations

import os

from . import fallback

_choice = os.environ.get("CDYN_KERNELS", "").strip().lower()

_compiled = None
if _choice != "python":
    try:
        from . import _core as _compiled  # type: ignore[attr-defined]
    except ImportError:
        _compiled = None
        if _choice == "compiled":
            raise ImportError(
                "CDYN_KERNELS=compiled but the cdyn._kernels._core extension "
                "is not built; run pip install -e . --no-build-isolation")

if _compiled is not None:
    BACKEND = "compiled"
    green_poly1d_batch = _compiled.green_poly1d_batch
    green_henon_batch = _compiled.green_henon_batch
    green_endo_batch = _compiled.green_endo_batch
else:
    BACKEND = "python"
    green_poly1d_batch = fallback.green_poly1d_batch
    green_henon_batch = fallback.green_henon_batch
    green_endo_batch = fallback.green_endo_batch

# trace-capable reference implementations (always the python path)
green_poly1d_batch_py = fallback.green_poly1d_batch
green_henon_batch_py = fallback.green_henon_batch
green_endo_batch_py = fallback.green_endo_batch

__all__ = [
    "BACKEND",
    "green_poly1d_batch",
    "green_henon_batch",
    "green_endo_batch",
    "green_poly1d_batch_py",
    "green_henon_batch_py",
    "green_endo_batch_py",
]
