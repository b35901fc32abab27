"""Kernel backend selection.

The compiled extension is used when it imported cleanly; otherwise the numpy
fallback takes over.  Set ``CRBC_PURE_PYTHON=1`` to force the fallback (used
by the equivalence tests and the benchmark).
"""

import os

_force_pure = os.environ.get("CRBC_PURE_PYTHON", "") not in ("", "0")

if _force_pure:
    from . import _kernels_py as _impl
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]
        BACKEND = "compiled"
    except ImportError:
        from . import _kernels_py as _impl
        BACKEND = "python"

csr_matvec = _impl.csr_matvec
tri_abs_integral = _impl.tri_abs_integral
