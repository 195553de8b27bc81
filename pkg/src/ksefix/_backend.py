"""Select the stepper kernel implementation at import time.

The Cython extension is preferred; the numpy module is the fallback.
Set KSEFIX_PURE_PYTHON=1 to force the fallback (used by the benchmark and
by the backend-equivalence tests).
"""

import os

if os.environ.get("KSEFIX_PURE_PYTHON"):
    from . import _kernels_py as kernels

    BACKEND = "python"
else:
    try:
        from . import _kernels as kernels  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        from . import _kernels_py as kernels  # type: ignore[no-redef]

        BACKEND = "python"
