"""Select the LazySP kernel at import: compiled if available, else pure Python.

Set ``LAZYLAB_PURE=1`` to force the pure-Python kernel.
"""

import os

from . import _pyengine

PyKernel = _pyengine.Kernel

if os.environ.get("LAZYLAB_PURE", "") not in ("", "0"):
    Kernel = PyKernel
    BACKEND = "python"
else:
    try:
        from ._ckernel import Kernel
        BACKEND = "cython"
    except ImportError:  # extension not built
        Kernel = PyKernel
        BACKEND = "python"
