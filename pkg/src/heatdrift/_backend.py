"""Kernel backend selection.

The compiled extension is used when importable. Setting the environment
variable ``HEATDRIFT_PURE_PYTHON=1`` forces the pure-Python kernels.
"""

import os

if os.environ.get("HEATDRIFT_PURE_PYTHON", "") not in ("", "0"):
    from heatdrift import _pykernels as kernels

    BACKEND = "python"
else:
    try:
        from heatdrift import _ckernels as kernels

        BACKEND = "cython"
    except ImportError:
        from heatdrift import _pykernels as kernels

        BACKEND = "python"

__all__ = ["BACKEND", "kernels"]
