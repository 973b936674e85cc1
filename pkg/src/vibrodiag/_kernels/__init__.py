"""Kernel backend selection.

The compiled Cython kernel is preferred; the numpy reference implementation
is used when the extension is unavailable or VIBRODIAG_NO_EXT is set. Both
produce identical results up to float64 summation order.
"""

import os

if os.environ.get("VIBRODIAG_NO_EXT"):
    from vibrodiag._kernels.numpy_ref import polyphase_apply

    BACKEND = "numpy"
else:
    try:
        from vibrodiag._kernels._polyphase import polyphase_apply

        BACKEND = "cython"
    except ImportError:
        from vibrodiag._kernels.numpy_ref import polyphase_apply

        BACKEND = "numpy"

__all__ = ["polyphase_apply", "BACKEND"]
