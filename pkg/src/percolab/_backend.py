"""Kernel backend selection.

The compiled extension is preferred; ``PERCOLAB_BACKEND=python`` forces the
numpy fallback, and a missing extension falls back silently.
"""
import os

if os.environ.get("PERCOLAB_BACKEND", "").lower() == "python":
    from . import _pykernels as kernels
else:
    try:
        from . import _kernels as kernels
    except ImportError:  # extension not built
        from . import _pykernels as kernels

BACKEND = kernels.NAME
