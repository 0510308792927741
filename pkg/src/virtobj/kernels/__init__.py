"""Hot numeric kernels with a numba backend and a pure-numpy fallback.

The numba backend is used when numba imports cleanly, unless the environment
variable ``VIRTOBJ_DISABLE_NUMBA`` is set to a truthy value (``1``, ``true``,
``yes``). The flag is read once, at import time.
"""
import os

from . import _numpy as numpy_backend

_FLAG = os.environ.get("VIRTOBJ_DISABLE_NUMBA", "").strip().lower()

numba_backend = None
if _FLAG not in ("1", "true", "yes", "on"):
    try:
        from . import _numba as numba_backend
    except ImportError:  # pragma: no cover - numba missing
        numba_backend = None

backend = numba_backend if numba_backend is not None else numpy_backend
BACKEND_NAME = "numba" if numba_backend is not None else "numpy"

parity_inside = backend.parity_inside
surface_voxels = backend.surface_voxels
nearest4 = backend.nearest4
damped_sine_bank = backend.damped_sine_bank
raster_heights = backend.raster_heights
march_rays = backend.march_rays

__all__ = [
    "BACKEND_NAME",
    "backend",
    "numba_backend",
    "numpy_backend",
    "parity_inside",
    "surface_voxels",
    "nearest4",
    "damped_sine_bank",
    "raster_heights",
    "march_rays",
]
