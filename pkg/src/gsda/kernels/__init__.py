"""Hot-loop kernels with a compiled core and a pure-numpy fallback.

The compiled extension is preferred when importable; set
GSDA_PURE_PYTHON=1 to force the numpy implementations.  ``BACKEND``
records which one is active.
"""

import os

from . import _numpy

BACKEND = "numpy"
if os.environ.get("GSDA_PURE_PYTHON") != "1":
    try:
        from . import _native

        BACKEND = "native"
    except ImportError:
        pass

if BACKEND == "native":
    nearest_sqdist = _native.nearest_sqdist
    nearest_sqdist_batch = _native.nearest_sqdist_batch
    maxpool_forward = _native.maxpool_forward
    pool_backward_matmul = _native.pool_backward_matmul
else:
    nearest_sqdist = _numpy.nearest_sqdist
    nearest_sqdist_batch = _numpy.nearest_sqdist_batch
    maxpool_forward = _numpy.maxpool_forward
    pool_backward_matmul = _numpy.pool_backward_matmul

__all__ = [
    "BACKEND",
    "nearest_sqdist",
    "nearest_sqdist_batch",
    "maxpool_forward",
    "pool_backward_matmul",
]
