"""Backend selection for the hot kernels.

The compiled extension is used when it was built; otherwise the numpy
implementation is used.  Setting ``REROUTE_PURE_PYTHON=1`` forces the
fallback, which is how the test-suite exercises both backends.
"""

import os

from . import _pykernels

python_backend = _pykernels

if os.environ.get("REROUTE_PURE_PYTHON"):
    compiled_backend = None
else:
    try:
        from . import _ckernels as compiled_backend
    except ImportError:
        compiled_backend = None

_impl = compiled_backend if compiled_backend is not None else python_backend
BACKEND = "cython" if compiled_backend is not None else "python"

route_index = _impl.route_index
within_moments = _impl.within_moments
