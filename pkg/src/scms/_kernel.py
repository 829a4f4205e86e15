"""Select the scalar-multiplication backend at import time.

The compiled extension is used when it was built; otherwise, or when
``SCMS_PURE_PYTHON=1`` is set, the pure-Python module is used.
"""

import os

from scms import _p256_py

if os.environ.get("SCMS_PURE_PYTHON", "") not in ("", "0"):
    _ext = None
else:
    try:
        from scms import _p256_ext as _ext
    except ImportError:
        _ext = None

if _ext is not None:
    mul, mul_base = _ext.mul, _ext.mul_base
    BACKEND = "compiled"
else:
    mul, mul_base = _p256_py.mul, _p256_py.mul_base
    BACKEND = "python"


def available_backends():
    """Map backend name to its module, for tests and benchmarks."""
    backends = {"python": _p256_py}
    try:
        from scms import _p256_ext
    except ImportError:
        pass
    else:
        backends["compiled"] = _p256_ext
    return backends
