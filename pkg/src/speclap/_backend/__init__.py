"""Backend selection for the heat-kernel time integrals.

The compiled extension is used when it imports; otherwise the numpy
implementation is used.  Set ``SPECLAP_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _images_py

NAME = "python"
_impl = _images_py

if os.environ.get("SPECLAP_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _images as _impl  # type: ignore[no-redef]
        NAME = "cython"
    except ImportError:
        pass

time_integral = _impl.time_integral
heat_values = _impl.heat_values
image_count = _images_py.image_count
MODE_KERNEL = _images_py.MODE_KERNEL
MODE_NORMAL = _images_py.MODE_NORMAL
MODE_KILL = _images_py.MODE_KILL

__all__ = ["NAME", "time_integral", "heat_values", "image_count",
           "MODE_KERNEL", "MODE_NORMAL", "MODE_KILL"]
