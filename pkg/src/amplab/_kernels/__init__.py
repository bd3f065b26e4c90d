"""Hot loops with a compiled implementation and a numpy fallback.

The compiled extension is used when importable; setting ``AMPLAB_PURE_PYTHON``
to a non-empty value other than ``0`` forces the fallback.
"""

import importlib
import os

from . import _cd_py


def _load_compiled():
    try:
        return importlib.import_module("amplab._kernels._cd")
    except ImportError:
        return None


_compiled = _load_compiled()
_forced = os.environ.get("AMPLAB_PURE_PYTHON", "") not in ("", "0")

if _compiled is not None and not _forced:
    cd_sweep = _compiled.cd_sweep
    BACKEND = "cython"
else:
    cd_sweep = _cd_py.cd_sweep
    BACKEND = "python"


def available_backends():
    return ["cython", "python"] if _compiled is not None else ["python"]


def get_cd_sweep(name):
    """Sweep function for a named backend ('cython' or 'python')."""
    if name == "python":
        return _cd_py.cd_sweep
    if name == "cython":
        if _compiled is None:
            raise ImportError("compiled kernel not built")
        return _compiled.cd_sweep
    raise ValueError(f"unknown backend {name!r}")
