"""Backend selection for the SVRG inner loop.

The compiled extension is used when it imports; set
``DANE_SIM_BACKEND=python`` to force the pure-Python fallback.
"""
import os

from . import _svrg_py

BACKEND = "python"
_impl = _svrg_py

if os.environ.get("DANE_SIM_BACKEND", "").lower() != "python":
    try:
        from . import _svrg_core as _impl  # noqa: F811
        BACKEND = "compiled"
    except ImportError:
        _impl = _svrg_py


def get_backend(name=None):
    """Kernel module by name ('compiled' or 'python'); default is active."""
    if name is None:
        return _impl
    if name == "python":
        return _svrg_py
    if name == "compiled":
        from . import _svrg_core
        return _svrg_core
    raise ValueError(f"unknown backend {name!r}")


def compiled_available():
    try:
        from . import _svrg_core  # noqa: F401
    except ImportError:
        return False
    return True
