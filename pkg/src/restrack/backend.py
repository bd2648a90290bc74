"""Simulation kernel backend selection.

The compiled extension (``restrack._core``) is preferred; the numpy twin
(``restrack._core_py``) is used when the extension is unavailable. Set
``RESTRACK_BACKEND=python`` or ``RESTRACK_BACKEND=compiled`` to force one
(the benchmark and the cross-checking tests do this).
"""

import importlib
import os

from . import _core_py

_FORCED = os.environ.get("RESTRACK_BACKEND", "").strip().lower()


def _load():
    if _FORCED == "python":
        return _core_py
    try:
        compiled = importlib.import_module("restrack._core")
    except ImportError:
        if _FORCED == "compiled":
            raise ImportError(
                "RESTRACK_BACKEND=compiled but restrack._core is not built; "
                "run `python setup.py build_ext --inplace`"
            )
        return _core_py
    return compiled


core = _load()
BACKEND = core.BACKEND_NAME


def get_backend(name=None):
    """Return a kernel module by name ('compiled', 'python' or None=default)."""
    if name is None:
        return core
    if name == "python":
        return _core_py
    if name == "compiled":
        return importlib.import_module("restrack._core")
    raise ValueError(f"unknown backend {name!r}")


def available_backends():
    names = ["python"]
    try:
        importlib.import_module("restrack._core")
        names.insert(0, "compiled")
    except ImportError:
        pass
    return names
