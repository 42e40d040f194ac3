"""Backend selection for the batch rollout kernel.

The compiled Cython kernel is used when it imports; otherwise (or when the
environment variable ``DRIVEFIT_PURE_PYTHON`` is set to a non-empty value
other than ``0``) the numpy implementation is used. Both expose
``rollout_batch`` with identical semantics.
"""
import os

from . import _kernel_py

BACKEND = "python"
rollout_batch = _kernel_py.rollout_batch

if os.environ.get("DRIVEFIT_PURE_PYTHON", "0") in ("", "0"):
    try:
        from . import _kernel as _kernel_c
    except ImportError:  # extension not built
        _kernel_c = None
    else:
        BACKEND = "cython"
        rollout_batch = _kernel_c.rollout_batch
else:
    _kernel_c = None


def get_backend(name=None):
    """Return the ``rollout_batch`` callable for ``name`` (default: active one)."""
    if name is None:
        return rollout_batch
    if name == "python":
        return _kernel_py.rollout_batch
    if name == "cython":
        if _kernel_c is None:
            raise RuntimeError("compiled kernel is not available")
        return _kernel_c.rollout_batch
    raise ValueError(f"unknown backend {name!r}")


def available_backends():
    return ["python"] + (["cython"] if _kernel_c is not None else [])
