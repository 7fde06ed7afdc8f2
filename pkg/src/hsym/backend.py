"""Integration-kernel selection.

The compiled Cython kernel is preferred; a numpy twin with the same call
signatures is used when the extension is missing.  Set HSYM_BACKEND=python
(or =compiled) to force a choice; forcing the compiled kernel raises if it
was not built.
"""

import os


def load_backend(name: str):
    """Return the kernel module for an explicit backend name."""
    if name in ("compiled", "c"):
        from hsym import _kernels

        return _kernels
    if name == "python":
        from hsym import _kernels_py

        return _kernels_py
    raise ValueError(f"unknown backend {name!r}; use 'compiled' or 'python'")


def _select():
    forced = os.environ.get("HSYM_BACKEND", "auto").lower()
    if forced == "auto":
        try:
            return load_backend("compiled")
        except ImportError:
            return load_backend("python")
    return load_backend(forced)


_impl = _select()

BACKEND = _impl.NAME
nonlinear = _impl.nonlinear
advance = _impl.advance
