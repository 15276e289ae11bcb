"""Hot numerical kernels with a compiled core and a numpy fallback.

The compiled extension ``_ckernels`` is used when it was built; otherwise the
pure-numpy module ``_pykernels`` is selected.  Both produce identical bits.
Call :func:`set_backend` to force one.
"""
from __future__ import annotations

from contextlib import contextmanager

from . import _pykernels

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

__all__ = ["philox4x32", "uniform_pairs", "accumulate", "backend", "set_backend",
           "using_backend", "available_backends"]

_active = None


def available_backends():
    return ["cython", "python"] if _ckernels is not None else ["python"]


def set_backend(name: str):
    """Select ``"cython"`` or ``"python"`` for all subsequent kernel calls."""
    global _active
    if name == "cython":
        if _ckernels is None:
            raise ImportError("the compiled kernel extension is not built")
        _active = _ckernels
    elif name == "python":
        _active = _pykernels
    else:
        raise ValueError(f"unknown backend {name!r}")


def backend() -> str:
    return "cython" if _active is _ckernels and _ckernels is not None else "python"


@contextmanager
def using_backend(name: str):
    """Temporarily switch the kernel backend."""
    previous = backend()
    set_backend(name)
    try:
        yield
    finally:
        set_backend(previous)


def philox4x32(ctr, key, rounds=10):
    return _active.philox4x32(ctr, key, rounds)


def uniform_pairs(seed, ids, blocks):
    return _active.uniform_pairs(seed, ids, blocks)


def accumulate(index, weights, size):
    return _active.accumulate(index, weights, size)


set_backend("python" if _ckernels is None else "cython")
