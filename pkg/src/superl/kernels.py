"""Kernel backend selection.

The compiled Cython kernels are used when the extension was built; otherwise
the numpy implementations are used. Setting ``SUPERL_PURE_PYTHON=1`` forces
the numpy path.
"""
import os

import numpy as np

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if os.environ.get("SUPERL_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _impl  # noqa: F811

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _kernels_py


def _prep(f):
    f = np.ascontiguousarray(f)
    if np.iscomplexobj(f):
        return f.astype(np.complex128, copy=False)
    return f.astype(np.float64, copy=False)


def laplacian5(f, h):
    return _impl.laplacian5(_prep(f), float(h))


def gradient(f, h):
    return _impl.gradient(_prep(f), float(h))


def dirac(psi, g1, g2, h):
    psi = np.ascontiguousarray(psi, dtype=np.complex128)
    return _impl.dirac(psi, np.asarray(g1, dtype=complex), np.asarray(g2, dtype=complex), float(h))


def bilinear(f, x0, y0, h, xs, ys):
    return _impl.bilinear(_prep(f), float(x0), float(y0), float(h), xs, ys)


def use_backend(name):
    """Switch backend at runtime (used by tests and the benchmark)."""
    global _impl, BACKEND
    if name == "python":
        _impl = _kernels_py
    elif name == "cython":
        from . import _ckernels

        _impl = _ckernels
    else:
        raise ValueError(f"unknown backend {name!r}")
    BACKEND = name
