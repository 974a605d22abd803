"""Kernel dispatch: the compiled extension when importable, numpy otherwise.

Set ``GLUELAB_PURE=1`` to force the numpy path.
"""
import os

import numpy as np

from . import _kernels_py

_impl = _kernels_py
BACKEND = "numpy"
if os.environ.get("GLUELAB_PURE", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled  # type: ignore[attr-defined]
    except ImportError:  # extension not built
        _compiled = None
    if _compiled is not None:
        _impl = _compiled
        BACKEND = "cython"


def _c(a, dtype=np.float64):
    return np.ascontiguousarray(a, dtype=dtype)


def interp_tensor(f, axes):
    """``axes`` is three ``(idx, weights)`` pairs as built by ``fields_and_transforms``."""
    (i0, w0), (i1, w1), (i2, w2) = axes
    f = np.asarray(f)
    lead = f.shape[:-3]
    out = _impl.interp_tensor(_c(f.reshape((-1,) + f.shape[-3:])), _c(i0, np.int64), _c(w0),
                              _c(i1, np.int64), _c(w1), _c(i2, np.int64), _c(w2))
    return out.reshape(lead + out.shape[1:])


def _flat(f):
    f = np.asarray(f)
    return f.reshape((-1,) + f.shape[-3:])


def weighted_lp_sum(f, x, y, z, zeta, p, scale=1.0):
    f = _flat(f)
    return _impl.weighted_lp_sum(_c(f), _c(x), _c(y), _c(z), float(zeta), float(p), float(scale))


def weighted_max(f, x, y, z, zeta):
    f = _flat(f)
    return _impl.weighted_max(_c(f), _c(x), _c(y), _c(z), float(zeta))


def outer_product(u, v):
    return _impl.outer_product(_c(u), _c(v))
