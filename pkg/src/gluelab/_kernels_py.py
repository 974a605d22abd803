"""Pure numpy implementations of the hot kernels.

Signatures mirror the compiled module ``gluelab._kernels`` exactly so the two
are interchangeable.
"""
import numpy as np


def interp_tensor(f, i0, w0, i1, w1, i2, w2):
    """Trilinear interpolation of ``f[c, :, :, :]`` onto a tensor-product target grid.

    For axis ``a`` the target index ``m`` reads source points ``ia[m]`` and
    ``ia[m] + 1`` (already wrapped, shape ``(M, 2)``) with weights ``wa[m]``
    (shape ``(M, 2)``).  Zero weights encode points outside the source box.
    """
    f = np.asarray(f, dtype=np.float64)
    # contract one axis at a time; each step is a 2-tap gather
    g = f[:, i0[:, 0]] * w0[None, :, 0, None, None] + f[:, i0[:, 1]] * w0[None, :, 1, None, None]
    g = g[:, :, i1[:, 0]] * w1[None, None, :, 0, None] + g[:, :, i1[:, 1]] * w1[None, None, :, 1, None]
    g = g[:, :, :, i2[:, 0]] * w2[None, None, None, :, 0] + g[:, :, :, i2[:, 1]] * w2[None, None, None, :, 1]
    return np.ascontiguousarray(g)


def _bracket2(x, y, z):
    return 1.0 + x[:, None, None] ** 2 + y[None, :, None] ** 2 + z[None, None, :] ** 2


def weighted_lp_sum(f, x, y, z, zeta, p, scale):
    """Sum over grid points of ``(<xi>^zeta |f| / scale)^p`` for a vector field ``f``."""
    mag = np.sqrt(np.einsum("c...,c...->...", f, f))
    w = _bracket2(x, y, z) ** (0.5 * zeta)
    v = w * mag / scale
    return float(np.sum(v ** p))


def weighted_max(f, x, y, z, zeta):
    """Grid maximum of ``<xi>^zeta |f|``."""
    mag = np.sqrt(np.einsum("c...,c...->...", f, f))
    return float(np.max(_bracket2(x, y, z) ** (0.5 * zeta) * mag))


def outer_product(u, v):
    """Tensor ``T[i, j] = u[i] * v[j]`` for vector fields of shape ``(3, n, n, n)``."""
    return np.einsum("i...,j...->ij...", u, v)
