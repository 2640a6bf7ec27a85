"""Pure-numpy stencil kernels.

Reference implementation of the hot loops. ``superl._ckernels`` provides the
same functions compiled with Cython; :mod:`superl.kernels` picks one at import.
Arrays are indexed ``[iy, ix]`` (axis 0 is the second coordinate).
"""
import numpy as np


def laplacian5(f, h):
    out = np.zeros_like(f)
    out[1:-1, 1:-1] = (
        f[1:-1, 2:] + f[1:-1, :-2] + f[2:, 1:-1] + f[:-2, 1:-1] - 4.0 * f[1:-1, 1:-1]
    ) / (h * h)
    return out


def gradient(f, h):
    """Centered differences inside, second-order one-sided on the array edges.

    Returns ``(df/dx1, df/dx2)``.
    """
    dy, dx = np.gradient(f, h, edge_order=2)
    return dx, dy


def dirac(psi, g1, g2, h):
    """Apply ``g1 d/dx1 + g2 d/dx2`` to a spinor array of shape (2, ny, nx)."""
    dx0, dy0 = gradient(psi[0], h)
    dx1, dy1 = gradient(psi[1], h)
    out = np.empty_like(psi)
    out[0] = g1[0, 0] * dx0 + g1[0, 1] * dx1 + g2[0, 0] * dy0 + g2[0, 1] * dy1
    out[1] = g1[1, 0] * dx0 + g1[1, 1] * dx1 + g2[1, 0] * dy0 + g2[1, 1] * dy1
    return out


def bilinear(f, x0, y0, h, xs, ys):
    """Bilinear interpolation of node values ``f`` at points (xs, ys).

    Nodes sit at ``(x0 + j*h, y0 + i*h)``. Points are assumed inside the node box.
    """
    ny, nx = f.shape
    fx = (np.asarray(xs, dtype=float) - x0) / h
    fy = (np.asarray(ys, dtype=float) - y0) / h
    j = np.clip(np.floor(fx).astype(np.intp), 0, nx - 2)
    i = np.clip(np.floor(fy).astype(np.intp), 0, ny - 2)
    tx = fx - j
    ty = fy - i
    return (
        (1 - tx) * (1 - ty) * f[i, j]
        + tx * (1 - ty) * f[i, j + 1]
        + (1 - tx) * ty * f[i + 1, j]
        + tx * ty * f[i + 1, j + 1]
    )
