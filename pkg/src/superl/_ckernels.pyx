# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled stencil kernels; same contracts as ``superl._kernels_py``."""
import numpy as np

from libc.math cimport floor

ctypedef fused scalar_t:
    double
    double complex


def laplacian5(scalar_t[:, ::1] f, double h):
    cdef Py_ssize_t ny = f.shape[0], nx = f.shape[1], i, j
    if scalar_t is double:
        out = np.zeros((ny, nx), dtype=np.float64)
    else:
        out = np.zeros((ny, nx), dtype=np.complex128)
    cdef scalar_t[:, ::1] o = out
    cdef double inv = 1.0 / (h * h)
    for i in range(1, ny - 1):
        for j in range(1, nx - 1):
            o[i, j] = (f[i, j + 1] + f[i, j - 1] + f[i + 1, j] + f[i - 1, j]
                       - 4.0 * f[i, j]) * inv
    return out


cdef inline void _grad_at(scalar_t[:, ::1] f, Py_ssize_t i, Py_ssize_t j,
                          Py_ssize_t ny, Py_ssize_t nx, double inv2h,
                          scalar_t* gx, scalar_t* gy) noexcept nogil:
    if j == 0:
        gx[0] = (-3.0 * f[i, 0] + 4.0 * f[i, 1] - f[i, 2]) * inv2h
    elif j == nx - 1:
        gx[0] = (3.0 * f[i, nx - 1] - 4.0 * f[i, nx - 2] + f[i, nx - 3]) * inv2h
    else:
        gx[0] = (f[i, j + 1] - f[i, j - 1]) * inv2h
    if i == 0:
        gy[0] = (-3.0 * f[0, j] + 4.0 * f[1, j] - f[2, j]) * inv2h
    elif i == ny - 1:
        gy[0] = (3.0 * f[ny - 1, j] - 4.0 * f[ny - 2, j] + f[ny - 3, j]) * inv2h
    else:
        gy[0] = (f[i + 1, j] - f[i - 1, j]) * inv2h


def gradient(scalar_t[:, ::1] f, double h):
    cdef Py_ssize_t ny = f.shape[0], nx = f.shape[1], i, j
    if scalar_t is double:
        dx = np.empty((ny, nx), dtype=np.float64)
        dy = np.empty((ny, nx), dtype=np.float64)
    else:
        dx = np.empty((ny, nx), dtype=np.complex128)
        dy = np.empty((ny, nx), dtype=np.complex128)
    cdef scalar_t[:, ::1] ox = dx
    cdef scalar_t[:, ::1] oy = dy
    cdef double inv2h = 0.5 / h
    cdef scalar_t gx, gy
    with nogil:
        for i in range(ny):
            for j in range(nx):
                _grad_at(f, i, j, ny, nx, inv2h, &gx, &gy)
                ox[i, j] = gx
                oy[i, j] = gy
    return dx, dy


def dirac(double complex[:, :, ::1] psi, g1, g2, double h):
    cdef Py_ssize_t ny = psi.shape[1], nx = psi.shape[2], i, j
    cdef double complex a00 = g1[0, 0], a01 = g1[0, 1], a10 = g1[1, 0], a11 = g1[1, 1]
    cdef double complex b00 = g2[0, 0], b01 = g2[0, 1], b10 = g2[1, 0], b11 = g2[1, 1]
    out = np.empty((2, ny, nx), dtype=np.complex128)
    cdef double complex[:, :, ::1] o = out
    cdef double complex[:, ::1] p0 = psi[0]
    cdef double complex[:, ::1] p1 = psi[1]
    cdef double inv2h = 0.5 / h
    cdef double complex dx0, dy0, dx1, dy1
    with nogil:
        for i in range(ny):
            for j in range(nx):
                _grad_at(p0, i, j, ny, nx, inv2h, &dx0, &dy0)
                _grad_at(p1, i, j, ny, nx, inv2h, &dx1, &dy1)
                o[0, i, j] = a00 * dx0 + a01 * dx1 + b00 * dy0 + b01 * dy1
                o[1, i, j] = a10 * dx0 + a11 * dx1 + b10 * dy0 + b11 * dy1
    return out


def bilinear(scalar_t[:, ::1] f, double x0, double y0, double h, xs, ys):
    cdef double[::1] px = np.ascontiguousarray(xs, dtype=np.float64).ravel()
    cdef double[::1] py = np.ascontiguousarray(ys, dtype=np.float64).ravel()
    cdef Py_ssize_t n = px.shape[0], k, i, j
    cdef Py_ssize_t ny = f.shape[0], nx = f.shape[1]
    if scalar_t is double:
        out = np.empty(n, dtype=np.float64)
    else:
        out = np.empty(n, dtype=np.complex128)
    cdef scalar_t[::1] o = out
    cdef double fx, fy, tx, ty
    with nogil:
        for k in range(n):
            fx = (px[k] - x0) / h
            fy = (py[k] - y0) / h
            j = <Py_ssize_t>floor(fx)
            i = <Py_ssize_t>floor(fy)
            if j < 0:
                j = 0
            elif j > nx - 2:
                j = nx - 2
            if i < 0:
                i = 0
            elif i > ny - 2:
                i = ny - 2
            tx = fx - j
            ty = fy - i
            o[k] = ((1 - tx) * (1 - ty) * f[i, j] + tx * (1 - ty) * f[i, j + 1]
                    + (1 - tx) * ty * f[i + 1, j] + tx * ty * f[i + 1, j + 1])
    return out.reshape(np.shape(xs))
