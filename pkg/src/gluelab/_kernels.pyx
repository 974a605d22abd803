# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled versions of the hot kernels; see ``_kernels_py`` for the reference."""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, pow

cnp.import_array()


cdef inline double ipow(double b, long e) nogil:
    # e >= 0, binary exponentiation
    cdef double r = 1.0
    while e:
        if e & 1:
            r *= b
        b *= b
        e >>= 1
    return r


cdef inline long as_int(double e):
    # exponent as a non-negative integer, or -1 when it is not one
    if e >= 0 and e <= 64 and e == <long>e:
        return <long>e
    return -1


def interp_tensor(const double[:, :, :, ::1] f,
                  const long[:, ::1] i0, const double[:, ::1] w0,
                  const long[:, ::1] i1, const double[:, ::1] w1,
                  const long[:, ::1] i2, const double[:, ::1] w2):
    cdef Py_ssize_t nc = f.shape[0]
    cdef Py_ssize_t m0 = i0.shape[0], m1 = i1.shape[0], m2 = i2.shape[0]
    out_arr = np.zeros((nc, m0, m1, m2), dtype=np.float64)
    cdef double[:, :, :, ::1] out = out_arr
    cdef Py_ssize_t c, a, b, d, ia, ib, id_
    cdef int s0, s1, s2
    cdef double wa, wb, wd, acc
    for c in range(nc):
        for a in range(m0):
            for b in range(m1):
                for d in range(m2):
                    acc = 0.0
                    for s0 in range(2):
                        wa = w0[a, s0]
                        if wa == 0.0:
                            continue
                        ia = i0[a, s0]
                        for s1 in range(2):
                            wb = w1[b, s1]
                            if wb == 0.0:
                                continue
                            ib = i1[b, s1]
                            for s2 in range(2):
                                wd = w2[d, s2]
                                if wd == 0.0:
                                    continue
                                acc += wa * wb * wd * f[c, ia, ib, i2[d, s2]]
                    out[c, a, b, d] = acc
    return out_arr


def weighted_lp_sum(const double[:, :, :, ::1] f, const double[::1] x, const double[::1] y, const double[::1] z,
                    double zeta, double p, double scale):
    cdef Py_ssize_t nc = f.shape[0], n0 = f.shape[1], n1 = f.shape[2], n2 = f.shape[3]
    cdef Py_ssize_t c, i, j, k
    cdef double acc = 0.0, mag, w, hz = 0.5 * zeta, inv = 1.0 / scale
    cdef long ihz = as_int(hz), ip = as_int(p)
    for i in range(n0):
        for j in range(n1):
            for k in range(n2):
                mag = 0.0
                for c in range(nc):
                    mag += f[c, i, j, k] * f[c, i, j, k]
                if mag == 0.0:
                    continue
                w = 1.0 + x[i] * x[i] + y[j] * y[j] + z[k] * z[k]
                w = ipow(w, ihz) if ihz >= 0 else pow(w, hz)
                w = w * sqrt(mag) * inv
                acc += ipow(w, ip) if ip >= 0 else pow(w, p)
    return acc


def weighted_max(const double[:, :, :, ::1] f, const double[::1] x, const double[::1] y, const double[::1] z, double zeta):
    cdef Py_ssize_t nc = f.shape[0], n0 = f.shape[1], n1 = f.shape[2], n2 = f.shape[3]
    cdef Py_ssize_t c, i, j, k
    cdef double best = 0.0, v, b
    cdef long iz = as_int(zeta)
    # squared comparison: <xi>^(2 zeta) |f|^2, one root at the end
    for i in range(n0):
        for j in range(n1):
            for k in range(n2):
                v = 0.0
                for c in range(nc):
                    v += f[c, i, j, k] * f[c, i, j, k]
                if v == 0.0:
                    continue
                b = 1.0 + x[i] * x[i] + y[j] * y[j] + z[k] * z[k]
                v *= ipow(b, iz) if iz >= 0 else pow(b, zeta)
                if v > best:
                    best = v
    return sqrt(best)


def outer_product(const double[:, :, :, ::1] u, const double[:, :, :, ::1] v):
    cdef Py_ssize_t n0 = u.shape[1], n1 = u.shape[2], n2 = u.shape[3]
    out_arr = np.empty((3, 3, n0, n1, n2), dtype=np.float64)
    cdef double[:, :, :, :, ::1] out = out_arr
    cdef Py_ssize_t a, b, i, j, k
    for a in range(3):
        for b in range(3):
            for i in range(n0):
                for j in range(n1):
                    for k in range(n2):
                        out[a, b, i, j, k] = u[a, i, j, k] * v[b, i, j, k]
    return out_arr
