# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the sweep kernels in ``rfamp._fallback``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()


def mcr_stage_voltage(double k, double w0, double q, double rs, double cs,
                      double r2, double gm, omegas):
    cdef const double[::1] om = np.ascontiguousarray(omegas, dtype=np.float64)
    cdef Py_ssize_t n = om.shape[0], i
    out = np.empty(n, dtype=np.complex128)
    cdef double complex[::1] res = out
    cdef double complex s, s2, s3, s4, p, nn, y11, z21, zl, zs, i11
    cdef double k2 = 1.0 - k * k
    cdef double w02 = w0 * w0
    cdef double w03 = w02 * w0
    cdef double w04 = w03 * w0
    cdef double sq = sqrt(rs * r2)
    for i in range(n):
        s = 1j * om[i]
        s2 = s * s
        s3 = s2 * s
        s4 = s3 * s
        p = (k2 * q * q * s4 + 2 * k2 * q * w0 * s3 + (k2 + 2 * q * q) * w02 * s2
             + 2 * q * w03 * s + q * q * w04)
        nn = k2 * q * s2 + k2 * w0 * s + w02 * q
        y11 = p / (rs * w0 * s * nn)
        z21 = k * q * w03 * sq * s / p
        zl = 1.0 / y11
        zs = rs / (1.0 + s * rs * cs)
        i11 = gm * (zs + 50.0) / zs * zs / (zs + zl)
        res[i] = i11 * z21 / 2.0
    return out


def chain_backsolve(abcd):
    cdef const double complex[:, :, :, ::1] m = np.ascontiguousarray(abcd, dtype=np.complex128)
    cdef Py_ssize_t nb = m.shape[0], nf = m.shape[1], j, f
    out = np.empty((nb + 1, nf, 2), dtype=np.complex128)
    cdef double complex[:, :, ::1] st = out
    cdef double complex v, c
    for f in range(nf):
        st[nb, f, 0] = 1.0
        st[nb, f, 1] = 0.0
    for j in range(nb - 1, -1, -1):
        for f in range(nf):
            v = st[j + 1, f, 0]
            c = st[j + 1, f, 1]
            st[j, f, 0] = m[j, f, 0, 0] * v + m[j, f, 0, 1] * c
            st[j, f, 1] = m[j, f, 1, 0] * v + m[j, f, 1, 1] * c
    return out


def impedance_forward(abcd, z0):
    cdef const double complex[:, :, :, ::1] m = np.ascontiguousarray(abcd, dtype=np.complex128)
    cdef Py_ssize_t nb = m.shape[0], nf = m.shape[1], j, f
    out = np.empty(nf, dtype=np.complex128)
    cdef double complex[::1] z = out
    cdef double complex zz = z0
    for f in range(nf):
        z[f] = zz
    for j in range(nb):
        for f in range(nf):
            z[f] = (m[j, f, 1, 1] * z[f] + m[j, f, 0, 1]) / (m[j, f, 1, 0] * z[f] + m[j, f, 0, 0])
    return out
