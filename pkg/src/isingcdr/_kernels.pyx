# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled density-matrix kernels.

Every routine works in place on a C-contiguous complex128 square matrix,
except ``dm_apply_monomial`` which gathers into ``out``. Qubit positions are
bit positions of the basis-state index (bit 0 is the least significant).
"""

import numpy as np

cdef inline double complex _conj(double complex z) noexcept nogil:
    return z.real - 1j * z.imag


cdef inline Py_ssize_t _insert_zero(Py_ssize_t k, Py_ssize_t bit) noexcept nogil:
    # spread k over the indices whose ``bit`` is 0
    cdef Py_ssize_t low = k & ((1 << bit) - 1)
    return ((k >> bit) << (bit + 1)) | low


cdef inline void _right_1q(double complex *r, Py_ssize_t dim, Py_ssize_t m,
                           double complex c00, double complex c01,
                           double complex c10, double complex c11) noexcept nogil:
    # r <- r U^dagger on one row, pairing columns j and j + m
    cdef Py_ssize_t jb, k, j0
    cdef double complex b0, b1
    if m == 1:
        for j0 in range(0, dim, 2):
            b0 = r[j0]
            b1 = r[j0 + 1]
            r[j0] = b0 * c00 + b1 * c01
            r[j0 + 1] = b0 * c10 + b1 * c11
        return
    if m == 2:
        for j0 in range(0, dim, 4):
            b0 = r[j0]
            b1 = r[j0 + 2]
            r[j0] = b0 * c00 + b1 * c01
            r[j0 + 2] = b0 * c10 + b1 * c11
            b0 = r[j0 + 1]
            b1 = r[j0 + 3]
            r[j0 + 1] = b0 * c00 + b1 * c01
            r[j0 + 3] = b0 * c10 + b1 * c11
        return
    for jb in range(dim // (2 * m)):
        for k in range(2 * m * jb, 2 * m * jb + m):
            b0 = r[k]
            b1 = r[k + m]
            r[k] = b0 * c00 + b1 * c01
            r[k + m] = b0 * c10 + b1 * c11


def dm_apply_1q(double complex[:, ::1] rho, double complex[:, ::1] u, int bit):
    """rho <- U rho U^dagger with U acting on ``bit``.

    Each row pair is combined contiguously and then, still in cache, has
    its columns transformed.
    """
    cdef Py_ssize_t dim = rho.shape[0]
    cdef Py_ssize_t m = 1 << bit
    cdef Py_ssize_t nblk = dim // (2 * m)
    cdef Py_ssize_t ib, i0, j
    cdef double complex u00 = u[0, 0], u01 = u[0, 1], u10 = u[1, 0], u11 = u[1, 1]
    cdef double complex c00 = _conj(u00), c01 = _conj(u01), c10 = _conj(u10), c11 = _conj(u11)
    cdef double complex a, c
    cdef double complex *r0
    cdef double complex *r1
    with nogil:
        for ib in range(nblk):
            for i0 in range(2 * m * ib, 2 * m * ib + m):
                r0 = &rho[i0, 0]
                r1 = &rho[i0 + m, 0]
                for j in range(dim):
                    a = r0[j]
                    c = r1[j]
                    r0[j] = u00 * a + u01 * c
                    r1[j] = u10 * a + u11 * c
                _right_1q(r0, dim, m, c00, c01, c10, c11)
                _right_1q(r1, dim, m, c00, c01, c10, c11)
    return rho


def dm_apply_monomial(double complex[:, ::1] rho, Py_ssize_t[::1] src,
                      double complex[::1] phase, double complex[:, ::1] out):
    """out[i, j] = phase[i] * conj(phase[j]) * rho[src[i], src[j]]."""
    cdef Py_ssize_t dim = rho.shape[0]
    cdef Py_ssize_t i, j, si
    cdef double complex pi_
    with nogil:
        for i in range(dim):
            si = src[i]
            pi_ = phase[i]
            for j in range(dim):
                out[i, j] = pi_ * _conj(phase[j]) * rho[si, src[j]]
    return out


def dm_depolarize_1q(double complex[:, ::1] rho, int bit, double p):
    cdef Py_ssize_t dim = rho.shape[0]
    cdef Py_ssize_t half = dim >> 1
    cdef Py_ssize_t m = 1 << bit
    cdef Py_ssize_t ii, jj, i0, j0
    cdef double keep = 1.0 - p
    cdef double mix = 0.5 * p
    cdef double complex s
    with nogil:
        for ii in range(half):
            i0 = _insert_zero(ii, bit)
            for jj in range(half):
                j0 = _insert_zero(jj, bit)
                s = mix * (rho[i0, j0] + rho[i0 | m, j0 | m])
                rho[i0, j0] = keep * rho[i0, j0] + s
                rho[i0 | m, j0 | m] = keep * rho[i0 | m, j0 | m] + s
                rho[i0, j0 | m] = keep * rho[i0, j0 | m]
                rho[i0 | m, j0] = keep * rho[i0 | m, j0]
    return rho


def dm_depolarize_2q(double complex[:, ::1] rho, int bit_a, int bit_b, double p):
    cdef Py_ssize_t dim = rho.shape[0]
    cdef Py_ssize_t quarter = dim >> 2
    cdef int lo = bit_a if bit_a < bit_b else bit_b
    cdef int hi = bit_b if bit_a < bit_b else bit_a
    cdef Py_ssize_t offs[4]
    cdef Py_ssize_t ii, jj, i0, j0, x, y
    cdef double keep = 1.0 - p
    cdef double mix = 0.25 * p
    cdef double complex s
    offs[0] = 0
    offs[1] = 1 << lo
    offs[2] = 1 << hi
    offs[3] = offs[1] | offs[2]
    with nogil:
        for ii in range(quarter):
            i0 = _insert_zero(_insert_zero(ii, lo), hi)
            for jj in range(quarter):
                j0 = _insert_zero(_insert_zero(jj, lo), hi)
                s = 0
                for x in range(4):
                    s = s + rho[i0 | offs[x], j0 | offs[x]]
                s = mix * s
                for x in range(4):
                    for y in range(4):
                        rho[i0 | offs[x], j0 | offs[y]] = keep * rho[i0 | offs[x], j0 | offs[y]]
                    rho[i0 | offs[x], j0 | offs[x]] = rho[i0 | offs[x], j0 | offs[x]] + s
    return rho
