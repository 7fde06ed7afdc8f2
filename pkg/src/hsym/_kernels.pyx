# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled integration kernel: Sabra stencil and the IF-RK4 step loop.

Mirrors hsym._kernels_py; the python wrapper in hsym.integrate precomputes the
wavenumber and integrating-factor arrays so both backends see identical inputs.
"""

import numpy as np

cimport numpy as cnp

NAME = "compiled"

ctypedef double complex dc


cdef inline void _rhs(const dc* u, const double* k, const dc* f, dc* out, Py_ssize_t n) noexcept nogil:
    # B_n = i k_n (2 u_{n+2} u*_{n+1} - u_{n+1} u*_{n-1} / 2 + u_{n-1} u_{n-2} / 4),
    # zero outside [0, n); forcing added in the same pass.
    cdef Py_ssize_t i
    cdef dc up2, up1, um1, um2, J = 1j
    for i in range(n):
        up2 = u[i + 2] if i + 2 < n else 0
        up1 = u[i + 1] if i + 1 < n else 0
        um1 = u[i - 1] if i >= 1 else 0
        um2 = u[i - 2] if i >= 2 else 0
        out[i] = J * k[i] * (2.0 * up2 * up1.conjugate()
                             - 0.5 * up1 * um1.conjugate()
                             + 0.25 * um1 * um2) + f[i]


def nonlinear(u, k):
    """Sabra interaction term with zero-padded boundaries."""
    cdef cnp.ndarray[dc, ndim=1] uu = np.ascontiguousarray(u, dtype=np.complex128)
    cdef cnp.ndarray[double, ndim=1] kk = np.ascontiguousarray(k, dtype=np.float64)
    cdef cnp.ndarray[dc, ndim=1] ff = np.zeros(uu.shape[0], dtype=np.complex128)
    cdef cnp.ndarray[dc, ndim=1] out = np.empty(uu.shape[0], dtype=np.complex128)
    if kk.shape[0] != uu.shape[0]:
        raise ValueError("u and k must have equal length")
    _rhs(&uu[0], &kk[0], &ff[0], &out[0], uu.shape[0])
    return out


cdef long _loop(dc* uu, const double* kk, const dc* ff, const double* eh, const double* ef,
                double dt, long n_steps, long record_stride, long first_record,
                dc* rec, long n_rec, double blowup,
                dc* k1, dc* k2, dc* k3, dc* k4, dc* stage, dc* prev,
                Py_ssize_t n) noexcept nogil:
    cdef double half = 0.5 * dt
    cdef double sixth = dt / 6.0
    cdef double b2 = blowup * blowup
    cdef double m, re, im
    cdef long s, r = 0
    cdef Py_ssize_t i
    cdef dc un

    for i in range(n):
        prev[i] = uu[i]
    for s in range(1, n_steps + 1):
        _rhs(uu, kk, ff, k1, n)
        for i in range(n):
            stage[i] = eh[i] * (uu[i] + half * k1[i])
        _rhs(stage, kk, ff, k2, n)
        for i in range(n):
            stage[i] = eh[i] * uu[i] + half * k2[i]
        _rhs(stage, kk, ff, k3, n)
        for i in range(n):
            stage[i] = ef[i] * uu[i] + dt * (eh[i] * k3[i])
        _rhs(stage, kk, ff, k4, n)
        m = 0.0
        for i in range(n):
            un = ef[i] * uu[i] + sixth * (ef[i] * k1[i] + (2.0 * eh[i]) * (k2[i] + k3[i]) + k4[i])
            stage[i] = un
            re = un.real
            im = un.imag
            if re * re + im * im > m:
                m = re * re + im * im
        if not (m <= b2):  # also catches NaN
            for i in range(n):
                uu[i] = prev[i]
            return s
        for i in range(n):
            uu[i] = stage[i]
            prev[i] = stage[i]
        if r < n_rec and s == first_record + r * record_stride:
            for i in range(n):
                rec[r * n + i] = stage[i]
            r += 1
    return 0


def advance(dc[::1] u, double[::1] k, dc[::1] forcing,
            double[::1] e_half, double[::1] e_full,
            double dt, long n_steps, long record_stride, long first_record,
            dc[:, ::1] out, double blowup):
    """Same contract as hsym._kernels_py.advance."""
    cdef Py_ssize_t n = u.shape[0]
    cdef long n_rec = out.shape[0]
    cdef long rc
    if k.shape[0] != n or forcing.shape[0] != n or e_half.shape[0] != n or e_full.shape[0] != n:
        raise ValueError("array lengths disagree")
    if n_rec > 0 and out.shape[1] != n:
        raise ValueError("record buffer width disagrees with state length")

    buf = np.empty((6, n), dtype=np.complex128)
    cdef dc[:, ::1] w = buf
    cdef dc* rec = NULL
    if n_rec > 0:
        rec = &out[0, 0]

    with nogil:
        rc = _loop(&u[0], &k[0], &forcing[0], &e_half[0], &e_full[0],
                   dt, n_steps, record_stride, first_record,
                   rec, n_rec, blowup,
                   &w[0, 0], &w[1, 0], &w[2, 0], &w[3, 0], &w[4, 0], &w[5, 0], n)
    return rc
