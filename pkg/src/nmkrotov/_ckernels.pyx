# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled propagation kernels; same contracts as ``_pykernels``."""
import numpy as np
cimport numpy as cnp
from scipy.linalg.cython_blas cimport zgemm

cnp.import_array()


cdef void _mm(const double complex[:, ::1] a, const double complex[:, ::1] b,
              double complex[:, ::1] c, double complex beta=0) noexcept nogil:
    # c = a @ b + beta * c for square C-ordered matrices (row-major via swapped operands)
    cdef int n = a.shape[0]
    cdef char tr = b'N'
    cdef double complex one = 1.0
    zgemm(&tr, &tr, &n, &n, &n, &one, <double complex *> &b[0, 0], &n,
          <double complex *> &a[0, 0], &n, &beta, &c[0, 0], &n)


cdef void _taylor4(const double complex[:, ::1] drift, const double complex[::1] dvec, double e,
                   double dt, double complex[:, ::1] x, double complex[:, ::1] s,
                   double complex[:, ::1] tmp, double complex[:, ::1] out) noexcept nogil:
    cdef Py_ssize_t n = drift.shape[0], i, j
    cdef double k
    for i in range(n):
        for j in range(n):
            x[i, j] = dt * drift[i, j]
            s[i, j] = x[i, j] * 0.25
        x[i, i] = x[i, i] + dt * e * dvec[i]
        s[i, i] = 1.0 + x[i, i] * 0.25
    for k in (3.0, 2.0):
        _mm(x, s, tmp)
        for i in range(n):
            for j in range(n):
                s[i, j] = tmp[i, j] / k
            s[i, i] = s[i, i] + 1.0
    _mm(x, s, out)
    for i in range(n):
        out[i, i] = out[i, i] + 1.0


def step_matrices(drift, dvec, eps, double dt):
    cdef const double complex[:, ::1] d = np.ascontiguousarray(drift, dtype=complex)
    cdef const double complex[::1] dv = np.ascontiguousarray(dvec, dtype=complex)
    cdef const double[::1] ev = np.ascontiguousarray(eps, dtype=float)
    cdef Py_ssize_t n = ev.shape[0], dim = d.shape[0], i
    out = np.empty((n, dim, dim), dtype=complex)
    cdef double complex[:, :, ::1] o = out
    cdef double complex[:, ::1] x = np.empty((dim, dim), dtype=complex)
    cdef double complex[:, ::1] s = np.empty((dim, dim), dtype=complex)
    cdef double complex[:, ::1] tmp = np.empty((dim, dim), dtype=complex)
    with nogil:
        for i in range(n):
            _taylor4(d, dv, ev[i], dt, x, s, tmp, o[i])
    return out


def chain_forward(steps, g0):
    cdef const double complex[:, :, ::1] st = np.ascontiguousarray(steps, dtype=complex)
    cdef Py_ssize_t n = st.shape[0], i
    out = np.empty((n + 1,) + np.shape(g0), dtype=complex)
    out[0] = g0
    cdef double complex[:, :, ::1] o = out
    with nogil:
        for i in range(n):
            _mm(st[i], o[i], o[i + 1])
    return out


def chain_backward(steps, terminal):
    cdef const double complex[:, :, ::1] st = np.ascontiguousarray(steps, dtype=complex)
    cdef Py_ssize_t n = st.shape[0], i
    out = np.empty((n + 1,) + np.shape(terminal), dtype=complex)
    out[n] = terminal
    cdef double complex[:, :, ::1] o = out
    with nogil:
        for i in range(n - 1, -1, -1):
            _mm(o[i + 1], st[i], o[i])
    return out


def forward(drift, dvec, eps, double dt, g0):
    return chain_forward(step_matrices(drift, dvec, eps, dt), g0)


def backward(drift, dvec, eps, double dt, terminal):
    return chain_backward(step_matrices(drift, dvec, eps, dt), terminal)


def krotov_sweep(drift, dvec, base, bs, double dt, double inv2lam, double amax):
    cdef const double complex[:, ::1] d = np.ascontiguousarray(drift, dtype=complex)
    cdef const double complex[::1] dv = np.ascontiguousarray(dvec, dtype=complex)
    cdef const double[::1] bv = np.ascontiguousarray(base, dtype=float)
    cdef const double complex[:, :, ::1] b = np.ascontiguousarray(bs, dtype=complex)
    cdef Py_ssize_t n = bv.shape[0], dim = d.shape[0], i, k, a
    eps_out = np.empty(n)
    steps_out = np.empty((n, dim, dim), dtype=complex)
    cdef double[::1] ev = eps_out
    cdef double complex[:, :, ::1] st = steps_out
    cdef double complex[:, ::1] g = np.eye(dim, dtype=complex)
    cdef double complex[:, ::1] gn = np.empty((dim, dim), dtype=complex)
    cdef double complex[:, ::1] x = np.empty((dim, dim), dtype=complex)
    cdef double complex[:, ::1] s = np.empty((dim, dim), dtype=complex)
    cdef double complex[:, ::1] tmp = np.empty((dim, dim), dtype=complex)
    cdef double complex acc, diag
    cdef double e
    cdef int clamped = 0
    with nogil:
        for i in range(n):
            acc = 0
            for k in range(dim):
                if dv[k] != 0:
                    diag = 0
                    for a in range(dim):
                        diag = diag + g[k, a] * b[i, a, k]
                    acc = acc + dv[k] * diag
            e = bv[i] + inv2lam * acc.real
            if e > amax:
                e = amax
                clamped += 1
            elif e < -amax:
                e = -amax
                clamped += 1
            ev[i] = e
            _taylor4(d, dv, e, dt, x, s, tmp, st[i])
            _mm(st[i], g, gn)
            g[:, :] = gn
    return eps_out, np.asarray(g).copy(), steps_out, clamped
