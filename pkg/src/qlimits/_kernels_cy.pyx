# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled backend for the grid-evaluation kernels.

Same contract as qlimits._kernels_py; loops are fused so no (T, N, J)
temporaries are materialized.
"""
import numpy as np

cimport numpy as cnp
from libc.math cimport cos, sin

cnp.import_array()


def diag_abs2(const cnp.complex128_t[:, ::1] S, const double[::1] lam, const double[::1] times):
    cdef Py_ssize_t T = times.shape[0]
    cdef Py_ssize_t D = lam.shape[0]
    cdef cnp.ndarray[double, ndim=2] out = np.empty((T, D))
    cdef double[:, ::1] ov = out
    cdef cnp.ndarray[double, ndim=2] p2a = np.ascontiguousarray(np.abs(np.asarray(S)) ** 2)
    cdef double[:, ::1] p2 = p2a
    cdef double[::1] cph = np.empty(D)
    cdef double[::1] sph = np.empty(D)
    cdef Py_ssize_t t, k, m
    cdef double x, ar, ai
    for t in range(T):
        for m in range(D):
            x = lam[m] * times[t]
            cph[m] = cos(x)
            sph[m] = sin(x)
        for k in range(D):
            ar = 0.0
            ai = 0.0
            for m in range(D):
                ar += p2[k, m] * cph[m]
                ai += p2[k, m] * sph[m]
            ov[t, k] = ar * ar + ai * ai
    return out


def cross_sums(const cnp.complex128_t[:, ::1] S, const double[::1] lam, const double[::1] times,
               const cnp.complex128_t[::1] c, const cnp.complex128_t[::1] d, const double[::1] E,
               Py_ssize_t j_lo, Py_ssize_t j_hi):
    cdef Py_ssize_t T = times.shape[0]
    cdef Py_ssize_t D = lam.shape[0]
    cdef Py_ssize_t N = c.shape[0]
    cdef cnp.ndarray[double, ndim=2] out = np.zeros((T, N))
    cdef double[:, ::1] ov = out
    if j_hi <= j_lo:
        return out
    cdef double[::1] cph = np.empty(D)
    cdef double[::1] sph = np.empty(D)
    cdef Py_ssize_t t, i, j, m
    cdef double x, wr, wi, sr, si, pr, pi, gr, gi, mr, acc
    cdef double complex sim, sjm, dj
    for t in range(T):
        for m in range(D):
            x = lam[m] * times[t]
            cph[m] = cos(x)
            sph[m] = sin(x)
        for i in range(N):
            acc = 0.0
            for j in range(j_lo, j_hi):
                wr = 0.0
                wi = 0.0
                for m in range(D):
                    sim = S[i, m]
                    sjm = S[j, m]
                    # s_im * e^{i lam_m t} * conj(s_jm)
                    pr = sim.real * sjm.real + sim.imag * sjm.imag
                    pi = sim.imag * sjm.real - sim.real * sjm.imag
                    wr += pr * cph[m] - pi * sph[m]
                    wi += pr * sph[m] + pi * cph[m]
                # Re[c_i conj(d_j) e^{i (E_i - E_j) t}]
                dj = d[j - N]
                sr = c[i].real * dj.real + c[i].imag * dj.imag
                si = c[i].imag * dj.real - c[i].real * dj.imag
                x = (E[i] - E[j]) * times[t]
                gr = cos(x)
                gi = sin(x)
                mr = sr * gr - si * gi
                acc += mr * (wr * wr + wi * wi)
            ov[t, i] = acc
    return out


def sin_cross_sums(const cnp.complex128_t[:, ::1] S, const double[::1] lam, const double[::1] times,
                   const cnp.complex128_t[::1] c, const cnp.complex128_t[::1] d, const double[::1] E,
                   Py_ssize_t j_lo, Py_ssize_t j_hi):
    cdef Py_ssize_t T = times.shape[0]
    cdef Py_ssize_t D = lam.shape[0]
    cdef Py_ssize_t N = c.shape[0]
    cdef cnp.ndarray[cnp.complex128_t, ndim=2] out = np.zeros((T, N), dtype=np.complex128)
    cdef cnp.complex128_t[:, ::1] ov = out
    if j_hi <= j_lo:
        return out
    cdef double[::1] sph = np.empty(D)
    cdef Py_ssize_t t, i, j, m
    cdef double x, wr, wi, sr, si, gr, gi, mr, ar, ai
    cdef double complex sim, sjm, dj
    for t in range(T):
        for m in range(D):
            sph[m] = sin(lam[m] * times[t])
        for i in range(N):
            ar = 0.0
            ai = 0.0
            for j in range(j_lo, j_hi):
                wr = 0.0
                wi = 0.0
                for m in range(D):
                    sim = S[i, m]
                    sjm = S[j, m]
                    wr += (sim.real * sjm.real + sim.imag * sjm.imag) * sph[m]
                    wi += (sim.imag * sjm.real - sim.real * sjm.imag) * sph[m]
                dj = d[j - N]
                sr = c[i].real * dj.real + c[i].imag * dj.imag
                si = c[i].imag * dj.real - c[i].real * dj.imag
                x = (E[i] - E[j]) * times[t]
                gr = cos(x)
                gi = sin(x)
                mr = sr * gr - si * gi
                ar += mr * wr
                ai += mr * wi
            ov[t, i].real = ar
            ov[t, i].imag = ai
    return out
